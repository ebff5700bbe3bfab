#include "buckopt/element.hpp"

namespace buckopt {

Vec6 load_direction(LoadCase lc) {
    Vec6 n = Vec6::Zero();
    if (lc == LoadCase::Hydrostatic)
        n << -1, -1, -1, 0, 0, 0;
    else
        n << -1, 0, 0, 0, 0, 0;
    return n;
}

const std::array<std::array<int, 3>, 8>& VoxelGrid::corner_offsets() {
    static const std::array<std::array<int, 3>, 8> o = {{{0, 0, 0},
                                                         {1, 0, 0},
                                                         {1, 1, 0},
                                                         {0, 1, 0},
                                                         {0, 0, 1},
                                                         {1, 0, 1},
                                                         {1, 1, 1},
                                                         {0, 1, 1}}};
    return o;
}

Mat6 isotropic_C(double E, double nu) {
    Mat6 C = Mat6::Zero();
    double c = E / ((1 + nu) * (1 - 2 * nu));
    double d = c * (1 - nu), o = c * nu, g = E / (2 * (1 + nu));
    C(0, 0) = C(1, 1) = C(2, 2) = d;
    C(0, 1) = C(1, 0) = C(0, 2) = C(2, 0) = C(1, 2) = C(2, 1) = o;
    C(3, 3) = C(4, 4) = C(5, 5) = g;
    return C;
}

Mat3 voigt_to_tensor(const Vec6& s) {
    Mat3 t;
    t << s(0), s(5), s(4), s(5), s(1), s(3), s(4), s(3), s(2);
    return t;
}

namespace {

// corner sign triples matching VoxelGrid::corner_offsets (s = 2*offset - 1)
std::array<Vec3, 8> corner_signs() {
    std::array<Vec3, 8> s;
    for (int c = 0; c < 8; c++) {
        const auto& o = VoxelGrid::corner_offsets()[c];
        s[c] = Vec3(2 * o[0] - 1, 2 * o[1] - 1, 2 * o[2] - 1);
    }
    return s;
}

Mat6x24 strain_matrix(const Mat3x8& dndx) {
    Mat6x24 B = Mat6x24::Zero();
    for (int a = 0; a < 8; a++) {
        double gx = dndx(0, a), gy = dndx(1, a), gz = dndx(2, a);
        B(0, 3 * a + 0) = gx;
        B(1, 3 * a + 1) = gy;
        B(2, 3 * a + 2) = gz;
        B(3, 3 * a + 1) = gz;  // gamma_23
        B(3, 3 * a + 2) = gy;
        B(4, 3 * a + 0) = gz;  // gamma_13
        B(4, 3 * a + 2) = gx;
        B(5, 3 * a + 0) = gy;  // gamma_12
        B(5, 3 * a + 1) = gx;
    }
    return B;
}

}  // namespace

H11Element::H11Element(double h_, double nu) : h(h_), vol(h_ * h_ * h_) {
    C = isotropic_C(1.0, nu);
    const double g = 1.0 / std::sqrt(3.0);
    const double jac = 2.0 / h;          // d xi / dx
    const double dv = vol / 8.0;         // detJ * unit gauss weight
    const auto signs = corner_signs();

    std::array<Eigen::Matrix<double, 6, 9>, 8> Ba;
    Eigen::Matrix<double, 6, 9> Ba_mean = Eigen::Matrix<double, 6, 9>::Zero();

    for (int gp = 0; gp < 8; gp++) {
        const auto& o = VoxelGrid::corner_offsets()[gp];
        Vec3 xi(g * (2 * o[0] - 1), g * (2 * o[1] - 1), g * (2 * o[2] - 1));

        Mat3x8 dndx;
        for (int a = 0; a < 8; a++) {
            const Vec3& s = signs[a];
            dndx(0, a) = jac * s(0) * (1 + s(1) * xi(1)) * (1 + s(2) * xi(2)) / 8.0;
            dndx(1, a) = jac * s(1) * (1 + s(0) * xi(0)) * (1 + s(2) * xi(2)) / 8.0;
            dndx(2, a) = jac * s(2) * (1 + s(0) * xi(0)) * (1 + s(1) * xi(1)) / 8.0;
        }
        dN[gp] = dndx;
        B[gp] = strain_matrix(dndx);  // compatible part, corrected below

        // incompatible modes P_m = 1 - xi_m^2 per component; dof index 3m+c
        Eigen::Matrix<double, 6, 9> ba = Eigen::Matrix<double, 6, 9>::Zero();
        for (int m = 0; m < 3; m++) {
            double grad = jac * (-2.0 * xi(m));  // dP_m/dx_m, other derivatives vanish
            Mat3x8 dp = Mat3x8::Zero();
            // reuse strain_matrix layout through a single pseudo-node per component
            for (int c = 0; c < 3; c++) {
                Vec3 gvec = Vec3::Zero();
                gvec(m) = grad;
                int col = 3 * m + c;
                ba(c, col) += gvec(c);
                // engineering shear rows
                if (c == 1) ba(3, col) += gvec(2);
                if (c == 2) ba(3, col) += gvec(1);
                if (c == 0) ba(4, col) += gvec(2);
                if (c == 2) ba(4, col) += gvec(0);
                if (c == 0) ba(5, col) += gvec(1);
                if (c == 1) ba(5, col) += gvec(0);
            }
        }
        Ba[gp] = ba;
        Ba_mean += ba * (dv / vol);
    }

    // volumetric (Taylor) correction: zero-mean incompatible strains so the
    // element passes the patch test; a no-op on regular cubes
    for (int gp = 0; gp < 8; gp++) Ba[gp] -= Ba_mean;

    Mat24 kdd = Mat24::Zero();
    Eigen::Matrix<double, 24, 9> kda = Eigen::Matrix<double, 24, 9>::Zero();
    Eigen::Matrix<double, 9, 9> kaa = Eigen::Matrix<double, 9, 9>::Zero();
    Mat24x6 fd = Mat24x6::Zero();
    Eigen::Matrix<double, 9, 6> fa = Eigen::Matrix<double, 9, 6>::Zero();
    for (int gp = 0; gp < 8; gp++) {
        w[gp] = dv;
        kdd += dv * B[gp].transpose() * C * B[gp];
        kda += dv * B[gp].transpose() * C * Ba[gp];
        kaa += dv * Ba[gp].transpose() * C * Ba[gp];
        fd += dv * B[gp].transpose() * C;
        fa += dv * Ba[gp].transpose() * C;
    }
    k_h8 = kdd;

    Eigen::Matrix<double, 9, 24> Km = -kaa.ldlt().solve(kda.transpose());
    k0 = kdd + kda * Km;
    k0 = 0.5 * (k0 + k0.transpose()).eval();
    f0 = fd + Km.transpose() * fa;
    for (int gp = 0; gp < 8; gp++) B[gp] += Ba[gp] * Km;
}

Mat8 H11Element::stress_stiffness8(const std::array<Vec6, 8>& sig) const {
    Mat8 ks = Mat8::Zero();
    for (int gp = 0; gp < 8; gp++) {
        Mat3 t = voigt_to_tensor(sig[gp]);
        ks += w[gp] * dN[gp].transpose() * t * dN[gp];
    }
    return ks;
}

}  // namespace buckopt
