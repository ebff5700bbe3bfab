#include "buckopt/homogenize.hpp"

namespace buckopt {

namespace {

Eigen::Matrix<double, 24, 6> gather_chi(const HomState& hs, const ElementDofs& ed) {
    Eigen::Matrix<double, 24, 6> X;
    for (int a = 0; a < 6; a++)
        for (int c = 0; c < 8; c++)
            for (int d = 0; d < 3; d++) X(3 * c + d, a) = hs.chi[a](3 * ed.node[c] + d);
    return X;
}

}  // namespace

EffectiveProps props_from_C(const Mat6& C, double volfrac) {
    EffectiveProps p;
    p.C = C;
    p.S = C.inverse();
    p.Ebar = 1.0 / p.S(0, 0);
    p.kappabar = (C(0, 0) + 2.0 * C(0, 1)) / 3.0;
    p.zener = 2.0 * C(5, 5) / (C(0, 0) - C(0, 1));
    p.volfrac = volfrac;
    return p;
}

HomState homogenize(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                    const BaseMaterial& mat, const SolveOpts& opts) {
    if (rho_phys.size() != grid.nelem())
        throw ConfigError("density field size does not match grid");
    HomState hs;
    hs.K0 = std::make_shared<StencilMatrix>(grid, 3, false);
    assemble_k0(*hs.K0, grid, el, rho_phys, mat, WaveVector{});
    hs.solver = std::make_shared<IcCg>(hs.K0->matrix(), 3);
    hs.loads = assemble_unit_loads(grid, el, rho_phys, mat);

    hs.chi.resize(6);
    for (int a = 0; a < 6; a++) {
        SolveStats st;
        hs.chi[a] = hs.solver->solve(hs.loads.col(a), nullptr, opts, &st);
        if (st.iters > hs.worst_solve.iters) hs.worst_solve = st;
    }

    Mat6 C = Mat6::Zero();
    for (int e = 0; e < grid.nelem(); e++) {
        double Ee = mat.interp_k(rho_phys(e));
        ElementDofs ed = element_dofs(grid, e);
        Eigen::Matrix<double, 24, 6> X = gather_chi(hs, ed);
        for (int gp = 0; gp < 8; gp++) {
            Mat6 M = Mat6::Identity() - el.B[gp] * X;  // columns: eps_a - B chi_a
            C += (el.w[gp] * Ee) * M.transpose() * el.C * M;
        }
    }
    C = 0.5 * (C + C.transpose()).eval();  // |Y| = 1
    hs.props = props_from_C(C, rho_phys.mean());
    return hs;
}

Mat6 effective_matrix_energy_route(const VoxelGrid& grid, const H11Element& el,
                                   const VectorXd& rho_phys, const BaseMaterial& mat,
                                   const HomState& hs) {
    double Esum = 0;
    for (int e = 0; e < grid.nelem(); e++) Esum += mat.interp_k(rho_phys(e));
    Mat6 C0 = Esum * el.vol * el.C;
    Mat6 C = C0;
    for (int a = 0; a < 6; a++)
        for (int b = 0; b < 6; b++) C(a, b) -= hs.loads.col(b).dot(hs.chi[a]);
    return C;
}

Vec6 macro_strain(const EffectiveProps& props, LoadCase lc, double sigma0) {
    return props.S * (sigma0 * load_direction(lc));
}

std::array<Vec6, 8> element_stress(const VoxelGrid& grid, const H11Element& el,
                                   const VectorXd& rho_phys, const BaseMaterial& mat,
                                   const HomState& hs, const Vec6& eps0, int e) {
    ElementDofs ed = element_dofs(grid, e);
    Eigen::Matrix<double, 24, 6> X = gather_chi(hs, ed);
    Eigen::Matrix<double, 24, 1> upre = X * eps0;
    double Es = mat.interp_s(rho_phys(e));
    std::array<Vec6, 8> sig;
    for (int gp = 0; gp < 8; gp++) sig[gp] = Es * el.C * (eps0 - el.B[gp] * upre);
    return sig;
}

Prestress compute_prestress(const VoxelGrid& grid, const H11Element& el,
                            const VectorXd& rho_phys, const BaseMaterial& mat,
                            const HomState& hs, LoadCase lc, double sigma0) {
    Prestress ps;
    ps.eps0 = macro_strain(hs.props, lc, sigma0);
    ps.ks8.resize(grid.nelem());
    for (int e = 0; e < grid.nelem(); e++) {
        std::array<Vec6, 8> sig = element_stress(grid, el, rho_phys, mat, hs, ps.eps0, e);
        ps.ks8[e] = el.stress_stiffness8(sig);
    }
    return ps;
}

}  // namespace buckopt
