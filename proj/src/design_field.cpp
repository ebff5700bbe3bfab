#include "buckopt/design_field.hpp"

#include <cmath>
#include <vector>

namespace buckopt {

PdeFilter::PdeFilter(const VoxelGrid& grid, double radius) : radius_(radius) {
    if (radius <= 0) throw ConfigError("filter radius must be positive");
    const int n = grid.n, N = grid.nelem();
    const double c = std::pow(radius / (2.0 * std::sqrt(3.0)), 2) / (grid.h() * grid.h());

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(size_t(N) * 7);
    for (int e = 0; e < N; e++) {
        int i = e % n, j = (e / n) % n, k = e / (n * n);
        double diag = 1.0;
        auto nbr = [&](int ii, int jj, int kk) {
            int o = grid.lin((ii + n) % n, (jj + n) % n, (kk + n) % n);
            trips.emplace_back(e, o, -c);
            diag += c;
        };
        nbr(i - 1, j, k);
        nbr(i + 1, j, k);
        nbr(i, j - 1, k);
        nbr(i, j + 1, k);
        nbr(i, j, k - 1);
        nbr(i, j, k + 1);
        trips.emplace_back(e, e, diag);
    }
    A_.resize(N, N);
    A_.setFromTriplets(trips.begin(), trips.end());
    solver_ = std::make_unique<IcCg>(A_, 0);
}

VectorXd PdeFilter::apply(const VectorXd& rho) const {
    SolveOpts opts;
    opts.tol = 1e-10;
    return solver_->solve(rho, nullptr, opts);
}

VectorXd project_field(const VectorXd& tilde, double beta, double eta) {
    double den = std::tanh(beta * eta) + std::tanh(beta * (1.0 - eta));
    double num0 = std::tanh(beta * eta);
    return ((num0 + (beta * (tilde.array() - eta)).tanh()) / den).matrix();
}

VectorXd project_deriv(const VectorXd& tilde, double beta, double eta) {
    double den = std::tanh(beta * eta) + std::tanh(beta * (1.0 - eta));
    Eigen::ArrayXd t = (beta * (tilde.array() - eta)).tanh();
    return (beta * (1.0 - t * t) / den).matrix();
}

RobustTriple realize_robust(const PdeFilter& filter, const VectorXd& rho, double beta1,
                            double deta) {
    RobustTriple out;
    out.tilde = filter.apply(rho);
    out.eroded = project_field(out.tilde, beta1, 0.5 + deta);
    out.intermediate = project_field(out.tilde, beta1, 0.5);
    out.dilated = project_field(out.tilde, beta1, 0.5 - deta);
    return out;
}

double volume_fraction(const VectorXd& rho) { return rho.mean(); }

double grayness(const VectorXd& rho) {
    return (4.0 * rho.array() * (1.0 - rho.array())).mean();
}

namespace {

// the 48 cubic maps as (permutation, per-axis flip); flip acts as i -> n-1-i
struct CubicOps {
    std::array<std::array<int, 3>, 6> perms = {
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
};

}  // namespace

VectorXd cubic_symmetrize(const VoxelGrid& grid, const VectorXd& field) {
    const int n = grid.n;
    CubicOps ops;
    VectorXd out = VectorXd::Zero(field.size());
    for (int e = 0; e < grid.nelem(); e++) {
        int idx[3] = {e % n, (e / n) % n, e / (n * n)};
        double acc = 0;
        for (const auto& pm : ops.perms)
            for (int fl = 0; fl < 8; fl++) {
                int c[3];
                for (int d = 0; d < 3; d++) {
                    int v = idx[pm[d]];
                    c[d] = (fl >> d) & 1 ? n - 1 - v : v;
                }
                acc += field(grid.lin(c[0], c[1], c[2]));
            }
        out(e) = acc / 48.0;
    }
    return out;
}

bool is_cubic_symmetric(const VoxelGrid& grid, const VectorXd& field, double tol) {
    return (cubic_symmetrize(grid, field) - field).lpNorm<Eigen::Infinity>() <= tol;
}

VectorXd voxel_hollow_sphere(const VoxelGrid& grid, double r_in, double r_out) {
    if (!(0 <= r_in && r_in < r_out)) throw ConfigError("invalid hollow sphere radii");
    // material where the nearest periodic image center is at shell distance:
    // every cavity carves the overlapping shells of its neighbors, which opens
    // the ring windows around the face contact disks. Those windows are about
    // one voxel wide even at 64^3, so each voxel carries the coverage fraction
    // of a regular s^3 subsample instead of a centroid indicator.
    const int s = 6;
    const double h = grid.h();
    VectorXd rho = VectorXd::Zero(grid.nelem());
    for (int e = 0; e < grid.nelem(); e++) {
        Vec3 x0 = grid.centroid(e) - 0.5 * h * Vec3::Ones();
        int hits = 0;
        for (int a = 0; a < s; a++)
            for (int b = 0; b < s; b++)
                for (int c = 0; c < s; c++) {
                    Vec3 x = x0 + (h / s) * Vec3(a + 0.5, b + 0.5, c + 0.5);
                    double d2 = 0;
                    for (int j = 0; j < 3; j++) {
                        double w = std::abs(x[j] - 0.5);
                        w = std::min(w, 1.0 - w);
                        d2 += w * w;
                    }
                    double d = std::sqrt(d2);
                    if (r_in <= d && d <= r_out) hits++;
                }
        rho(e) = double(hits) / (s * s * s);
    }
    return rho;
}

}  // namespace buckopt
