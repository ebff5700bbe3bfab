#pragma once

#include <filesystem>

#include "buckopt/sensitivity.hpp"
#include "buckopt/topopt.hpp"

namespace buckopt {

// one super-ellipsoid: center c, control point z on the inner surface,
// thickness t (hollow only), power p
struct SuperEllipsoid {
    Vec3 c = Vec3::Zero();
    Vec3 z = Vec3::Zero();
    double t = 0;
    double p = 2;
    bool hollow = true;
};

using Vec14 = Eigen::Matrix<double, 14, 1>;

// Tab.-2 pattern: S1 free in the wedge, S2 axis plate (t = 0.1, p = 1 fixed),
// S3 face diagonal, S4 body diagonal, S5 solid face-diagonal punch.
// theta = [x1, y1, z1, t1, p1, z2, y3, t3, p3, x4, t4, p4, x5, p5]
struct FeatureSet {
    Vec14 theta = Vec14::Zero();
    double t2 = 0.1;  // preset "big" plate thickness

    static const std::array<const char*, 14>& names();
    static FeatureSet reference();  // p_i = 1.5, t_i = 0.05 illustration set

    std::array<SuperEllipsoid, 5> features() const;
    void validate() const;  // bounds and degeneracy (named feature)
};

// T of Eq. (14) with |a|^p smoothed as (a^2 + eps^2)^(p/2), and its gradient
// with respect to (z, p) and the evaluation point
double feature_T(const Vec3& x, const SuperEllipsoid& s, double t);

// logistic density of Eq. (16); surface = 0 gives the inner, 1 the outer shell
double feature_density(const Vec3& x, const SuperEllipsoid& s, int surface);

// raw composed field of Eq. (18) on the descending-sorted 1/48 wedge
VectorXd compose(const FeatureSet& fs, const VoxelGrid& grid);
// same plus d rho_raw / d theta (N x 14)
VectorXd compose_with_grads(const FeatureSet& fs, const VoxelGrid& grid, Eigen::MatrixXd& grads);

// physical field: compose -> PDE filter -> projection (beta1, eta = 0.5)
VectorXd shape_physical(const FeatureSet& fs, const VoxelGrid& grid, const PdeFilter& filter,
                        double beta1);

// FeatureSet text file: one "name = value" line per parameter
FeatureSet read_featureset(const std::filesystem::path& path);
void write_featureset(const std::filesystem::path& path, const FeatureSet& fs);

struct ShapeConfig {
    int n = 64;
    LoadCase load = LoadCase::Uniaxial;
    double gamma1 = 1.0;
    double f_star = 0.2;
    double delta = 0.05;
    double radius = 0.025;  // fixed by the method
    double beta1 = 50.0;    // fixed by the method
    int band_refresh = 20, zeta_refresh = 100;
    double band_window = 0.05;
    int max_iter = 200;
    double move = 0.1;
    double change_tol = 1e-4;
    double sigma0 = 1.0;
    int refresh_bands = 6, sweep_m = 3, path_samples = 5;
    double p_min = 0.25, p_max = 4.0, t_max = 0.5;
    BaseMaterial mat;
    SolveOpts solve;
    EigOpts eig;
    std::filesystem::path outdir;

    void validate() const;
    // optimizer bounds; location variables keep a small interior margin so a
    // bound-active iterate cannot degenerate a feature
    void bounds(Vec14& lo, Vec14& hi) const;
};

struct ShapeResult {
    FeatureSet fs;
    VectorXd physical;
    EffectiveProps props;
    double sigma_cri = 0;
    Vec3 crit_k = Vec3::Zero();
    int iterations = 0;
    std::vector<IterRecord> history;
    BandSweep final_sweep;
};

ShapeResult run_shape_optimization(const ShapeConfig& cfg, const FeatureSet& init);

// least-squares fit of the 14 parameters to a density field (projected
// gradient with backtracking); returns the fitted set and the residual
FeatureSet fit_features(const VoxelGrid& grid, const VectorXd& target, const FeatureSet& init,
                        int iters, double* final_resid = nullptr);

}  // namespace buckopt
