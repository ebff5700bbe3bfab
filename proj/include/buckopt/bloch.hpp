#pragma once

#include <optional>
#include <string>

#include "buckopt/homogenize.hpp"

namespace buckopt {

struct EigOpts {
    int m = 6;               // bands to converge
    int extra = 4;           // additional subspace vectors
    double tol = 1e-7;       // relative eigenpair residual
    int maxit = 500;         // outer iterations
    double inner_tol = 1e-8;
    int inner_maxit = 20000;
    uint64_t seed = 0x5eedULL;
    // bands with tau < 0.9 tau_top only need tol * tail_relax: their KS weight
    // is e^{-10} or less, and Ritz values carry resid^2 accuracy regardless
    double tail_relax = 100.0;
};

struct BandResult {
    std::vector<double> tau;       // descending; load factors are 1/tau
    std::vector<VectorXcd> phi;    // K0-orthonormal Bloch modes (master dofs)
    int outer_iters = 0;
    double max_resid = 0;
    bool no_positive = false;  // no positive tau: no buckling under this load
};

// K0(k) and K_sigma(k) for one design + pre-stress at one wave vector.
// Components of k in {0, pi} run in real arithmetic; general k runs through the
// exact real 2N embedding of the Hermitian operators.
class BlochSystem {
  public:
    BlochSystem(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                const BaseMaterial& mat, const Prestress& ps, const WaveVector& k);

    int ndof() const { return 3 * N_; }
    bool real_mode() const { return real_; }
    const WaveVector& k() const { return k_; }

    VectorXd mult_k0(const VectorXd& v) const;
    VectorXd mult_ksig(const VectorXd& v) const;
    VectorXd solve_k0(const VectorXd& b, const VectorXd* warm, SolveStats* st = nullptr) const;
    VectorXd solve_k0(const VectorXd& b, const VectorXd* warm, const SolveOpts& so,
                      SolveStats* st = nullptr) const;
    VectorXcd mult_k0(const VectorXcd& v) const;
    VectorXcd mult_ksig(const VectorXcd& v) const;
    VectorXcd solve_k0(const VectorXcd& b, const VectorXcd* warm, SolveStats* st = nullptr) const;
    VectorXcd solve_k0(const VectorXcd& b, const VectorXcd* warm, const SolveOpts& so,
                       SolveStats* st = nullptr) const;

    void set_inner(double tol, int maxit) { inner_ = {tol, maxit}; }

    const StencilMatrix& k0_matrix() const { return K0_; }
    const StencilMatrix& ksig_matrix() const { return Ks_; }

  private:
    int N_;
    bool real_;
    WaveVector k_;
    StencilMatrix K0_, Ks_;
    std::unique_ptr<IcCg> solver_;
    SolveOpts inner_{1e-8, 20000};
};

// largest-tau eigenpairs of -K_sigma(k) phi = tau K0(k) phi by K0-orthonormal
// block subspace iteration with Rayleigh-Ritz; warm can carry the converged
// basis of a previous call (same k, nearby design)
BandResult buckling_eigensolve(const BlochSystem& sys, const EigOpts& opts,
                               Eigen::MatrixXcd* warm = nullptr);

// named IBZ vertices for the cubic (hydrostatic) and tetragonal (uniaxial) sets
struct PathPoint {
    std::string name;
    Vec3 k;
};

std::vector<WaveVector> ibz_targets(LoadCase lc);   // includes the long-wave point pi/20
std::vector<PathPoint> default_path(LoadCase lc);   // polyline through IBZ vertices

struct BandSweep {
    std::vector<double> arc;     // cumulative arclength along the path
    std::vector<Vec3> ks;
    Eigen::MatrixXd lambda;      // nsamples x m, ascending per row (1/tau)
    double sigma_cri = 0;        // sigma0 * min lambda over samples
    int argmin = -1;
    VectorXcd crit_mode;
    Vec3 crit_k = Vec3::Zero();
    std::vector<int> jump_flags;  // samples where min-lambda jumps > 20%
    bool no_positive = false;
};

inline constexpr double kLambdaInf = 1e30;  // sentinel for tau <= 0 bands

BandSweep sweep_bands(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                      const BaseMaterial& mat, const Prestress& ps,
                      const std::vector<PathPoint>& path, int samples_per_segment,
                      const EigOpts& opts, double sigma0 = 1.0);

struct TargetEval {
    std::vector<WaveVector> ks;
    std::vector<BandResult> bands;
    double sigma_cri = 0;
    int crit_k = -1;
    bool no_positive = false;
};

// bands_per_k (optional) overrides opts.m per target point
TargetEval evaluate_targets(const VoxelGrid& grid, const H11Element& el,
                            const VectorXd& rho_phys, const BaseMaterial& mat,
                            const Prestress& ps, LoadCase lc, const EigOpts& opts,
                            double sigma0 = 1.0,
                            std::vector<Eigen::MatrixXcd>* warm = nullptr,
                            const std::vector<int>* bands_per_k = nullptr);

}  // namespace buckopt
