#pragma once

#include <filesystem>

#include "buckopt/mma.hpp"
#include "buckopt/sensitivity.hpp"

namespace buckopt {

struct OptConfig {
    int n = 64;
    LoadCase load = LoadCase::Uniaxial;
    double gamma1 = 1.0;   // J = gamma1 KS(tau) + (1-gamma1)/Ebar, eroded realization
    double f_star = 0.2;   // volume bound for the intermediate design
    double delta = 0.05;   // isotropy tolerance on a_r - 1
    double radius = 0.05;  // filter radius
    double deta = 0.05;    // robust threshold offset
    double beta1_init = 1.0, beta1_max = 50.0;
    int beta1_period = 40;   // doubling cadence
    int band_refresh = 20;   // band-count + dilated-volume-rescale cadence
    int zeta_refresh = 100;  // zeta = 100 / max tau cadence
    double band_window = 0.05;
    int max_iter = 400;
    double move = 0.1;
    double change_tol = 1e-3;  // stop below this once beta1 is at cap
    bool symmetrize = true;    // enforce cubic symmetry of design and gradients
    double sigma0 = 1.0;
    int refresh_bands = 6;  // bands per k on refresh iterations
    int sweep_m = 3;        // bands in the final reporting sweep
    int path_samples = 5;   // per path segment in the final sweep
    int checkpoint_period = 20;
    BaseMaterial mat;
    SolveOpts solve;
    EigOpts eig;  // eig.m is managed internally (per-k band counts)
    std::filesystem::path outdir;  // empty: no checkpoint/log files

    void validate() const;
};

struct IterRecord {
    int iter = 0;
    double J = 0, ks = 0, Ebar = 0, kappa = 0, zener = 0;
    double f_er = 0, f_int = 0, f_dil = 0;
    std::vector<double> taumax_k;  // leading tau per target point
    std::vector<int> counts_k;     // bands aggregated per target point
    int ntau = 0;                  // total taus inside the KS
    double beta1 = 0, zeta = 0, change = 0, fstar_dil = 0;
};

struct OptResult {
    VectorXd raw, eroded, intermediate, dilated;
    EffectiveProps props_int;  // intermediate-design properties
    double sigma_cri = 0;      // dense IBZ boundary sweep on the intermediate design
    Vec3 crit_k = Vec3::Zero();
    double grayness_int = 0;
    int iterations = 0;
    bool volume_ordering_ok = true;
    std::vector<IterRecord> history;
    BandSweep final_sweep;
};

// CSV header/row for the per-iteration log (17-digit fields, replayable)
std::vector<std::string> log_header(int ntargets);
std::vector<std::string> log_row(const IterRecord& rec, const char* obj_real = "eroded",
                                 const char* vol_real = "dilated");

OptResult run_robust_optimization(const OptConfig& cfg, const VectorXd& seed_raw);

}  // namespace buckopt
