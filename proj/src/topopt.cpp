#include "buckopt/topopt.hpp"

#include <algorithm>
#include <cmath>

#include "buckopt/io.hpp"

namespace buckopt {

namespace {

// per-target band counts: taus within the window of the global max, floor 1
std::vector<int> band_counts(const TargetEval& ev, double window, int cap) {
    double tmax = -1e300;
    for (const auto& br : ev.bands)
        for (double t : br.tau) tmax = std::max(tmax, t);
    double thr = tmax - window * std::abs(tmax);
    std::vector<int> counts(ev.bands.size(), 1);
    for (size_t l = 0; l < ev.bands.size(); l++) {
        int c = 0;
        for (double t : ev.bands[l].tau)
            if (t >= thr) c++;
        counts[l] = std::clamp(c, 1, cap);
    }
    return counts;
}

void checkpoint(const OptConfig& cfg, const VoxelGrid& grid, int it, const VectorXd& raw,
                const VectorXd& phys, const std::vector<IterRecord>& history) {
    if (cfg.outdir.empty()) return;
    char name[64];
    std::snprintf(name, sizeof name, "checkpoint_raw_%04d.bin", it);
    write_density(cfg.outdir / name, grid, raw);
    std::snprintf(name, sizeof name, "checkpoint_phys_%04d.bin", it);
    write_density(cfg.outdir / name, grid, phys);
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : history) rows.push_back(log_row(r));
    write_csv(cfg.outdir / "log.csv", log_header(int(history.front().taumax_k.size())), rows);
}

}  // namespace

void OptConfig::validate() const {
    if (n < 2) throw ConfigError("grid resolution must be >= 2");
    if (gamma1 < 0 || gamma1 > 1) throw ConfigError("gamma1 must be in [0, 1]");
    if (f_star <= 0 || f_star > 1) throw ConfigError("volume bound must be in (0, 1]");
    if (delta <= 0) throw ConfigError("isotropy tolerance must be positive");
    if (radius <= 0) throw ConfigError("filter radius must be positive");
    if (deta < 0 || deta >= 0.5) throw ConfigError("deta must be in [0, 0.5)");
    if (beta1_init <= 0 || beta1_max < beta1_init) throw ConfigError("bad beta1 schedule");
    if (beta1_period <= 0 || band_refresh <= 0 || zeta_refresh <= 0 || checkpoint_period <= 0)
        throw ConfigError("schedule periods must be positive");
    if (max_iter < 0) throw ConfigError("max iterations must be >= 0");
    if (sigma0 <= 0) throw ConfigError("sigma0 must be positive");
    if (refresh_bands < 1 || sweep_m < 1 || path_samples < 1)
        throw ConfigError("band counts and path samples must be >= 1");
}

std::vector<std::string> log_header(int ntargets) {
    std::vector<std::string> h = {"iter", "J",     "KS",    "Ebar",  "kappabar",
                                  "a_r",  "f_er",  "f_int", "f_dil", "ntau",
                                  "beta1", "zeta", "change", "fstar_dil"};
    for (int l = 0; l < ntargets; l++) h.push_back("tau_k" + std::to_string(l));
    for (int l = 0; l < ntargets; l++) h.push_back("m_k" + std::to_string(l));
    h.push_back("obj_realization");
    h.push_back("vol_realization");
    return h;
}

std::vector<std::string> log_row(const IterRecord& r, const char* obj_real,
                                 const char* vol_real) {
    std::vector<std::string> row = {std::to_string(r.iter), fmt17(r.J),     fmt17(r.ks),
                                    fmt17(r.Ebar),          fmt17(r.kappa), fmt17(r.zener),
                                    fmt17(r.f_er),          fmt17(r.f_int), fmt17(r.f_dil),
                                    std::to_string(r.ntau), fmt17(r.beta1), fmt17(r.zeta),
                                    fmt17(r.change),        fmt17(r.fstar_dil)};
    for (double t : r.taumax_k) row.push_back(fmt17(t));
    for (int c : r.counts_k) row.push_back(std::to_string(c));
    row.push_back(obj_real);
    row.push_back(vol_real);
    return row;
}

OptResult run_robust_optimization(const OptConfig& cfg, const VectorXd& seed_raw) {
    cfg.validate();
    VoxelGrid grid(cfg.n);
    if (seed_raw.size() != grid.nelem()) throw ConfigError("seed field size does not match grid");
    H11Element el(grid.h(), cfg.mat.nu);
    PdeFilter filter(grid, cfg.radius);

    const int N = grid.nelem();
    const int ntargets = int(ibz_targets(cfg.load).size());
    const bool buckling = cfg.gamma1 > 0;

    VectorXd x = seed_raw.cwiseMax(0.0).cwiseMin(1.0);
    if (cfg.symmetrize) x = cubic_symmetrize(grid, x);

    Mma mma(N, 2, cfg.move);
    double beta1 = cfg.beta1_init;
    double zeta = 100.0;
    double fstar_dil = cfg.f_star;
    std::vector<int> counts(ntargets, 1);
    std::vector<Eigen::MatrixXcd> warm(ntargets);

    OptResult res;
    RobustTriple rt;
    for (int it = 1; it <= cfg.max_iter; it++) {
        rt = realize_robust(filter, x, beta1, cfg.deta);
        IterRecord rec;
        rec.iter = it;
        rec.f_er = volume_fraction(rt.eroded);
        rec.f_int = volume_fraction(rt.intermediate);
        rec.f_dil = volume_fraction(rt.dilated);
        if (rec.f_er > rec.f_int + 1e-12 || rec.f_int > rec.f_dil + 1e-12)
            res.volume_ordering_ok = false;

        bool refresh = (it - 1) % cfg.band_refresh == 0;
        if (refresh && it > 1)
            fstar_dil = std::clamp(fstar_dil * cfg.f_star / rec.f_int, cfg.f_star, 1.0);

        // eroded realization carries the objective; the isotropy constraint
        // acts on the blueprint (intermediate): a_r is not monotone under
        // erosion, and the delivered design is the one whose isotropy matters
        HomState hs = homogenize(grid, el, rt.eroded, cfg.mat, cfg.solve);
        HomState hs_int = homogenize(grid, el, rt.intermediate, cfg.mat, cfg.solve);
        rec.Ebar = hs.props.Ebar;
        rec.kappa = hs.props.kappabar;
        rec.zener = hs_int.props.zener;

        VectorXd dJ_phys;
        if (buckling) {
            Prestress ps = compute_prestress(grid, el, rt.eroded, cfg.mat, hs, cfg.load,
                                             cfg.sigma0);
            EigOpts eo = cfg.eig;
            TargetEval ev;
            if (refresh) {
                eo.m = cfg.refresh_bands;
                ev = evaluate_targets(grid, el, rt.eroded, cfg.mat, ps, cfg.load, eo,
                                      cfg.sigma0, &warm);
                counts = band_counts(ev, cfg.band_window, cfg.refresh_bands);
            } else {
                ev = evaluate_targets(grid, el, rt.eroded, cfg.mat, ps, cfg.load, eo,
                                      cfg.sigma0, &warm, &counts);
            }
            std::vector<double> taus;
            std::vector<std::pair<int, int>> sel;
            for (int l = 0; l < ntargets; l++) {
                rec.taumax_k.push_back(ev.bands[l].tau[0]);
                for (int h = 0; h < counts[l]; h++) {
                    taus.push_back(ev.bands[l].tau[h]);
                    sel.push_back({l, h});
                }
            }
            double taumax = *std::max_element(taus.begin(), taus.end());
            if ((it - 1) % cfg.zeta_refresh == 0) zeta = taumax > 0 ? 100.0 / taumax : 100.0;
            rec.ks = ks_aggregate(taus, zeta);
            rec.ntau = int(taus.size());
            auto modes = mode_contributions(ev, sel, ks_weights(taus, zeta));
            TauSensitivity ts = dtau_drho(grid, el, rt.eroded, cfg.mat, hs, ps, modes);
            dJ_phys = cfg.gamma1 * ts.dtau;
        } else {
            rec.taumax_k.assign(ntargets, std::nan(""));
            dJ_phys = VectorXd::Zero(N);
        }
        rec.counts_k = counts;
        rec.J = cfg.gamma1 * rec.ks + (1.0 - cfg.gamma1) / rec.Ebar;
        if (cfg.gamma1 < 1.0) {
            VectorXd dE = dEbar_drho(grid, el, rt.eroded, cfg.mat, hs);
            dJ_phys += (cfg.gamma1 - 1.0) / (rec.Ebar * rec.Ebar) * dE;
        }

        // constraints: volume on dilated, isotropy on intermediate, O(1) scaled
        double g_vol = rec.f_dil / fstar_dil - 1.0;
        double ar1 = rec.zener - 1.0;
        double g_iso = (ar1 * ar1 - cfg.delta * cfg.delta) / (cfg.delta * cfg.delta);
        VectorXd dgv_phys = VectorXd::Constant(N, 1.0 / (N * fstar_dil));
        VectorXd dgi_phys = (2.0 * ar1 / (cfg.delta * cfg.delta)) *
                            dzener_drho(grid, el, rt.intermediate, cfg.mat, hs_int);

        VectorXd dJ = chain_to_raw(filter, rt.tilde, beta1, 0.5 + cfg.deta, dJ_phys);
        VectorXd dgi = chain_to_raw(filter, rt.tilde, beta1, 0.5, dgi_phys);
        VectorXd dgv = chain_to_raw(filter, rt.tilde, beta1, 0.5 - cfg.deta, dgv_phys);
        if (cfg.symmetrize) {
            dJ = cubic_symmetrize(grid, dJ);
            dgi = cubic_symmetrize(grid, dgi);
            dgv = cubic_symmetrize(grid, dgv);
        }

        VectorXd g(2);
        g << g_vol, g_iso;
        Eigen::MatrixXd dg(2, N);
        dg.row(0) = dgv.transpose();
        dg.row(1) = dgi.transpose();
        VectorXd xnew = mma.update(x, dJ, g, dg, VectorXd::Zero(N), VectorXd::Ones(N));
        if (cfg.symmetrize) xnew = cubic_symmetrize(grid, xnew);
        rec.change = (xnew - x).cwiseAbs().maxCoeff();
        x = xnew;

        rec.beta1 = beta1;
        rec.zeta = zeta;
        rec.fstar_dil = fstar_dil;
        res.history.push_back(rec);
        res.iterations = it;

        if (it % cfg.checkpoint_period == 0)
            checkpoint(cfg, grid, it, x, rt.intermediate, res.history);
        if (it % cfg.beta1_period == 0) beta1 = std::min(2.0 * beta1, cfg.beta1_max);
        if (rec.change < cfg.change_tol && beta1 >= cfg.beta1_max) break;
    }

    rt = realize_robust(filter, x, beta1, cfg.deta);
    res.raw = x;
    res.eroded = rt.eroded;
    res.intermediate = rt.intermediate;
    res.dilated = rt.dilated;
    res.grayness_int = grayness(rt.intermediate);

    HomState hs = homogenize(grid, el, rt.intermediate, cfg.mat, cfg.solve);
    res.props_int = hs.props;
    // sigma_cri is always reported from a dense boundary sweep of the
    // intermediate design, never from the target-point set
    Prestress ps =
        compute_prestress(grid, el, rt.intermediate, cfg.mat, hs, cfg.load, cfg.sigma0);
    EigOpts eo = cfg.eig;
    eo.m = cfg.sweep_m;
    res.final_sweep = sweep_bands(grid, el, rt.intermediate, cfg.mat, ps,
                                  default_path(cfg.load), cfg.path_samples, eo, cfg.sigma0);
    res.sigma_cri = res.final_sweep.sigma_cri;
    res.crit_k = res.final_sweep.crit_k;
    if (!res.history.empty() && !cfg.outdir.empty()) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : res.history) rows.push_back(log_row(r));
        write_csv(cfg.outdir / "log.csv", log_header(ntargets), rows);
    }
    return res;
}

}  // namespace buckopt
