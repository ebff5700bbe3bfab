#include "buckopt/shapeopt.hpp"

#include <algorithm>
#include <cmath>

#include "buckopt/io.hpp"

namespace buckopt {

namespace {

constexpr double kEps = 1e-9;    // |a|^p -> (a^2 + eps^2)^(p/2)
constexpr double kDelta0 = 1e-10;
constexpr double kBeta2 = 200.0;  // composition sharpness, fixed by the method

// 1 / (1 + exp(u)) without overflow
double logistic(double u) {
    if (u > 0) {
        double e = std::exp(-u);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(u));
}

// T(x, 0) of Eq.-style distance with smoothed powers; optionally its
// gradients with respect to the control point z (through the semi-diameter
// direction), the power p, and the evaluation point x
double T_grad(const Vec3& x, const Vec3& c, const Vec3& z, double p, Vec3* dT_dz, double* dT_dp,
              Vec3* dT_dx) {
    const Vec3 zc = z - c;
    const double r = zc.norm();
    const double d = r + kDelta0;
    const Vec3 n = zc / d;

    Vec3 a, g, dTda;
    double S = 0;
    for (int m = 0; m < 3; m++) {
        a[m] = n[m] * (x[m] - c[m]);
        g[m] = std::pow(a[m] * a[m] + kEps * kEps, 0.5 * p);
        S += g[m];
    }
    const double T = std::pow(S, 1.0 / p);

    if (dT_dz || dT_dp || dT_dx) {
        const double Sf = std::pow(S, 1.0 / p - 1.0);
        for (int m = 0; m < 3; m++)
            dTda[m] = Sf * a[m] * std::pow(a[m] * a[m] + kEps * kEps, 0.5 * p - 1.0);
        if (dT_dx)
            for (int m = 0; m < 3; m++) (*dT_dx)[m] = dTda[m] * n[m];
        if (dT_dz) {
            dT_dz->setZero();
            for (int j = 0; j < 3; j++)
                for (int m = 0; m < 3; m++) {
                    double dn = (m == j ? 1.0 / d : 0.0) - zc[m] * zc[j] / (r * d * d);
                    (*dT_dz)[j] += dTda[m] * (x[m] - c[m]) * dn;
                }
        }
        if (dT_dp) {
            double dS = 0;
            for (int m = 0; m < 3; m++) dS += g[m] * 0.5 * std::log(a[m] * a[m] + kEps * kEps);
            *dT_dp = T * (dS / (p * S) - std::log(S) / (p * p));
        }
    }
    return T;
}

// which global theta index feeds each (z component, t, p) of a feature; -1 = fixed
struct ParamMap {
    int z[3];
    int t;
    int p;
};
constexpr ParamMap kMaps[5] = {{{0, 1, 2}, 3, 4},
                               {{-1, -1, 5}, -1, -1},
                               {{-1, 6, 6}, 7, 8},
                               {{9, 9, 9}, 10, 11},
                               {{12, 12, -1}, -1, 13}};

// control-point value and total derivative of T(z; z, p): the evaluation
// point rides along with the control point
struct FeaturePre {
    double Tz = 0;
    Vec3 dTz_dz = Vec3::Zero();
    double dTz_dp = 0;
};

FeaturePre precompute(const SuperEllipsoid& s, bool want_grad) {
    FeaturePre pre;
    if (want_grad) {
        Vec3 dz, dx;
        double dp;
        pre.Tz = T_grad(s.z, s.c, s.z, s.p, &dz, &dp, &dx);
        pre.dTz_dz = dz + dx;
        pre.dTz_dp = dp;
    } else {
        pre.Tz = T_grad(s.z, s.c, s.z, s.p, nullptr, nullptr, nullptr);
    }
    return pre;
}

// rho^{i,surface} at x, with the 14-vector gradient scattered per kMaps
double surf_density(const Vec3& x, const SuperEllipsoid& s, const FeaturePre& pre, int surface,
                    double beta2, int feat, Vec14* grad) {
    Vec3 dTx_dz;
    double dTx_dp;
    double Tx = T_grad(x, s.c, s.z, s.p, grad ? &dTx_dz : nullptr, grad ? &dTx_dp : nullptr,
                       nullptr);
    double H = Tx - pre.Tz - (surface == 1 ? s.t : 0.0);
    double rho = logistic(beta2 * H);
    if (grad) {
        grad->setZero();
        double f = -beta2 * rho * (1.0 - rho);  // d rho / dH
        const ParamMap& pm = kMaps[feat];
        for (int j = 0; j < 3; j++)
            if (pm.z[j] >= 0) (*grad)[pm.z[j]] += f * (dTx_dz[j] - pre.dTz_dz[j]);
        if (pm.p >= 0) (*grad)[pm.p] += f * (dTx_dp - pre.dTz_dp);
        if (surface == 1 && pm.t >= 0) (*grad)[pm.t] += -f;
    }
    return rho;
}

// fold into [0, 0.5]^3 and sort descending: the 1/48 wedge representative
Vec3 wedge(const Vec3& x) {
    Vec3 u;
    for (int j = 0; j < 3; j++) u[j] = std::min(x[j], 1.0 - x[j]);
    std::sort(u.data(), u.data() + 3, std::greater<double>());
    return u;
}

VectorXd compose_core(const FeatureSet& fs, const VoxelGrid& grid, Eigen::MatrixXd* grads) {
    fs.validate();
    const auto feats = fs.features();
    std::array<FeaturePre, 5> pre;
    for (int i = 0; i < 5; i++) pre[i] = precompute(feats[i], grads != nullptr);

    const int N = grid.nelem();
    VectorXd rho(N);
    if (grads) grads->setZero(N, 14);

    // v[i][s] and their parameter gradients at one point
    double v[5][2];
    Vec14 dv[5][2];
    for (int e = 0; e < N; e++) {
        const Vec3 w = wedge(grid.centroid(e));
        for (int i = 0; i < 5; i++) {
            v[i][0] = surf_density(w, feats[i], pre[i], 0, kBeta2, i, grads ? &dv[i][0] : nullptr);
            if (feats[i].hollow)
                v[i][1] =
                    surf_density(w, feats[i], pre[i], 1, kBeta2, i, grads ? &dv[i][1] : nullptr);
            else {
                v[i][1] = 0;
                if (grads) dv[i][1].setZero();
            }
        }
        const double A1 = v[1][1] * v[2][1] * v[3][1];   // outer main-body intersection
        const double Ain = v[1][0] * v[2][0] * v[3][0];  // its interior
        const double B = v[0][1] * (1.0 - v[0][0]);      // S1 shell
        const double U = 1.0 - (1.0 - A1) * (1.0 - B);
        rho[e] = U * (1.0 - Ain) * (1.0 - v[4][0]);

        if (grads) {
            const double dU_dA1 = 1.0 - B;
            const double dU_dB = 1.0 - A1;
            const double fac = (1.0 - Ain) * (1.0 - v[4][0]);
            Vec14 dA1 = dv[1][1] * (v[2][1] * v[3][1]) + dv[2][1] * (v[1][1] * v[3][1]) +
                        dv[3][1] * (v[1][1] * v[2][1]);
            Vec14 dAin = dv[1][0] * (v[2][0] * v[3][0]) + dv[2][0] * (v[1][0] * v[3][0]) +
                         dv[3][0] * (v[1][0] * v[2][0]);
            Vec14 dB = dv[0][1] * (1.0 - v[0][0]) - dv[0][0] * v[0][1];
            Vec14 g = fac * (dU_dA1 * dA1 + dU_dB * dB);
            g += U * (-(1.0 - v[4][0]) * dAin - (1.0 - Ain) * dv[4][0]);
            grads->row(e) = g.transpose();
        }
    }
    return rho;
}

}  // namespace

const std::array<const char*, 14>& FeatureSet::names() {
    static const std::array<const char*, 14> n = {"x1", "y1", "z1", "t1", "p1", "z2", "y3",
                                                  "t3", "p3", "x4", "t4", "p4", "x5", "p5"};
    return n;
}

FeatureSet FeatureSet::reference() {
    // every parameter is live: the plate surface (z2) cuts the carved core,
    // the punch (x5 near 0.5) is a thin center drill that masks nothing
    FeatureSet fs;
    fs.theta << 0.25, 0.25, 0.25, 0.05, 1.5,  // S1 corner shell
        0.30,                                 // S2 plate
        0.32, 0.05, 1.5,                      // S3 face-diagonal tube
        0.32, 0.05, 1.5,                      // S4 body-diagonal core
        0.40, 1.5;                            // S5 punch
    return fs;
}

std::array<SuperEllipsoid, 5> FeatureSet::features() const {
    const Vec14& q = theta;
    std::array<SuperEllipsoid, 5> s;
    s[0] = {{0, 0, 0}, {q[0], q[1], q[2]}, q[3], q[4], true};
    s[1] = {{0.5, 0.5, 0.5}, {0.5, 0.5, q[5]}, t2, 1.0, true};
    s[2] = {{0.5, 0.5, 0.5}, {0.5, q[6], q[6]}, q[7], q[8], true};
    s[3] = {{0.5, 0.5, 0.5}, {q[9], q[9], q[9]}, q[10], q[11], true};
    s[4] = {{0.5, 0.5, 0.0}, {q[12], q[12], 0.0}, 0.0, q[13], false};
    return s;
}

void FeatureSet::validate() const {
    static const int loc[] = {0, 1, 2, 5, 6, 9, 12};
    static const int thk[] = {3, 7, 10};
    static const int pow_[] = {4, 8, 11, 13};
    for (int i : loc)
        if (theta[i] < 0 || theta[i] > 0.5)
            throw ConfigError(std::string(names()[i]) + " outside [0, 0.5]");
    for (int i : thk)
        if (theta[i] < 0 || theta[i] > 0.5)
            throw ConfigError(std::string(names()[i]) + " outside [0, 0.5]");
    for (int i : pow_)
        if (!(theta[i] > 0) || theta[i] > 4)
            throw ConfigError(std::string(names()[i]) + " outside (0, 4]");
    const auto feats = features();
    for (int i = 0; i < 5; i++)
        if ((feats[i].z - feats[i].c).norm() < 1e-6)
            throw ConfigError("feature S" + std::to_string(i + 1) +
                              " degenerate: control point at the center");
}

double feature_T(const Vec3& x, const SuperEllipsoid& s, double t) {
    return T_grad(x, s.c, s.z, s.p, nullptr, nullptr, nullptr) + t;
}

double feature_density(const Vec3& x, const SuperEllipsoid& s, int surface) {
    FeaturePre pre = precompute(s, false);
    return surf_density(x, s, pre, surface, kBeta2, 0, nullptr);
}

VectorXd compose(const FeatureSet& fs, const VoxelGrid& grid) {
    return compose_core(fs, grid, nullptr);
}

VectorXd compose_with_grads(const FeatureSet& fs, const VoxelGrid& grid, Eigen::MatrixXd& grads) {
    return compose_core(fs, grid, &grads);
}

VectorXd shape_physical(const FeatureSet& fs, const VoxelGrid& grid, const PdeFilter& filter,
                        double beta1) {
    return project_field(filter.apply(compose(fs, grid)), beta1, 0.5);
}

FeatureSet read_featureset(const std::filesystem::path& path) {
    KeyValueFile kv = KeyValueFile::load(path);
    FeatureSet fs;
    for (int i = 0; i < 14; i++) fs.theta[i] = kv.num(FeatureSet::names()[i]);
    kv.unconsumed();
    fs.validate();
    return fs;
}

void write_featureset(const std::filesystem::path& path, const FeatureSet& fs) {
    std::string text;
    for (int i = 0; i < 14; i++)
        text += std::string(FeatureSet::names()[i]) + " = " + fmt17(fs.theta[i]) + "\n";
    write_text_atomic(path, text);
}

void ShapeConfig::validate() const {
    if (n < 2) throw ConfigError("grid resolution must be >= 2");
    if (gamma1 < 0 || gamma1 > 1) throw ConfigError("gamma1 must be in [0, 1]");
    if (f_star <= 0 || f_star > 1) throw ConfigError("volume bound must be in (0, 1]");
    if (delta <= 0) throw ConfigError("isotropy tolerance must be positive");
    if (radius <= 0) throw ConfigError("filter radius must be positive");
    if (beta1 <= 0) throw ConfigError("projection sharpness must be positive");
    if (band_refresh <= 0 || zeta_refresh <= 0) throw ConfigError("schedule periods must be positive");
    if (max_iter < 0) throw ConfigError("max iterations must be >= 0");
    if (sigma0 <= 0) throw ConfigError("sigma0 must be positive");
    if (refresh_bands < 1 || sweep_m < 1 || path_samples < 1)
        throw ConfigError("band counts and path samples must be >= 1");
    if (p_min <= 0 || p_max > 4 || p_min > p_max) throw ConfigError("power bounds outside (0, 4]");
    if (t_max <= 0 || t_max > 0.5) throw ConfigError("thickness bound outside (0, 0.5]");
}

void ShapeConfig::bounds(Vec14& lo, Vec14& hi) const {
    static const int loc[] = {0, 1, 2, 5, 6, 9, 12};
    static const int thk[] = {3, 7, 10};
    static const int pow_[] = {4, 8, 11, 13};
    for (int i : loc) {
        lo[i] = 0.005;  // margin: a bound-active location cannot hit z = c
        hi[i] = 0.495;
    }
    for (int i : thk) {
        lo[i] = 0.0;
        hi[i] = t_max;
    }
    for (int i : pow_) {
        lo[i] = p_min;
        hi[i] = p_max;
    }
}

ShapeResult run_shape_optimization(const ShapeConfig& cfg, const FeatureSet& init) {
    cfg.validate();
    VoxelGrid grid(cfg.n);
    H11Element el(grid.h(), cfg.mat.nu);
    PdeFilter filter(grid, cfg.radius);

    const int N = grid.nelem();
    const int ntargets = int(ibz_targets(cfg.load).size());
    const bool buckling = cfg.gamma1 > 0;

    Vec14 lo, hi;
    cfg.bounds(lo, hi);
    Vec14 theta = init.theta.cwiseMax(lo).cwiseMin(hi);

    Mma mma(14, 2, cfg.move);
    double zeta = 100.0;
    std::vector<int> counts(ntargets, 1);
    std::vector<Eigen::MatrixXcd> warm(ntargets);

    ShapeResult res;
    res.fs = init;
    Eigen::MatrixXd grads;
    for (int it = 1; it <= cfg.max_iter; it++) {
        res.fs.theta = theta;
        VectorXd raw = compose_with_grads(res.fs, grid, grads);
        VectorXd tilde = filter.apply(raw);
        VectorXd phys = project_field(tilde, cfg.beta1, 0.5);

        IterRecord rec;
        rec.iter = it;
        rec.f_er = rec.f_int = rec.f_dil = volume_fraction(phys);

        HomState hs = homogenize(grid, el, phys, cfg.mat, cfg.solve);
        rec.Ebar = hs.props.Ebar;
        rec.kappa = hs.props.kappabar;
        rec.zener = hs.props.zener;

        bool refresh = (it - 1) % cfg.band_refresh == 0;
        VectorXd dJ_phys;
        if (buckling) {
            Prestress ps = compute_prestress(grid, el, phys, cfg.mat, hs, cfg.load, cfg.sigma0);
            EigOpts eo = cfg.eig;
            TargetEval ev;
            if (refresh) {
                eo.m = cfg.refresh_bands;
                ev = evaluate_targets(grid, el, phys, cfg.mat, ps, cfg.load, eo, cfg.sigma0,
                                      &warm);
                counts.assign(ntargets, 1);
                double tmax = -1e300;
                for (const auto& br : ev.bands)
                    for (double t : br.tau) tmax = std::max(tmax, t);
                double thr = tmax - cfg.band_window * std::abs(tmax);
                for (int l = 0; l < ntargets; l++) {
                    int c = 0;
                    for (double t : ev.bands[l].tau)
                        if (t >= thr) c++;
                    counts[l] = std::clamp(c, 1, cfg.refresh_bands);
                }
            } else {
                ev = evaluate_targets(grid, el, phys, cfg.mat, ps, cfg.load, eo, cfg.sigma0,
                                      &warm, &counts);
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
            TauSensitivity ts = dtau_drho(grid, el, phys, cfg.mat, hs, ps, modes);
            dJ_phys = cfg.gamma1 * ts.dtau;
        } else {
            rec.taumax_k.assign(ntargets, std::nan(""));
            dJ_phys = VectorXd::Zero(N);
        }
        rec.counts_k = counts;
        rec.J = cfg.gamma1 * rec.ks + (1.0 - cfg.gamma1) / rec.Ebar;
        if (cfg.gamma1 < 1.0) {
            VectorXd dE = dEbar_drho(grid, el, phys, cfg.mat, hs);
            dJ_phys += (cfg.gamma1 - 1.0) / (rec.Ebar * rec.Ebar) * dE;
        }

        double g_vol = rec.f_int / cfg.f_star - 1.0;
        double ar1 = rec.zener - 1.0;
        double g_iso = (ar1 * ar1 - cfg.delta * cfg.delta) / (cfg.delta * cfg.delta);
        VectorXd dgv_phys = VectorXd::Constant(N, 1.0 / (N * cfg.f_star));
        VectorXd dgi_phys =
            (2.0 * ar1 / (cfg.delta * cfg.delta)) * dzener_drho(grid, el, phys, cfg.mat, hs);

        // raw-field gradients, then the 14-parameter chain through the Jacobian
        VectorXd gJ = chain_to_raw(filter, tilde, cfg.beta1, 0.5, dJ_phys);
        VectorXd ggv = chain_to_raw(filter, tilde, cfg.beta1, 0.5, dgv_phys);
        VectorXd ggi = chain_to_raw(filter, tilde, cfg.beta1, 0.5, dgi_phys);
        VectorXd dJ = grads.transpose() * gJ;
        VectorXd g(2);
        g << g_vol, g_iso;
        Eigen::MatrixXd dg(2, 14);
        dg.row(0) = (grads.transpose() * ggv).transpose();
        dg.row(1) = (grads.transpose() * ggi).transpose();

        VectorXd tn = mma.update(theta, dJ, g, dg, lo, hi);
        rec.change = (tn - theta).cwiseAbs().maxCoeff();
        theta = tn;

        rec.beta1 = cfg.beta1;
        rec.zeta = zeta;
        rec.fstar_dil = cfg.f_star;
        res.history.push_back(rec);
        res.iterations = it;
        if (rec.change < cfg.change_tol) break;
    }

    res.fs.theta = theta;
    res.physical = shape_physical(res.fs, grid, filter, cfg.beta1);
    HomState hs = homogenize(grid, el, res.physical, cfg.mat, cfg.solve);
    res.props = hs.props;
    Prestress ps = compute_prestress(grid, el, res.physical, cfg.mat, hs, cfg.load, cfg.sigma0);
    EigOpts eo = cfg.eig;
    eo.m = cfg.sweep_m;
    res.final_sweep = sweep_bands(grid, el, res.physical, cfg.mat, ps, default_path(cfg.load),
                                  cfg.path_samples, eo, cfg.sigma0);
    res.sigma_cri = res.final_sweep.sigma_cri;
    res.crit_k = res.final_sweep.crit_k;

    if (!res.history.empty() && !cfg.outdir.empty()) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : res.history)
            rows.push_back(log_row(r, "intermediate", "intermediate"));
        write_csv(cfg.outdir / "log.csv", log_header(ntargets), rows);
    }
    return res;
}

FeatureSet fit_features(const VoxelGrid& grid, const VectorXd& target, const FeatureSet& init,
                        int iters, double* final_resid) {
    if (target.size() != grid.nelem()) throw ConfigError("target field size does not match grid");
    ShapeConfig defaults;
    Vec14 lo, hi;
    defaults.bounds(lo, hi);
    FeatureSet fs = init;
    Vec14 theta = fs.theta.cwiseMax(lo).cwiseMin(hi);

    Eigen::MatrixXd grads;
    auto value = [&](const Vec14& q, Eigen::MatrixXd* J) {
        fs.theta = q;
        VectorXd r = (J ? compose_with_grads(fs, grid, *J) : compose(fs, grid)) - target;
        return 0.5 * r.squaredNorm();
    };

    double alpha = 1.0;
    for (int it = 0; it < iters; it++) {
        fs.theta = theta;
        VectorXd resid = compose_with_grads(fs, grid, grads) - target;
        double F = 0.5 * resid.squaredNorm();
        Vec14 g = grads.transpose() * resid;
        double gn = g.norm();
        if (gn < 1e-12) break;
        bool moved = false;
        for (int bt = 0; bt < 30; bt++) {
            Vec14 trial = (theta - alpha * g).cwiseMax(lo).cwiseMin(hi);
            double Ft = value(trial, nullptr);
            if (Ft < F - 1e-4 * (theta - trial).squaredNorm() / std::max(alpha, 1e-300)) {
                theta = trial;
                alpha *= 1.5;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!moved) break;
    }
    fs.theta = theta;
    if (final_resid) *final_resid = std::sqrt(2.0 * value(theta, nullptr) / grid.nelem());
    return fs;
}

}  // namespace buckopt
