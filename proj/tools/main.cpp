#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "buckopt/io.hpp"
#include "buckopt/shapeopt.hpp"
#include "buckopt/topopt.hpp"

using namespace buckopt;

namespace {

struct Phases {
    std::vector<std::pair<std::string, double>> t;
    std::chrono::steady_clock::time_point mark = std::chrono::steady_clock::now();

    void lap(const std::string& name) {
        auto now = std::chrono::steady_clock::now();
        t.push_back({name, std::chrono::duration<double>(now - mark).count()});
        mark = now;
    }
};

using Entries = std::vector<std::pair<std::string, std::string>>;

LoadCase parse_load(const std::string& s) {
    if (s == "uniaxial") return LoadCase::Uniaxial;
    if (s == "hydrostatic") return LoadCase::Hydrostatic;
    throw ConfigError("unknown load case '" + s + "' (uniaxial | hydrostatic)");
}

const char* load_name(LoadCase lc) {
    return lc == LoadCase::Uniaxial ? "uniaxial" : "hydrostatic";
}

std::string dump(const Entries& e) {
    std::string s;
    for (const auto& [k, v] : e) s += k + " = " + v + "\n";
    return s;
}

// resolved config + hash + versions + timings; config_resolved.txt is the
// deterministic replay artifact, the manifest adds the volatile timings
void finish_run(const std::filesystem::path& outdir, const std::string& command,
                const Entries& resolved, Phases& ph) {
    std::string cfg_text = dump(resolved);
    write_text_atomic(outdir / "config_resolved.txt", cfg_text);
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", (unsigned long long)fnv1a(cfg_text));
    Entries m = {{"command", command},
                 {"version", kVersion},
                 {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                               std::to_string(EIGEN_MAJOR_VERSION) + "." +
                               std::to_string(EIGEN_MINOR_VERSION)},
                 {"config_fnv1a", hash}};
    for (const auto& [k, v] : ph.t) m.push_back({"seconds_" + k, fmt6(v)});
    write_manifest(outdir / "manifest.txt", m);
}

void require_consumed(const KeyValueFile& kv, const std::string& what) {
    auto rest = kv.unconsumed();
    if (rest.empty()) return;
    std::string msg = "unknown " + what + " keys:";
    for (const auto& k : rest) msg += " " + k;
    throw ConfigError(msg);
}

struct MaterialCli {
    double E1 = 1.0, E0 = 1e-4, nu = 1.0 / 3.0, penal = 3.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--E1", E1, "solid Young's modulus");
        cmd->add_option("--E0", E0, "void-floor Young's modulus");
        cmd->add_option("--nu", nu, "Poisson ratio");
        cmd->add_option("--penal", penal, "SIMP exponent");
    }
    BaseMaterial mat() const {
        BaseMaterial m;
        m.E1 = E1;
        m.E0 = E0;
        m.nu = nu;
        m.p = penal;
        if (m.E1 <= 0 || m.E0 <= 0 || m.E0 > m.E1) throw ConfigError("need 0 < E0 <= E1");
        if (m.nu <= -1 || m.nu >= 0.5) throw ConfigError("Poisson ratio outside (-1, 0.5)");
        return m;
    }
    void record(Entries& e) const {
        e.push_back({"E1", fmt17(E1)});
        e.push_back({"E0", fmt17(E0)});
        e.push_back({"nu", fmt17(nu)});
        e.push_back({"penal", fmt17(penal)});
    }
};

// memory guard rail: stencil operators and the IC factor grow with n^3
void check_budget(int n) {
    if (n < 2 || n > 96)
        throw ConfigError("grid resolution " + std::to_string(n) + " outside [2, 96]");
}

VectorXd load_field(const std::string& path, int& n) {
    VectorXd rho = read_density(path, n);
    check_budget(n);
    return rho;
}

std::string prop_report(const EffectiveProps& p, double gray, const SolveStats& worst) {
    std::string s;
    s += "volume_fraction = " + fmt6(p.volfrac) + "\n";
    s += "grayness = " + fmt6(gray) + "\n";
    s += "Ebar = " + fmt6(p.Ebar) + "\n";
    s += "kappabar = " + fmt6(p.kappabar) + "\n";
    s += "zener = " + fmt6(p.zener) + "\n";
    for (int i = 0; i < 6; i++) {
        s += i == 0 ? "Cbar = " : "       ";
        for (int j = 0; j < 6; j++) s += fmt6(p.C(i, j)) + (j == 5 ? "\n" : " ");
    }
    for (int i = 0; i < 6; i++) {
        s += i == 0 ? "Sbar = " : "       ";
        for (int j = 0; j < 6; j++) s += fmt6(p.S(i, j)) + (j == 5 ? "\n" : " ");
    }
    s += "worst_cg_relres = " + fmt6(worst.relres) + "\n";
    s += "worst_cg_iters = " + std::to_string(worst.iters) + "\n";
    return s;
}

void write_band_csv(const std::filesystem::path& path, const BandSweep& sw) {
    const int m = int(sw.lambda.cols());
    std::vector<std::string> header = {"path_arclength", "k1", "k2", "k3"};
    for (int b = 1; b <= m; b++) header.push_back("lambda_" + std::to_string(b));
    std::vector<std::vector<std::string>> rows;
    for (size_t i = 0; i < sw.arc.size(); i++) {
        std::vector<std::string> row = {fmt17(sw.arc[i]), fmt17(sw.ks[i][0]),
                                        fmt17(sw.ks[i][1]), fmt17(sw.ks[i][2])};
        for (int b = 0; b < m; b++) row.push_back(fmt17(sw.lambda(int(i), b)));
        rows.push_back(row);
    }
    write_csv(path, header, rows);
}

std::string sweep_report(const BandSweep& sw, double sigma0) {
    std::string s;
    s += "sigma_cri = " + fmt6(sw.sigma_cri) + "\n";
    s += "sigma0 = " + fmt6(sigma0) + "\n";
    s += "critical_k = " + fmt6(sw.crit_k[0]) + " " + fmt6(sw.crit_k[1]) + " " +
         fmt6(sw.crit_k[2]) + "\n";
    s += "no_positive = " + std::string(sw.no_positive ? "1" : "0") + "\n";
    s += "band_jumps =";
    for (int j : sw.jump_flags) s += " " + std::to_string(j);
    s += "\n";
    return s;
}

// ---- optimize / shape-optimize config files ----

void solver_keys(const KeyValueFile& kv, SolveOpts& solve, EigOpts& eig) {
    solve.tol = kv.num("cg_tol", solve.tol);
    solve.maxit = kv.integer("cg_maxit", solve.maxit);
    eig.extra = kv.integer("eig_extra", eig.extra);
    eig.tol = kv.num("eig_tol", eig.tol);
    eig.maxit = kv.integer("eig_maxit", eig.maxit);
    eig.inner_tol = kv.num("inner_tol", eig.inner_tol);
    eig.inner_maxit = kv.integer("inner_maxit", eig.inner_maxit);
    eig.seed = uint64_t(kv.integer("seed", int(eig.seed)));
}

void solver_record(Entries& e, const SolveOpts& solve, const EigOpts& eig) {
    e.push_back({"cg_tol", fmt17(solve.tol)});
    e.push_back({"cg_maxit", std::to_string(solve.maxit)});
    e.push_back({"eig_extra", std::to_string(eig.extra)});
    e.push_back({"eig_tol", fmt17(eig.tol)});
    e.push_back({"eig_maxit", std::to_string(eig.maxit)});
    e.push_back({"inner_tol", fmt17(eig.inner_tol)});
    e.push_back({"inner_maxit", std::to_string(eig.inner_maxit)});
    e.push_back({"seed", std::to_string(eig.seed)});
}

void material_keys(const KeyValueFile& kv, BaseMaterial& m) {
    m.E1 = kv.num("E1", m.E1);
    m.E0 = kv.num("E0", m.E0);
    m.nu = kv.num("nu", m.nu);
    m.p = kv.num("penal", m.p);
}

OptConfig opt_config(const KeyValueFile& kv) {
    OptConfig c;
    c.n = kv.integer("n", c.n);
    c.load = parse_load(kv.str("load", "uniaxial"));
    c.gamma1 = kv.num("gamma1", c.gamma1);
    c.f_star = kv.num("f_star", c.f_star);
    c.delta = kv.num("delta", c.delta);
    c.radius = kv.num("radius", c.radius);
    c.deta = kv.num("deta", c.deta);
    c.beta1_init = kv.num("beta1_init", c.beta1_init);
    c.beta1_max = kv.num("beta1_max", c.beta1_max);
    c.beta1_period = kv.integer("beta1_period", c.beta1_period);
    c.band_refresh = kv.integer("band_refresh", c.band_refresh);
    c.zeta_refresh = kv.integer("zeta_refresh", c.zeta_refresh);
    c.band_window = kv.num("band_window", c.band_window);
    c.max_iter = kv.integer("max_iter", c.max_iter);
    c.move = kv.num("move", c.move);
    c.change_tol = kv.num("change_tol", c.change_tol);
    c.symmetrize = kv.flag("symmetrize", c.symmetrize);
    c.sigma0 = kv.num("sigma0", c.sigma0);
    c.refresh_bands = kv.integer("refresh_bands", c.refresh_bands);
    c.sweep_m = kv.integer("sweep_m", c.sweep_m);
    c.path_samples = kv.integer("path_samples", c.path_samples);
    c.checkpoint_period = kv.integer("checkpoint_period", c.checkpoint_period);
    material_keys(kv, c.mat);
    solver_keys(kv, c.solve, c.eig);
    return c;
}

Entries opt_record(const OptConfig& c) {
    Entries e = {{"n", std::to_string(c.n)},
                 {"load", load_name(c.load)},
                 {"gamma1", fmt17(c.gamma1)},
                 {"f_star", fmt17(c.f_star)},
                 {"delta", fmt17(c.delta)},
                 {"radius", fmt17(c.radius)},
                 {"deta", fmt17(c.deta)},
                 {"beta1_init", fmt17(c.beta1_init)},
                 {"beta1_max", fmt17(c.beta1_max)},
                 {"beta1_period", std::to_string(c.beta1_period)},
                 {"band_refresh", std::to_string(c.band_refresh)},
                 {"zeta_refresh", std::to_string(c.zeta_refresh)},
                 {"band_window", fmt17(c.band_window)},
                 {"max_iter", std::to_string(c.max_iter)},
                 {"move", fmt17(c.move)},
                 {"change_tol", fmt17(c.change_tol)},
                 {"symmetrize", c.symmetrize ? "1" : "0"},
                 {"sigma0", fmt17(c.sigma0)},
                 {"refresh_bands", std::to_string(c.refresh_bands)},
                 {"sweep_m", std::to_string(c.sweep_m)},
                 {"path_samples", std::to_string(c.path_samples)},
                 {"checkpoint_period", std::to_string(c.checkpoint_period)},
                 {"E1", fmt17(c.mat.E1)},
                 {"E0", fmt17(c.mat.E0)},
                 {"nu", fmt17(c.mat.nu)},
                 {"penal", fmt17(c.mat.p)}};
    solver_record(e, c.solve, c.eig);
    return e;
}

ShapeConfig shape_config(const KeyValueFile& kv) {
    ShapeConfig c;
    c.n = kv.integer("n", c.n);
    c.load = parse_load(kv.str("load", "uniaxial"));
    c.gamma1 = kv.num("gamma1", c.gamma1);
    c.f_star = kv.num("f_star", c.f_star);
    c.delta = kv.num("delta", c.delta);
    c.radius = kv.num("radius", c.radius);
    c.beta1 = kv.num("beta1", c.beta1);
    c.band_refresh = kv.integer("band_refresh", c.band_refresh);
    c.zeta_refresh = kv.integer("zeta_refresh", c.zeta_refresh);
    c.band_window = kv.num("band_window", c.band_window);
    c.max_iter = kv.integer("max_iter", c.max_iter);
    c.move = kv.num("move", c.move);
    c.change_tol = kv.num("change_tol", c.change_tol);
    c.sigma0 = kv.num("sigma0", c.sigma0);
    c.refresh_bands = kv.integer("refresh_bands", c.refresh_bands);
    c.sweep_m = kv.integer("sweep_m", c.sweep_m);
    c.path_samples = kv.integer("path_samples", c.path_samples);
    c.p_min = kv.num("p_min", c.p_min);
    c.p_max = kv.num("p_max", c.p_max);
    c.t_max = kv.num("t_max", c.t_max);
    material_keys(kv, c.mat);
    solver_keys(kv, c.solve, c.eig);
    return c;
}

Entries shape_record(const ShapeConfig& c) {
    Entries e = {{"n", std::to_string(c.n)},
                 {"load", load_name(c.load)},
                 {"gamma1", fmt17(c.gamma1)},
                 {"f_star", fmt17(c.f_star)},
                 {"delta", fmt17(c.delta)},
                 {"radius", fmt17(c.radius)},
                 {"beta1", fmt17(c.beta1)},
                 {"band_refresh", std::to_string(c.band_refresh)},
                 {"zeta_refresh", std::to_string(c.zeta_refresh)},
                 {"band_window", fmt17(c.band_window)},
                 {"max_iter", std::to_string(c.max_iter)},
                 {"move", fmt17(c.move)},
                 {"change_tol", fmt17(c.change_tol)},
                 {"sigma0", fmt17(c.sigma0)},
                 {"refresh_bands", std::to_string(c.refresh_bands)},
                 {"sweep_m", std::to_string(c.sweep_m)},
                 {"path_samples", std::to_string(c.path_samples)},
                 {"p_min", fmt17(c.p_min)},
                 {"p_max", fmt17(c.p_max)},
                 {"t_max", fmt17(c.t_max)},
                 {"E1", fmt17(c.mat.E1)},
                 {"E0", fmt17(c.mat.E0)},
                 {"nu", fmt17(c.mat.nu)},
                 {"penal", fmt17(c.mat.p)}};
    solver_record(e, c.solve, c.eig);
    return e;
}

void record_featureset(Entries& e, const FeatureSet& fs) {
    for (int i = 0; i < 14; i++)
        e.push_back({std::string("theta_") + FeatureSet::names()[i], fmt17(fs.theta[i])});
}

int run(int argc, char** argv) {
    CLI::App app{"buckopt: homogenization, Bloch buckling bands, and buckling-aware "
                 "microstructure optimization on periodic voxel cells"};
    app.require_subcommand(1);

    // ---- homogenize ----
    auto* c_hom = app.add_subcommand("homogenize", "effective elasticity of a unit cell");
    std::string hom_density, hom_feat, hom_out = "out_homogenize";
    int hom_n = 64;
    MaterialCli hom_mat;
    double hom_cg_tol = 1e-8;
    c_hom->add_option("--density", hom_density, "density field (.bin with .hdr sidecar)");
    c_hom->add_option("--featureset", hom_feat, "14-parameter feature file instead of a field");
    c_hom->add_option("--n", hom_n, "grid resolution for --featureset input");
    c_hom->add_option("--out", hom_out, "output directory");
    c_hom->add_option("--cg-tol", hom_cg_tol, "CG relative tolerance");
    hom_mat.attach(c_hom);

    // ---- bands ----
    auto* c_bands = app.add_subcommand("bands", "Bloch buckling band diagram along the IBZ path");
    std::string bands_density, bands_load = "uniaxial", bands_out = "out_bands";
    int bands_m = 3, bands_samples = 5;
    double bands_sigma0 = 1.0;
    MaterialCli bands_mat;
    EigOpts bands_eig;
    c_bands->add_option("--density", bands_density, "density field")->required();
    c_bands->add_option("--load", bands_load, "uniaxial | hydrostatic");
    c_bands->add_option("--bands", bands_m, "bands per wave vector");
    c_bands->add_option("--samples", bands_samples, "samples per path segment");
    c_bands->add_option("--sigma0", bands_sigma0, "macro stress magnitude");
    c_bands->add_option("--eig-tol", bands_eig.tol, "eigenpair residual tolerance");
    c_bands->add_option("--out", bands_out, "output directory");
    bands_mat.attach(c_bands);

    // ---- generate ----
    auto* c_gen = app.add_subcommand("generate", "write a density field (features or sphere)");
    std::string gen_feat, gen_out = "out_generate";
    std::vector<double> gen_sphere;
    bool gen_reference = false, gen_raw = false;
    int gen_n = 64;
    c_gen->add_option("--featureset", gen_feat, "14-parameter feature file");
    c_gen->add_flag("--reference", gen_reference, "built-in reference feature set");
    c_gen->add_option("--sphere", gen_sphere, "hollow-sphere radii: r_in r_out")->expected(2);
    c_gen->add_option("--n", gen_n, "grid resolution");
    c_gen->add_flag("--raw", gen_raw, "skip filter + projection (features only)");
    c_gen->add_option("--out", gen_out, "output directory");

    // ---- optimize ----
    auto* c_opt = app.add_subcommand("optimize", "robust density-based buckling optimization");
    std::string opt_cfg_path, opt_seed_density, opt_out = "out_optimize";
    std::vector<double> opt_sphere = {0.474, 0.541};
    c_opt->add_option("--config", opt_cfg_path, "key = value config file");
    c_opt->add_option("--seed-density", opt_seed_density, "seed field (default hollow sphere)");
    c_opt->add_option("--sphere", opt_sphere, "seed hollow-sphere radii")->expected(2);
    c_opt->add_option("--out", opt_out, "output directory");

    // ---- shape-optimize ----
    auto* c_shape = app.add_subcommand("shape-optimize", "14-parameter feature optimization");
    std::string shape_cfg_path, shape_init, shape_out = "out_shape";
    c_shape->add_option("--config", shape_cfg_path, "key = value config file");
    c_shape->add_option("--init", shape_init, "initial feature file (default reference)");
    c_shape->add_option("--out", shape_out, "output directory");

    // ---- fit-features ----
    auto* c_fit = app.add_subcommand("fit-features", "least-squares feature fit to a field");
    std::string fit_density, fit_init, fit_out = "out_fit";
    int fit_iters = 200;
    c_fit->add_option("--density", fit_density, "target density field")->required();
    c_fit->add_option("--init", fit_init, "initial feature file (default reference)");
    c_fit->add_option("--iters", fit_iters, "gradient iterations");
    c_fit->add_option("--out", fit_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems are config errors
    }
    Phases ph;

    if (*c_hom) {
        if (hom_density.empty() == hom_feat.empty())
            throw ConfigError("need exactly one of --density or --featureset");
        Entries resolved;
        VectorXd rho;
        int n = hom_n;
        if (!hom_density.empty()) {
            rho = load_field(hom_density, n);
            resolved.push_back({"density", hom_density});
        } else {
            check_budget(n);
            FeatureSet fs = read_featureset(hom_feat);
            VoxelGrid grid(n);
            PdeFilter filter(grid, 0.025);
            rho = shape_physical(fs, grid, filter, 50.0);
            record_featureset(resolved, fs);
        }
        resolved.push_back({"n", std::to_string(n)});
        hom_mat.record(resolved);
        resolved.push_back({"cg_tol", fmt17(hom_cg_tol)});
        ph.lap("setup");

        VoxelGrid grid(n);
        H11Element el(grid.h(), hom_mat.mat().nu);
        HomState hs = homogenize(grid, el, rho, hom_mat.mat(), SolveOpts{hom_cg_tol, 10000});
        ph.lap("homogenize");

        std::string rep = prop_report(hs.props, grayness(rho), hs.worst_solve);
        write_text_atomic(std::filesystem::path(hom_out) / "report.txt", rep);
        finish_run(hom_out, "homogenize", resolved, ph);
        std::fputs(rep.c_str(), stdout);
        return 0;
    }

    if (*c_bands) {
        LoadCase lc = parse_load(bands_load);
        int n = 0;
        VectorXd rho = load_field(bands_density, n);
        Entries resolved = {{"density", bands_density},
                            {"n", std::to_string(n)},
                            {"load", load_name(lc)},
                            {"bands", std::to_string(bands_m)},
                            {"samples", std::to_string(bands_samples)},
                            {"sigma0", fmt17(bands_sigma0)},
                            {"eig_tol", fmt17(bands_eig.tol)}};
        bands_mat.record(resolved);
        if (bands_m < 1 || bands_samples < 1) throw ConfigError("bands and samples must be >= 1");
        if (bands_sigma0 <= 0) throw ConfigError("sigma0 must be positive");
        ph.lap("setup");

        VoxelGrid grid(n);
        BaseMaterial mat = bands_mat.mat();
        H11Element el(grid.h(), mat.nu);
        HomState hs = homogenize(grid, el, rho, mat, SolveOpts{});
        ph.lap("homogenize");
        Prestress ps = compute_prestress(grid, el, rho, mat, hs, lc, bands_sigma0);
        EigOpts eo = bands_eig;
        eo.m = bands_m;
        BandSweep sw =
            sweep_bands(grid, el, rho, mat, ps, default_path(lc), bands_samples, eo, bands_sigma0);
        ph.lap("sweep");

        std::filesystem::path out(bands_out);
        write_band_csv(out / "bands.csv", sw);
        if (sw.crit_mode.size() > 0) write_vtk(out / "critical_mode.vtk", grid, rho, &sw.crit_mode, &sw.crit_k);
        std::string rep = sweep_report(sw, bands_sigma0);
        rep += prop_report(hs.props, grayness(rho), hs.worst_solve);
        write_text_atomic(out / "report.txt", rep);
        finish_run(bands_out, "bands", resolved, ph);
        std::printf("sigma_cri = %s at k = (%s, %s, %s)\n", fmt6(sw.sigma_cri).c_str(),
                    fmt6(sw.crit_k[0]).c_str(), fmt6(sw.crit_k[1]).c_str(),
                    fmt6(sw.crit_k[2]).c_str());
        return 0;
    }

    if (*c_gen) {
        check_budget(gen_n);
        VoxelGrid grid(gen_n);
        Entries resolved = {{"n", std::to_string(gen_n)}};
        VectorXd rho;
        if (!gen_sphere.empty()) {
            if (!gen_feat.empty() || gen_reference)
                throw ConfigError("--sphere excludes feature input");
            if (!(gen_sphere[0] > 0 && gen_sphere[0] < gen_sphere[1]))
                throw ConfigError("need 0 < r_in < r_out");
            rho = voxel_hollow_sphere(grid, gen_sphere[0], gen_sphere[1]);
            resolved.push_back({"r_in", fmt17(gen_sphere[0])});
            resolved.push_back({"r_out", fmt17(gen_sphere[1])});
        } else {
            if (gen_feat.empty() && !gen_reference)
                throw ConfigError("need --featureset, --reference or --sphere");
            FeatureSet fs = gen_reference ? FeatureSet::reference() : read_featureset(gen_feat);
            record_featureset(resolved, fs);
            resolved.push_back({"raw", gen_raw ? "1" : "0"});
            if (gen_raw) {
                rho = compose(fs, grid);
            } else {
                PdeFilter filter(grid, 0.025);
                rho = shape_physical(fs, grid, filter, 50.0);
            }
        }
        ph.lap("compose");
        std::filesystem::path out(gen_out);
        write_density(out / "density.bin", grid, rho);
        write_vtk(out / "density.vtk", grid, rho);
        bool sym = is_cubic_symmetric(grid, rho, 1e-9);
        write_text_atomic(out / "report.txt", "volume_fraction = " + fmt6(volume_fraction(rho)) +
                                                  "\ncubic_symmetric = " + (sym ? "1" : "0") +
                                                  "\n");
        finish_run(gen_out, "generate", resolved, ph);
        std::printf("f = %s, cubic_symmetric = %d\n", fmt6(volume_fraction(rho)).c_str(), sym);
        return 0;
    }

    if (*c_opt) {
        KeyValueFile kv = opt_cfg_path.empty() ? KeyValueFile::parse("", "<defaults>")
                                               : KeyValueFile::load(opt_cfg_path);
        OptConfig cfg = opt_config(kv);
        require_consumed(kv, "config");
        check_budget(cfg.n);
        cfg.outdir = opt_out;
        VoxelGrid grid(cfg.n);
        VectorXd seed;
        Entries resolved = opt_record(cfg);
        if (!opt_seed_density.empty()) {
            int ns = 0;
            seed = load_field(opt_seed_density, ns);
            if (ns != cfg.n) throw ConfigError("seed resolution does not match config n");
            resolved.push_back({"seed_density", opt_seed_density});
        } else {
            seed = voxel_hollow_sphere(grid, opt_sphere[0], opt_sphere[1]);
            resolved.push_back({"seed_r_in", fmt17(opt_sphere[0])});
            resolved.push_back({"seed_r_out", fmt17(opt_sphere[1])});
        }
        ph.lap("setup");

        OptResult res = run_robust_optimization(cfg, seed);
        ph.lap("optimize");

        std::filesystem::path out(opt_out);
        write_density(out / "design_raw.bin", grid, res.raw);
        write_density(out / "design.bin", grid, res.intermediate);
        write_density(out / "design_eroded.bin", grid, res.eroded);
        write_density(out / "design_dilated.bin", grid, res.dilated);
        write_vtk(out / "design.vtk", grid, res.intermediate);
        write_band_csv(out / "bands.csv", res.final_sweep);
        if (res.final_sweep.crit_mode.size() > 0)
            write_vtk(out / "critical_mode.vtk", grid, res.intermediate,
                      &res.final_sweep.crit_mode, &res.final_sweep.crit_k);

        std::string rep;
        rep += "iterations = " + std::to_string(res.iterations) + "\n";
        rep += "volume_ordering_ok = " + std::string(res.volume_ordering_ok ? "1" : "0") + "\n";
        rep += sweep_report(res.final_sweep, cfg.sigma0);
        rep += "grayness_intermediate = " + fmt6(res.grayness_int) + "\n";
        rep += "Ebar = " + fmt6(res.props_int.Ebar) + "\n";
        rep += "kappabar = " + fmt6(res.props_int.kappabar) + "\n";
        rep += "zener = " + fmt6(res.props_int.zener) + "\n";
        rep += "volume_fraction = " + fmt6(res.props_int.volfrac) + "\n";
        write_text_atomic(out / "report.txt", rep);
        finish_run(opt_out, "optimize", resolved, ph);
        std::printf("sigma_cri = %s, Ebar = %s, f = %s after %d iterations\n",
                    fmt6(res.sigma_cri).c_str(), fmt6(res.props_int.Ebar).c_str(),
                    fmt6(res.props_int.volfrac).c_str(), res.iterations);
        return 0;
    }

    if (*c_shape) {
        KeyValueFile kv = shape_cfg_path.empty() ? KeyValueFile::parse("", "<defaults>")
                                                 : KeyValueFile::load(shape_cfg_path);
        ShapeConfig cfg = shape_config(kv);
        require_consumed(kv, "config");
        check_budget(cfg.n);
        cfg.outdir = shape_out;
        FeatureSet init = shape_init.empty() ? FeatureSet::reference()
                                             : read_featureset(shape_init);
        Entries resolved = shape_record(cfg);
        record_featureset(resolved, init);
        ph.lap("setup");

        ShapeResult res = run_shape_optimization(cfg, init);
        ph.lap("optimize");

        VoxelGrid grid(cfg.n);
        std::filesystem::path out(shape_out);
        write_featureset(out / "featureset.txt", res.fs);
        write_density(out / "design.bin", grid, res.physical);
        write_vtk(out / "design.vtk", grid, res.physical);
        write_band_csv(out / "bands.csv", res.final_sweep);
        if (res.final_sweep.crit_mode.size() > 0)
            write_vtk(out / "critical_mode.vtk", grid, res.physical, &res.final_sweep.crit_mode,
                      &res.final_sweep.crit_k);
        std::string rep;
        rep += "iterations = " + std::to_string(res.iterations) + "\n";
        rep += sweep_report(res.final_sweep, cfg.sigma0);
        rep += "Ebar = " + fmt6(res.props.Ebar) + "\n";
        rep += "kappabar = " + fmt6(res.props.kappabar) + "\n";
        rep += "zener = " + fmt6(res.props.zener) + "\n";
        rep += "volume_fraction = " + fmt6(res.props.volfrac) + "\n";
        write_text_atomic(out / "report.txt", rep);
        finish_run(shape_out, "shape-optimize", resolved, ph);
        std::printf("sigma_cri = %s, Ebar = %s, f = %s after %d iterations\n",
                    fmt6(res.sigma_cri).c_str(), fmt6(res.props.Ebar).c_str(),
                    fmt6(res.props.volfrac).c_str(), res.iterations);
        return 0;
    }

    if (*c_fit) {
        int n = 0;
        VectorXd target = load_field(fit_density, n);
        VoxelGrid grid(n);
        FeatureSet init = fit_init.empty() ? FeatureSet::reference() : read_featureset(fit_init);
        Entries resolved = {{"density", fit_density},
                            {"n", std::to_string(n)},
                            {"iters", std::to_string(fit_iters)}};
        record_featureset(resolved, init);
        ph.lap("setup");
        double resid = 0;
        FeatureSet fs = fit_features(grid, target, init, fit_iters, &resid);
        ph.lap("fit");
        std::filesystem::path out(fit_out);
        write_featureset(out / "featureset.txt", fs);
        write_text_atomic(out / "report.txt", "rms_residual = " + fmt6(resid) + "\n");
        finish_run(fit_out, "fit-features", resolved, ph);
        std::printf("rms_residual = %s\n", fmt6(resid).c_str());
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
