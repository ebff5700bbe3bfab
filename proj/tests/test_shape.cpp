#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "buckopt/io.hpp"
#include "buckopt/shapeopt.hpp"

using namespace buckopt;
namespace fs = std::filesystem;

namespace {

// exact super-ellipsoid measure, no power smoothing
double exact_T(const Vec3& x, const SuperEllipsoid& s) {
    Vec3 n = (s.z - s.c).normalized();
    double S = 0;
    for (int m = 0; m < 3; m++) S += std::pow(std::abs(n[m] * (x[m] - s.c[m])), s.p);
    return std::pow(S, 1.0 / s.p);
}

Vec3 wedge_point(const Vec3& x) {
    Vec3 u;
    for (int j = 0; j < 3; j++) u[j] = std::min(x[j], 1.0 - x[j]);
    std::sort(u.data(), u.data() + 3, std::greater<double>());
    return u;
}

// hard-indicator composition mirroring the documented pattern:
// material = (S2o S3o S4o  union  S1 shell) minus S2i S3i S4i interior minus S5
bool exact_member(const FeatureSet& fs, const Vec3& w, double margin, bool& near_surface) {
    const auto feats = fs.features();
    double T[5], Tz[5];
    for (int i = 0; i < 5; i++) {
        T[i] = exact_T(w, feats[i]);
        Tz[i] = exact_T(feats[i].z, feats[i]);
    }
    near_surface = false;
    for (int i = 0; i < 5; i++) {
        if (std::abs(T[i] - Tz[i]) < margin) near_surface = true;
        if (feats[i].hollow && std::abs(T[i] - (Tz[i] + feats[i].t)) < margin)
            near_surface = true;
    }
    bool in[5], out[5];
    for (int i = 0; i < 5; i++) {
        in[i] = T[i] < Tz[i];
        out[i] = feats[i].hollow && T[i] < Tz[i] + feats[i].t;
    }
    bool A1 = out[1] && out[2] && out[3];
    bool Ain = in[1] && in[2] && in[3];
    bool B = out[0] && !in[0];
    return (A1 || B) && !Ain && !in[4];
}

}  // namespace

TEST_CASE("feature set: names, reference validity, parameter wiring") {
    CHECK(FeatureSet::names()[0] == std::string("x1"));
    CHECK(FeatureSet::names()[5] == std::string("z2"));
    CHECK(FeatureSet::names()[13] == std::string("p5"));

    FeatureSet ref = FeatureSet::reference();
    CHECK_NOTHROW(ref.validate());
    auto feats = ref.features();
    CHECK(feats[0].c == Vec3(0, 0, 0));
    CHECK(feats[1].c == Vec3(0.5, 0.5, 0.5));
    CHECK(feats[1].p == 1.0);       // axis plate: fixed power
    CHECK(feats[1].t == ref.t2);    // fixed "big" thickness
    CHECK(feats[4].hollow == false);  // S5 punch is solid
    CHECK(feats[4].c == Vec3(0.5, 0.5, 0.0));
    CHECK(feats[3].z == Vec3(0.32, 0.32, 0.32));  // body diagonal shares one theta

    FeatureSet bad = ref;
    bad.theta[0] = 0.7;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ref;
    bad.theta[4] = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ref;
    bad.theta[0] = bad.theta[1] = bad.theta[2] = 0.0;  // z1 = c1: degenerate
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("feature density: logistic surfaces at the exact levels") {
    SuperEllipsoid s{{0, 0, 0}, {0.25, 0.25, 0.25}, 0.05, 2.0, true};

    // control point sits on the inner surface: density 1/2
    CHECK(feature_density(s.z, s, 0) == doctest::Approx(0.5).epsilon(1e-6));
    // deep inside / far outside saturate
    CHECK(feature_density(Vec3(0.01, 0.01, 0.01), s, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(feature_density(Vec3(0.45, 0.45, 0.45), s, 0) == doctest::Approx(0.0).epsilon(1e-6));
    // a point between the surfaces: outside inner, inside outer
    Vec3 mid = s.z * (1.0 + 0.025 / 0.25);
    CHECK(feature_density(mid, s, 0) < 0.01);
    CHECK(feature_density(mid, s, 1) > 0.99);

    // axis-aligned control point gives a slab: T depends on one coordinate only
    SuperEllipsoid plate{{0.5, 0.5, 0.5}, {0.5, 0.5, 0.05}, 0.1, 1.0, true};
    CHECK(feature_T(Vec3(0.1, 0.9, 0.2), plate, 0.0) ==
          doctest::Approx(std::abs(0.2 - 0.5)).epsilon(1e-6));
    CHECK(feature_T(Vec3(0.9, 0.1, 0.2), plate, 0.0) ==
          doctest::Approx(std::abs(0.2 - 0.5)).epsilon(1e-6));
}

TEST_CASE("compose: bounded, cubic-symmetric, plausible volume") {
    VoxelGrid g(16);
    FeatureSet ref = FeatureSet::reference();
    VectorXd rho = compose(ref, g);
    CHECK(rho.minCoeff() >= 0.0);
    CHECK(rho.maxCoeff() <= 1.0);
    CHECK(rho.maxCoeff() > 0.9);
    CHECK(is_cubic_symmetric(g, rho, 1e-12));
    double f = volume_fraction(rho);
    CHECK(f > 0.05);
    CHECK(f < 0.6);

    FeatureSet degen = ref;
    degen.theta[4] = 5.0;
    CHECK_THROWS_AS(compose(degen, g), ConfigError);
}

TEST_CASE("membership against the exact indicator oracle at 1e5 random points") {
    const int n = 32;
    VoxelGrid g(n);
    FeatureSet ref = FeatureSet::reference();
    VectorXd rho = compose(ref, g);

    // points more than two voxels (in the T metric, |grad T| ~ 1) from every
    // surface must agree with the exact composition after 0.5 thresholding
    const double margin = 2.0 * g.h();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    int tested = 0, agree = 0;
    for (int trial = 0; trial < 100000; trial++) {
        Vec3 x(uni(rng), uni(rng), uni(rng));
        bool near = false;
        bool exact = exact_member(ref, wedge_point(x), margin, near);
        if (near) continue;
        int i = std::min(int(x[0] * n), n - 1);
        int j = std::min(int(x[1] * n), n - 1);
        int k = std::min(int(x[2] * n), n - 1);
        bool smooth = rho(g.lin(i, j, k)) > 0.5;
        tested++;
        if (smooth == exact) agree++;
    }
    CHECK(tested > 10000);  // the band must not swallow the sample
    CHECK(double(agree) / tested >= 0.999);
}

TEST_CASE("compose gradients match central differences in all 14 parameters") {
    VoxelGrid g(16);
    FeatureSet ref = FeatureSet::reference();
    // move off the reference so no parameter sits at a symmetry point
    for (int i = 0; i < 14; i++) ref.theta[i] *= 1.0 + 0.013 * (i + 1) / 14.0;
    Eigen::MatrixXd grads;
    VectorXd rho = compose_with_grads(ref, g, grads);
    REQUIRE(grads.rows() == g.nelem());
    REQUIRE(grads.cols() == 14);

    const double h = 1e-6;
    for (int jp = 0; jp < 14; jp++) {
        FeatureSet fp = ref, fm = ref;
        fp.theta[jp] += h;
        fm.theta[jp] -= h;
        VectorXd fd = (compose(fp, g) - compose(fm, g)) / (2 * h);
        double scale = std::max(grads.col(jp).cwiseAbs().maxCoeff(), 1e-6);
        double err = (grads.col(jp) - fd).cwiseAbs().maxCoeff() / scale;
        CAPTURE(jp);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("feature set text file round-trips exactly") {
    fs::path dir = fs::temp_directory_path() / "buckopt_shape_test";
    fs::create_directories(dir);
    FeatureSet ref = FeatureSet::reference();
    ref.theta[0] = 0.2317345;
    write_featureset(dir / "theta.txt", ref);
    FeatureSet back = read_featureset(dir / "theta.txt");
    for (int i = 0; i < 14; i++) CHECK(back.theta[i] == ref.theta[i]);

    write_text_atomic(dir / "missing.txt", "x1 = 0.25\n");
    CHECK_THROWS_AS(read_featureset(dir / "missing.txt"), ConfigError);
    FeatureSet bad = ref;
    bad.theta[13] = 9.0;
    write_featureset(dir / "bad.txt", bad);
    CHECK_THROWS_AS(read_featureset(dir / "bad.txt"), ConfigError);
}

TEST_CASE("shape config bounds keep locations off the degenerate center") {
    ShapeConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    Vec14 lo, hi;
    cfg.bounds(lo, hi);
    for (int i : {0, 1, 2, 5, 6, 9, 12}) {
        CHECK(lo[i] == 0.005);
        CHECK(hi[i] == 0.495);
    }
    for (int i : {3, 7, 10}) {
        CHECK(lo[i] == 0.0);
        CHECK(hi[i] == cfg.t_max);
    }
    for (int i : {4, 8, 11, 13}) {
        CHECK(lo[i] == cfg.p_min);
        CHECK(hi[i] == cfg.p_max);
    }
    // every bounds box corner is a valid feature set
    FeatureSet at_lo, at_hi;
    at_lo.theta = lo;
    at_hi.theta = hi;
    CHECK_NOTHROW(at_lo.validate());
    CHECK_NOTHROW(at_hi.validate());

    ShapeConfig bad = cfg;
    bad.p_min = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.t_max = 0.6;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.gamma1 = -0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("fit_features recovers a perturbed reference on its own compose field") {
    VoxelGrid g(16);
    FeatureSet ref = FeatureSet::reference();
    VectorXd target = compose(ref, g);

    FeatureSet init = ref;
    init.theta[0] += 0.010;
    init.theta[6] -= 0.012;
    init.theta[10] += 0.008;
    VectorXd r0 = compose(init, g) - target;
    double F0 = 0.5 * r0.squaredNorm();
    REQUIRE(F0 > 1.0);  // the perturbation must actually move the field

    double resid = 0;
    FeatureSet fitted = fit_features(g, target, init, 80, &resid);
    CHECK_NOTHROW(fitted.validate());
    CHECK(resid < 0.01 * F0);
    CHECK(std::abs(fitted.theta[0] - ref.theta[0]) < 0.005);
    CHECK(std::abs(fitted.theta[6] - ref.theta[6]) < 0.01);

    CHECK_THROWS_AS(fit_features(g, VectorXd::Zero(5), init, 3), ConfigError);
}

TEST_CASE("shape optimization smoke: bounded iterates, deterministic") {
    ShapeConfig cfg;
    cfg.n = 8;
    cfg.gamma1 = 0.0;
    cfg.f_star = 0.3;
    cfg.delta = 0.5;
    cfg.radius = 0.25;  // keep the 8^3 filter well-resolved
    cfg.max_iter = 3;
    cfg.change_tol = 0.0;
    cfg.sweep_m = 1;
    cfg.path_samples = 1;

    FeatureSet init = FeatureSet::reference();
    ShapeResult a = run_shape_optimization(cfg, init);
    REQUIRE(a.iterations == 3);
    REQUIRE(a.history.size() == 3);

    Vec14 lo, hi;
    cfg.bounds(lo, hi);
    for (int i = 0; i < 14; i++) {
        CHECK(a.fs.theta[i] >= lo[i] - 1e-15);
        CHECK(a.fs.theta[i] <= hi[i] + 1e-15);
    }
    for (const auto& r : a.history) {
        CHECK(r.J == 1.0 / r.Ebar);
        CHECK(r.f_er == r.f_int);  // single realization: no robust triple
        CHECK(r.beta1 == cfg.beta1);
    }
    VoxelGrid g(cfg.n);
    CHECK(is_cubic_symmetric(g, a.physical, 1e-10));
    CHECK(a.physical.minCoeff() >= 0.0);
    CHECK(a.physical.maxCoeff() <= 1.0);
    CHECK(a.sigma_cri > 0);

    ShapeResult b = run_shape_optimization(cfg, init);
    CHECK((a.fs.theta - b.fs.theta).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.sigma_cri == b.sigma_cri);
}
