#include "buckopt/bloch.hpp"

#include <algorithm>
#include <random>

namespace buckopt {

namespace {

void validate_k(const Vec3& k) {
    for (int d = 0; d < 3; d++)
        if (std::abs(k(d)) > M_PI + 1e-12)
            throw ConfigError("wave vector components must lie in [-pi, pi]");
}

// interleaved 3N <-> per-component N views for the scalar K_sigma operator
template <typename Vec>
Vec mult_scalar_blocks(const StencilMatrix& Ks, const Vec& v, int N) {
    Vec out(3 * N);
    Vec comp(N);
    for (int c = 0; c < 3; c++) {
        for (int i = 0; i < N; i++) comp(i) = v(3 * i + c);
        Vec y = Ks.mult(comp);
        for (int i = 0; i < N; i++) out(3 * i + c) = y(i);
    }
    return out;
}

}  // namespace

BlochSystem::BlochSystem(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                         const BaseMaterial& mat, const Prestress& ps, const WaveVector& k)
    : N_(grid.nnode()),
      real_(k.is_real()),
      k_(k),
      K0_(grid, 3, !k.is_real()),
      Ks_(grid, 1, !k.is_real()) {
    validate_k(k.k);
    assemble_k0(K0_, grid, el, rho_phys, mat, k);
    assemble_ksig(Ks_, grid, ps.ks8, k);
    solver_ = std::make_unique<IcCg>(K0_.matrix(), k.is_gamma() ? 3 : 0);
    // long-wave operators are nearly singular along the three modulated
    // translations (eigenvalues O(|k|^2)); hand those to a coarse correction
    if (!k.is_gamma() && k.k.norm() < 1.0) {
        const Eigen::Index rows = K0_.matrix().rows();
        const int blocks = real_ ? 1 : 2;  // complex k runs the [Re; Im] embedding
        Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(rows, 3 * blocks);
        for (int half = 0; half < blocks; half++)
            for (int c = 0; c < 3; c++)
                for (Eigen::Index i = half * 3 * N_ + c; i < (half + 1) * 3 * N_; i += 3)
                    Z(i, 3 * half + c) = 1.0;
        solver_->set_coarse_space(Z);
    }
}

VectorXd BlochSystem::mult_k0(const VectorXd& v) const { return K0_.mult(v); }
VectorXd BlochSystem::mult_ksig(const VectorXd& v) const {
    return mult_scalar_blocks(Ks_, v, N_);
}
VectorXd BlochSystem::solve_k0(const VectorXd& b, const VectorXd* warm, SolveStats* st) const {
    return solver_->solve(b, warm, inner_, st);
}
VectorXd BlochSystem::solve_k0(const VectorXd& b, const VectorXd* warm, const SolveOpts& so,
                               SolveStats* st) const {
    return solver_->solve(b, warm, so, st);
}

VectorXcd BlochSystem::mult_k0(const VectorXcd& v) const { return K0_.mult(v); }
VectorXcd BlochSystem::mult_ksig(const VectorXcd& v) const {
    return mult_scalar_blocks(Ks_, v, N_);
}

VectorXcd BlochSystem::solve_k0(const VectorXcd& b, const VectorXcd* warm, SolveStats* st) const {
    return solve_k0(b, warm, inner_, st);
}

VectorXcd BlochSystem::solve_k0(const VectorXcd& b, const VectorXcd* warm, const SolveOpts& so,
                                SolveStats* st) const {
    const int n = int(b.size());
    if (real_) {
        VectorXd wr, wi;
        const VectorXd *pwr = nullptr, *pwi = nullptr;
        if (warm) {
            wr = warm->real();
            wi = warm->imag();
            pwr = &wr;
            pwi = &wi;
        }
        SolveStats s1, s2;
        VectorXcd out(n);
        out.real() = solver_->solve(b.real(), pwr, so, &s1);
        out.imag() = b.imag().isZero(0.0) ? VectorXd::Zero(n).eval()
                                          : solver_->solve(b.imag(), pwi, so, &s2);
        if (st) *st = s1.iters > s2.iters ? s1 : s2;
        return out;
    }
    VectorXd rhs(2 * n), w0;
    rhs.head(n) = b.real();
    rhs.tail(n) = b.imag();
    const VectorXd* pw = nullptr;
    if (warm) {
        w0.resize(2 * n);
        w0.head(n) = warm->real();
        w0.tail(n) = warm->imag();
        pw = &w0;
    }
    VectorXd y = solver_->solve(rhs, pw, so, st);
    VectorXcd out(n);
    out.real() = y.head(n);
    out.imag() = y.tail(n);
    return out;
}

namespace {

template <typename Scalar>
struct EigWork {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    static Vec mult_k0(const BlochSystem& s, const Vec& v) { return s.mult_k0(v); }
    static Vec mult_ks(const BlochSystem& s, const Vec& v) { return s.mult_ksig(v); }
    static Vec solve(const BlochSystem& s, const Vec& b, const Vec* warm, const SolveOpts& so) {
        return s.solve_k0(b, warm, so);
    }
};

template <typename Scalar>
void deterministic_fill(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& V, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Eigen::Index j = 0; j < V.cols(); j++)
        for (Eigen::Index i = 0; i < V.rows(); i++) {
            if constexpr (std::is_same_v<Scalar, double>)
                V(i, j) = u(rng);
            else
                V(i, j) = Scalar(u(rng), u(rng));
        }
}

void project_translations(Eigen::Ref<Eigen::MatrixXd> V) {
    const Eigen::Index N = V.rows() / 3;
    for (Eigen::Index j = 0; j < V.cols(); j++)
        for (int c = 0; c < 3; c++) {
            double mean = 0;
            for (Eigen::Index i = 0; i < N; i++) mean += V(3 * i + c, j);
            mean /= double(N);
            for (Eigen::Index i = 0; i < N; i++) V(3 * i + c, j) -= mean;
        }
}
void project_translations(Eigen::Ref<Eigen::MatrixXcd>) {}  // Gamma is always the real path

// MGS in the K0 inner product; KV is replaced by K0 * V for the new basis.
// Columns that collapse under projection are dropped (kept columns move left);
// fresh deterministic vectors are appended until at least min_keep survive.
// Returns the surviving column count.
template <typename Scalar>
int k0_orthonormalize(const BlochSystem& sys,
                      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& V,
                      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& KV,
                      uint64_t reseed, int min_keep, bool gamma) {
    using W = EigWork<Scalar>;
    KV.resize(V.rows(), V.cols());
    int kept = 0;
    uint64_t fresh_id = 0;
    for (Eigen::Index j = 0; j < V.cols() || kept < min_keep; j++) {
        if (j >= V.cols()) {  // exhausted: append a fresh vector
            V.conservativeResize(Eigen::NoChange, j + 1);
            KV.conservativeResize(Eigen::NoChange, j + 1);
            typename W::Mat fresh(V.rows(), 1);
            deterministic_fill(fresh, reseed + 7919 * ++fresh_id);
            if (gamma)
                if constexpr (std::is_same_v<Scalar, double>) project_translations(fresh);
            V.col(j) = fresh.col(0);
        }
        if (kept != j) V.col(kept) = V.col(j);
        double pre2 = std::real(V.col(kept).dot(V.col(kept)));
        for (int pass = 0; pass < 2; pass++)
            for (int i = 0; i < kept; i++) {
                Scalar c = KV.col(i).dot(V.col(kept));
                V.col(kept) -= c * V.col(i);
            }
        typename W::Vec kv = W::mult_k0(sys, V.col(kept));
        double nrm2 = std::real(V.col(kept).dot(kv));
        if (nrm2 <= 1e-24 * std::max(pre2, 1e-300)) continue;  // collapsed: drop
        double s = 1.0 / std::sqrt(nrm2);
        V.col(kept) *= s;
        KV.col(kept) = kv * s;
        kept++;
    }
    return kept;
}

// Block iteration for the largest Ritz pairs of (-Ks, K0): each outer applies
// the preconditioned operator K0^{-1}(-Ks + shift K0) to the current Ritz
// block and runs Rayleigh-Ritz over the augmented basis [applied, current,
// previous] (LOBPCG-style momentum), which accelerates the clustered spectra
// these shell-like designs produce.
template <typename Scalar>
BandResult subspace_solve(const BlochSystem& sys, const EigOpts& opts, Eigen::MatrixXcd* warm) {
    using W = EigWork<Scalar>;
    using Mat = typename W::Mat;
    using Vec = typename W::Vec;
    const int dim = sys.ndof();
    const int m = opts.m;
    const int p = std::min(dim, std::max(3 * m, m + opts.extra));
    const int q = std::min(m + 2, p);  // history columns carried per block
    const bool gamma = sys.k().is_gamma();

    Mat B(dim, p);
    deterministic_fill(B, opts.seed);
    if (warm && warm->rows() == dim && warm->cols() > 0) {
        // columns are ascending in tau: the rightmost are the ones worth keeping
        int c = std::min(p, int(warm->cols()));
        if constexpr (std::is_same_v<Scalar, double>)
            B.leftCols(c) = warm->rightCols(c).real();
        else
            B.leftCols(c) = warm->rightCols(c);
    }
    if (gamma) project_translations(B);

    Mat KB, KsB;
    int r = k0_orthonormalize<Scalar>(sys, B, KB, opts.seed ^ 0xabcdefULL, p, gamma);
    KsB.resize(dim, r);
    for (int j = 0; j < r; j++) KsB.col(j) = W::mult_ks(sys, B.col(j));

    Mat V, KV, KsV, Vprev;
    BandResult out;
    double shift = 0;
    Eigen::VectorXd theta;
    for (int it = 1; it <= opts.maxit; it++) {
        // Rayleigh-Ritz over the r-column basis; keep the top pk pairs
        Mat Ap = -(B.leftCols(r).adjoint() * KsB.leftCols(r));
        Ap = Scalar(0.5) * (Ap + Ap.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<Mat> es(Ap);
        const int pk = std::min(p, r);
        Mat Z = es.eigenvectors().rightCols(pk);
        theta = es.eigenvalues().tail(pk);  // ascending
        Vprev = std::move(V);
        V = B.leftCols(r) * Z;
        KV = KB.leftCols(r) * Z;
        KsV = KsB.leftCols(r) * Z;

        double resid = 0;
        const double ttop = theta(pk - 1);
        for (int i = 0; i < std::min(m, pk); i++) {
            int c = pk - 1 - i;
            double tau = theta(c);
            double rn = (-KsV.col(c) - tau * KV.col(c)).norm();
            double den = KsV.col(c).norm() + std::abs(tau) * KV.col(c).norm();
            double rr = den > 0 ? rn / den : rn;
            if (ttop > 0 && tau < 0.9 * ttop) rr /= std::max(1.0, opts.tail_relax);
            resid = std::max(resid, rr);
        }
        out.outer_iters = it;
        out.max_resid = resid;
        if (resid <= opts.tol) break;
        if (it == opts.maxit) {
            // a slightly stale residual is still a usable Rayleigh quotient;
            // a badly stalled one is not
            if (resid > 1e3 * opts.tol)
                throw NumericalError("buckling eigensolve stalled: residual " +
                                     std::to_string(resid) + " after " + std::to_string(it) +
                                     " iterations");
            break;
        }

        // grow the spectral shift when the negative end dominates
        double tmin = es.eigenvalues()(0), tmax = theta(pk - 1);
        if (tmin < 0 && -tmin > 0.6 * std::max(tmax, 0.0))
            shift = std::max(shift, 1.25 * (-tmin));

        // applied block: K0^{-1} (-Ks + shift K0) V, warm-started per column.
        // Inner accuracy follows the outer residual (inexact iteration); Ritz
        // values come from exact matvecs, so loose early solves cannot bias
        // the converged pairs.
        SolveOpts so{std::max(opts.inner_tol, std::min(1e-4, 0.03 * resid)), opts.inner_maxit};
        Mat Vnew(dim, pk);
        for (int j = 0; j < pk; j++) {
            Vec y = -KsV.col(j) + Scalar(shift) * KV.col(j);
            Vec w0 = Scalar(theta(j) + shift) * V.col(j);
            Vnew.col(j) = W::solve(sys, y, &w0, so);
        }
        if (gamma) project_translations(Vnew);

        const int qv = std::min<int>(q, V.cols()), qp = std::min<int>(q, Vprev.cols());
        B.resize(dim, pk + qv + qp);
        B.leftCols(pk) = Vnew;
        B.middleCols(pk, qv) = V.rightCols(qv);
        if (qp > 0) B.rightCols(qp) = Vprev.rightCols(qp);
        r = k0_orthonormalize<Scalar>(sys, B, KB, opts.seed + uint64_t(it), p, gamma);
        KsB.resize(dim, r);
        for (int j = 0; j < r; j++) KsB.col(j) = W::mult_ks(sys, B.col(j));
    }

    const int pk = int(theta.size());
    out.tau.resize(m);
    out.phi.resize(m);
    for (int i = 0; i < m; i++) {
        int c = pk - 1 - i;
        out.tau[i] = c >= 0 ? theta(c) : theta(0);
        int cc = std::max(c, 0);
        if constexpr (std::is_same_v<Scalar, double>)
            out.phi[i] = V.col(cc).template cast<std::complex<double>>();
        else
            out.phi[i] = V.col(cc);
    }
    out.no_positive = out.tau[0] <= 0;
    if (warm) {
        warm->resize(dim, pk);
        if constexpr (std::is_same_v<Scalar, double>)
            *warm = V.template cast<std::complex<double>>();
        else
            *warm = V;
    }
    return out;
}

}  // namespace

BandResult buckling_eigensolve(const BlochSystem& sys, const EigOpts& opts,
                               Eigen::MatrixXcd* warm) {
    if (sys.real_mode()) return subspace_solve<double>(sys, opts, warm);
    return subspace_solve<std::complex<double>>(sys, opts, warm);
}

std::vector<WaveVector> ibz_targets(LoadCase lc) {
    const double P = M_PI, L = M_PI / 20.0;
    std::vector<WaveVector> out;
    auto add = [&](double a, double b, double c) { out.push_back({Vec3(a, b, c)}); };
    if (lc == LoadCase::Hydrostatic) {
        add(0, 0, 0);
        add(P, 0, 0);
        add(P, P, 0);
        add(P, P, P);
        add(L, 0, 0);
    } else {
        add(0, 0, 0);
        add(P, 0, 0);
        add(0, P, 0);
        add(P, P, 0);
        add(0, P, P);
        add(P, P, P);
        add(L, 0, 0);
    }
    return out;
}

std::vector<PathPoint> default_path(LoadCase lc) {
    const double P = M_PI;
    std::vector<PathPoint> path = {{"G", Vec3(0, 0, 0)},   {"X", Vec3(P, 0, 0)},
                                   {"M", Vec3(P, P, 0)},   {"G", Vec3(0, 0, 0)},
                                   {"R", Vec3(P, P, P)},   {"M", Vec3(P, P, 0)}};
    if (lc == LoadCase::Uniaxial) {
        path.push_back({"X'", Vec3(0, P, 0)});
        path.push_back({"M'", Vec3(0, P, P)});
        path.push_back({"G", Vec3(0, 0, 0)});
    }
    return path;
}

BandSweep sweep_bands(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                      const BaseMaterial& mat, const Prestress& ps,
                      const std::vector<PathPoint>& path, int samples_per_segment,
                      const EigOpts& opts, double sigma0) {
    if (path.size() < 2) throw ConfigError("band path needs at least two points");
    if (samples_per_segment < 1) throw ConfigError("samples per segment must be >= 1");

    BandSweep sw;
    double arc = 0;
    for (size_t s = 0; s + 1 < path.size(); s++) {
        Vec3 a = path[s].k, b = path[s + 1].k;
        int ns = samples_per_segment;
        for (int t = 0; t < ns; t++) {
            double f = double(t) / ns;
            sw.ks.push_back(a + f * (b - a));
            sw.arc.push_back(arc + f * (b - a).norm());
        }
        arc += (b - a).norm();
    }
    sw.ks.push_back(path.back().k);
    sw.arc.push_back(arc);

    const int nk = int(sw.ks.size());
    sw.lambda.resize(nk, opts.m);
    double best = kLambdaInf;
    int besti = -1;
    Eigen::MatrixXcd carry;  // warm basis handed from sample to sample
    for (int i = 0; i < nk; i++) {
        BlochSystem sys(grid, el, rho_phys, mat, ps, WaveVector{sw.ks[i]});
        sys.set_inner(opts.inner_tol, opts.inner_maxit);
        BandResult br = buckling_eigensolve(sys, opts, &carry);
        for (int b = 0; b < opts.m; b++) {
            double tau = br.tau[b];
            sw.lambda(i, b) = tau > 1.0 / kLambdaInf ? 1.0 / tau : kLambdaInf;
        }
        if (sw.lambda(i, 0) < best) {
            best = sw.lambda(i, 0);
            besti = i;
            sw.crit_mode = br.phi[0];
        }
    }
    sw.no_positive = besti < 0 || best >= kLambdaInf;
    sw.sigma_cri = sw.no_positive ? kLambdaInf : sigma0 * best;
    sw.argmin = besti;
    if (!sw.no_positive) sw.crit_k = sw.ks[besti];
    for (int i = 0; i + 1 < nk; i++) {
        double a = sw.lambda(i, 0), b = sw.lambda(i + 1, 0);
        if (a < kLambdaInf && b < kLambdaInf && std::abs(b - a) > 0.2 * std::min(a, b))
            sw.jump_flags.push_back(i);
    }
    return sw;
}

TargetEval evaluate_targets(const VoxelGrid& grid, const H11Element& el,
                            const VectorXd& rho_phys, const BaseMaterial& mat,
                            const Prestress& ps, LoadCase lc, const EigOpts& opts,
                            double sigma0, std::vector<Eigen::MatrixXcd>* warm,
                            const std::vector<int>* bands_per_k) {
    TargetEval ev;
    ev.ks = ibz_targets(lc);
    if (bands_per_k && bands_per_k->size() != ev.ks.size())
        throw ConfigError("bands_per_k size does not match target count");
    if (warm && warm->size() != ev.ks.size()) warm->assign(ev.ks.size(), Eigen::MatrixXcd());
    double taumax = -1e300;
    for (size_t i = 0; i < ev.ks.size(); i++) {
        EigOpts o = opts;
        if (bands_per_k) o.m = (*bands_per_k)[i];
        BlochSystem sys(grid, el, rho_phys, mat, ps, ev.ks[i]);
        sys.set_inner(o.inner_tol, o.inner_maxit);
        ev.bands.push_back(buckling_eigensolve(sys, o, warm ? &(*warm)[i] : nullptr));
        if (ev.bands.back().tau[0] > taumax) {
            taumax = ev.bands.back().tau[0];
            ev.crit_k = int(i);
        }
    }
    ev.no_positive = taumax <= 0;
    ev.sigma_cri = ev.no_positive ? kLambdaInf : sigma0 / taumax;
    return ev;
}

}  // namespace buckopt
