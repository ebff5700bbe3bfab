#include "buckopt/sensitivity.hpp"

#include <algorithm>
#include <cmath>

namespace buckopt {

namespace {

using Mat24x6 = Eigen::Matrix<double, 24, 6>;
using Vec24 = Eigen::Matrix<double, 24, 1>;
using Vec24c = Eigen::Matrix<std::complex<double>, 24, 1>;

Mat24x6 gather_chi(const HomState& hs, const ElementDofs& ed) {
    Mat24x6 X;
    for (int a = 0; a < 6; a++)
        for (int c = 0; c < 8; c++)
            for (int d = 0; d < 3; d++) X(3 * c + d, a) = hs.chi[a](3 * ed.node[c] + d);
    return X;
}

Vec24 gather_periodic(const VectorXd& v, const ElementDofs& ed) {
    Vec24 out;
    for (int c = 0; c < 8; c++)
        for (int d = 0; d < 3; d++) out(3 * c + d) = v(3 * ed.node[c] + d);
    return out;
}

// Voigt contraction vector of the mode-gradient metric at one Gauss point:
// sig^T m6 equals the Ksig quadratic form integrand for this mode
Vec6 mode_metric(const Mat3x8& dN, const Vec24c& pe) {
    Eigen::Matrix<std::complex<double>, 8, 3> P;
    for (int c = 0; c < 8; c++)
        for (int d = 0; d < 3; d++) P(c, d) = pe(3 * c + d);
    Eigen::Matrix3cd G = dN * P;  // column c: gradient of component c
    Mat3 M = (G.conjugate() * G.transpose()).real();
    Vec6 m;
    m << M(0, 0), M(1, 1), M(2, 2), 2 * M(1, 2), 2 * M(0, 2), 2 * M(0, 1);
    return m;
}

}  // namespace

Mat6 dC_drho_element(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                     const BaseMaterial& mat, const HomState& hs, int e) {
    ElementDofs ed = element_dofs(grid, e);
    Mat24x6 X = gather_chi(hs, ed);
    Mat6 D = Mat6::Zero();
    for (int gp = 0; gp < 8; gp++) {
        Mat6 M = Mat6::Identity() - el.B[gp] * X;
        D += el.w[gp] * M.transpose() * el.C * M;
    }
    return mat.dinterp_k(rho_phys(e)) * D;
}

Eigen::MatrixXd dC_bilinear_many(const VoxelGrid& grid, const H11Element& el,
                                 const VectorXd& rho_phys, const BaseMaterial& mat,
                                 const HomState& hs,
                                 const std::vector<std::pair<Vec6, Vec6>>& pairs) {
    const int np = int(pairs.size());
    Eigen::MatrixXd out(np, grid.nelem());
    for (int e = 0; e < grid.nelem(); e++) {
        ElementDofs ed = element_dofs(grid, e);
        Mat24x6 X = gather_chi(hs, ed);
        for (int i = 0; i < np; i++) {
            double s = 0;
            for (int gp = 0; gp < 8; gp++) {
                Vec6 Mu = pairs[i].first - el.B[gp] * (X * pairs[i].first);
                Vec6 Mv = pairs[i].second - el.B[gp] * (X * pairs[i].second);
                s += el.w[gp] * Mu.dot(el.C * Mv);
            }
            out(i, e) = mat.dinterp_k(rho_phys(e)) * s;
        }
    }
    return out;
}

VectorXd dEbar_drho(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                    const BaseMaterial& mat, const HomState& hs) {
    Vec6 s1 = hs.props.S.col(0);
    Eigen::MatrixXd g = dC_bilinear_many(grid, el, rho_phys, mat, hs, {{s1, s1}});
    return hs.props.Ebar * hs.props.Ebar * g.row(0).transpose();
}

VectorXd dkappa_drho(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                     const BaseMaterial& mat, const HomState& hs) {
    Vec6 e1 = Vec6::Unit(0), e2 = Vec6::Unit(1);
    Eigen::MatrixXd g = dC_bilinear_many(grid, el, rho_phys, mat, hs, {{e1, e1}, {e1, e2}});
    return ((g.row(0) + 2.0 * g.row(1)) / 3.0).transpose();
}

VectorXd dzener_drho(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                     const BaseMaterial& mat, const HomState& hs) {
    Vec6 e1 = Vec6::Unit(0), e2 = Vec6::Unit(1), e6 = Vec6::Unit(5);
    Eigen::MatrixXd g =
        dC_bilinear_many(grid, el, rho_phys, mat, hs, {{e6, e6}, {e1, e1}, {e1, e2}});
    double denom = hs.props.C(0, 0) - hs.props.C(0, 1);
    return ((2.0 * g.row(0) - hs.props.zener * (g.row(1) - g.row(2))) / denom).transpose();
}

double ks_aggregate(const std::vector<double>& tau, double zeta) {
    if (tau.empty()) throw ConfigError("KS aggregate of an empty set");
    double m = *std::max_element(tau.begin(), tau.end());
    double s = 0;
    for (double t : tau) s += std::exp(zeta * (t - m));
    return m + std::log(s) / zeta;
}

std::vector<double> ks_weights(const std::vector<double>& tau, double zeta) {
    double m = *std::max_element(tau.begin(), tau.end());
    std::vector<double> w(tau.size());
    double s = 0;
    for (size_t i = 0; i < tau.size(); i++) s += w[i] = std::exp(zeta * (tau[i] - m));
    for (double& x : w) x /= s;
    return w;
}

std::vector<std::pair<int, int>> select_bands(const TargetEval& ev, double rel_window) {
    double tmax = -1e300;
    for (const auto& br : ev.bands)
        for (double t : br.tau) tmax = std::max(tmax, t);
    double thr = tmax - rel_window * std::abs(tmax);
    std::vector<std::pair<int, int>> sel;
    for (int ik = 0; ik < int(ev.bands.size()); ik++)
        for (int ib = 0; ib < int(ev.bands[ik].tau.size()); ib++)
            if (ev.bands[ik].tau[ib] >= thr) sel.push_back({ik, ib});
    return sel;
}

std::vector<ModeContribution> mode_contributions(const TargetEval& ev,
                                                 const std::vector<std::pair<int, int>>& sel,
                                                 const std::vector<double>& weights) {
    if (sel.size() != weights.size())
        throw ConfigError("selection and weight counts differ");
    std::vector<ModeContribution> modes(sel.size());
    for (size_t i = 0; i < sel.size(); i++) {
        auto [ik, ib] = sel[i];
        modes[i] = {ev.ks[ik], ev.bands[ik].tau[ib], weights[i], &ev.bands[ik].phi[ib]};
    }
    return modes;
}

TauSensitivity dtau_drho(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                         const BaseMaterial& mat, const HomState& hs, const Prestress& ps,
                         const std::vector<ModeContribution>& modes) {
    const int ne = grid.nelem();
    const Vec6 eps0 = ps.eps0;

    // weighted mode-metric aggregates: everything a mode contributes enters
    // through mhat (Ksig side) and ahat (K0 side)
    std::vector<std::array<Vec6, 8>> mhat(ne);
    for (auto& a : mhat) a.fill(Vec6::Zero());
    VectorXd ahat = VectorXd::Zero(ne);

    TauSensitivity out;
    for (const auto& md : modes) {
        out.weighted_tau += md.weight * md.tau;
        BlochMap bm{md.k.k};
        for (int e = 0; e < ne; e++) {
            ElementDofs ed = element_dofs(grid, e);
            Vec24c pe = gather_element<std::complex<double>>(*md.phi, ed, bm);
            Vec24 pr = pe.real(), pi = pe.imag();
            ahat(e) += md.weight * md.tau * (pr.dot(el.k0 * pr) + pi.dot(el.k0 * pi));
            for (int gp = 0; gp < 8; gp++)
                mhat[e][gp] += md.weight * mode_metric(el.dN[gp], pe);
        }
    }

    // qhat (adjoint rhs) and Ghat (macro-strain coupling vector)
    VectorXd qhat = VectorXd::Zero(grid.ndof());
    for (int e = 0; e < ne; e++) {
        ElementDofs ed = element_dofs(grid, e);
        Mat24x6 X = gather_chi(hs, ed);
        double is = mat.interp_s(rho_phys(e));
        Vec24 qe = Vec24::Zero();
        for (int gp = 0; gp < 8; gp++) {
            Vec6 Cm = el.C * mhat[e][gp];
            Vec24 BtCm = el.B[gp].transpose() * Cm;
            qe += (is * el.w[gp]) * BtCm;
            out.Ghat += (is * el.w[gp]) * (Cm - X.transpose() * BtCm);
        }
        for (int c = 0; c < 8; c++)
            for (int d = 0; d < 3; d++) qhat(3 * ed.node[c] + d) += qe(3 * c + d);
    }

    out.psi = hs.solver->solve(qhat, nullptr, SolveOpts{});

    VectorXd upre = VectorXd::Zero(grid.ndof());
    for (int a = 0; a < 6; a++) upre += eps0(a) * hs.chi[a];
    Vec6 uc = hs.props.S * out.Ghat;

    out.direct.resize(ne);
    out.coupling.resize(ne);
    out.adjoint.resize(ne);
    for (int e = 0; e < ne; e++) {
        ElementDofs ed = element_dofs(grid, e);
        Mat24x6 X = gather_chi(hs, ed);
        double dk = mat.dinterp_k(rho_phys(e));
        double ds = mat.dinterp_s(rho_phys(e));
        double dsum = 0, csum = 0;
        for (int gp = 0; gp < 8; gp++) {
            Vec6 Meps = eps0 - el.B[gp] * (X * eps0);
            dsum += el.w[gp] * (el.C * Meps).dot(mhat[e][gp]);
            Vec6 Mu = uc - el.B[gp] * (X * uc);
            csum += el.w[gp] * Mu.dot(el.C * Meps);
        }
        out.direct(e) = -dk * ahat(e) - ds * dsum;
        out.coupling(e) = dk * csum;
        Vec24 pse = gather_periodic(out.psi, ed);
        Vec24 upe = gather_periodic(upre, ed);
        out.adjoint(e) = dk * (pse.dot(el.f0 * eps0) - pse.dot(el.k0 * upe));
    }
    out.dtau = out.direct + out.coupling + out.adjoint;
    return out;
}

VectorXd chain_to_raw(const PdeFilter& filter, const VectorXd& tilde, double beta, double eta,
                      const VectorXd& g_phys) {
    VectorXd inner = project_deriv(tilde, beta, eta).cwiseProduct(g_phys);
    return filter.apply(inner);
}

}  // namespace buckopt
