#include "buckopt/mma.hpp"

#include <algorithm>
#include <cmath>

namespace buckopt {

namespace {

using Eigen::ArrayXd;
using Eigen::MatrixXd;

struct Subproblem {
    VectorXd low, upp, alfa, beta, p0, q0, b;
    MatrixXd P, Q;
    double a0;
    VectorXd a, c, d;
};

struct Point {
    VectorXd x, y, lam, xsi, eta, mu, s;
    double z, zet;
};

// primal-dual Newton interior point for the separable MMA subproblem
VectorXd subsolv(const Subproblem& sp) {
    const int n = int(sp.alfa.size()), m = int(sp.b.size());
    const double epsimin = 1e-7;

    Point pt;
    pt.x = 0.5 * (sp.alfa + sp.beta);
    pt.y = VectorXd::Ones(m);
    pt.z = 1.0;
    pt.lam = VectorXd::Ones(m);
    pt.xsi = (pt.x - sp.alfa).cwiseInverse().cwiseMax(1.0);
    pt.eta = (sp.beta - pt.x).cwiseInverse().cwiseMax(1.0);
    pt.mu = (0.5 * sp.c).cwiseMax(1.0);
    pt.zet = 1.0;
    pt.s = VectorXd::Ones(m);

    auto residual = [&](const Point& p, double epsi, double& rmax) {
        ArrayXd ux1 = (sp.upp - p.x).array(), xl1 = (p.x - sp.low).array();
        ArrayXd plam = (sp.p0 + sp.P.transpose() * p.lam).array();
        ArrayXd qlam = (sp.q0 + sp.Q.transpose() * p.lam).array();
        VectorXd gvec = sp.P * (1.0 / ux1).matrix() + sp.Q * (1.0 / xl1).matrix();
        ArrayXd rex = plam / ux1.square() - qlam / xl1.square() - p.xsi.array() + p.eta.array();
        ArrayXd rey = sp.c.array() + sp.d.array() * p.y.array() - p.mu.array() - p.lam.array();
        double rez = sp.a0 - p.zet - sp.a.dot(p.lam);
        ArrayXd relam = gvec.array() - sp.a.array() * p.z - p.y.array() + p.s.array() -
                        sp.b.array();
        ArrayXd rexsi = p.xsi.array() * (p.x - sp.alfa).array() - epsi;
        ArrayXd reeta = p.eta.array() * (sp.beta - p.x).array() - epsi;
        ArrayXd remu = p.mu.array() * p.y.array() - epsi;
        double rezet = p.zet * p.z - epsi;
        ArrayXd res = p.lam.array() * p.s.array() - epsi;
        double sq = rex.square().sum() + rey.square().sum() + rez * rez + relam.square().sum() +
                    rexsi.square().sum() + reeta.square().sum() + remu.square().sum() +
                    rezet * rezet + res.square().sum();
        rmax = std::max({rex.abs().maxCoeff(), rey.abs().maxCoeff(), std::abs(rez),
                         relam.abs().maxCoeff(), rexsi.abs().maxCoeff(), reeta.abs().maxCoeff(),
                         remu.abs().maxCoeff(), std::abs(rezet), res.abs().maxCoeff()});
        return std::sqrt(sq);
    };

    double epsi = 1.0;
    while (epsi > epsimin) {
        double rmax = 0;
        double rnorm = residual(pt, epsi, rmax);
        for (int ittt = 0; rmax > 0.9 * epsi && ittt < 200; ittt++) {
            ArrayXd ux1 = (sp.upp - pt.x).array(), xl1 = (pt.x - sp.low).array();
            ArrayXd ux2 = ux1.square(), xl2 = xl1.square();
            ArrayXd xa = (pt.x - sp.alfa).array(), bx = (sp.beta - pt.x).array();
            ArrayXd plam = (sp.p0 + sp.P.transpose() * pt.lam).array();
            ArrayXd qlam = (sp.q0 + sp.Q.transpose() * pt.lam).array();
            VectorXd gvec = sp.P * (1.0 / ux1).matrix() + sp.Q * (1.0 / xl1).matrix();
            MatrixXd GG = sp.P * (1.0 / ux2).matrix().asDiagonal() -
                          sp.Q * (1.0 / xl2).matrix().asDiagonal();
            ArrayXd delx = plam / ux2 - qlam / xl2 - epsi / xa + epsi / bx;
            ArrayXd dely =
                sp.c.array() + sp.d.array() * pt.y.array() - pt.lam.array() - epsi / pt.y.array();
            double delz = sp.a0 - sp.a.dot(pt.lam) - epsi / pt.z;
            ArrayXd dellam = gvec.array() - sp.a.array() * pt.z - pt.y.array() - sp.b.array() +
                             epsi / pt.lam.array();
            ArrayXd diagx = 2.0 * (plam / (ux2 * ux1) + qlam / (xl2 * xl1)) +
                            pt.xsi.array() / xa + pt.eta.array() / bx;
            ArrayXd diagy = sp.d.array() + pt.mu.array() / pt.y.array();
            ArrayXd diaglamyi = pt.s.array() / pt.lam.array() + 1.0 / diagy;

            // m << n here: condense to the (m+1)-dimensional dual system
            VectorXd blam =
                dellam.matrix() + (dely / diagy).matrix() - GG * (delx / diagx).matrix();
            MatrixXd Alam = MatrixXd(diaglamyi.matrix().asDiagonal()) +
                            GG * (1.0 / diagx).matrix().asDiagonal() * GG.transpose();
            MatrixXd AA(m + 1, m + 1);
            AA.topLeftCorner(m, m) = Alam;
            AA.topRightCorner(m, 1) = sp.a;
            AA.bottomLeftCorner(1, m) = sp.a.transpose();
            AA(m, m) = -pt.zet / pt.z;
            VectorXd bb(m + 1);
            bb.head(m) = blam;
            bb(m) = delz;
            VectorXd solut = AA.fullPivLu().solve(bb);
            VectorXd dlam = solut.head(m);
            double dz = solut(m);
            ArrayXd dx = (-delx - (GG.transpose() * dlam).array()) / diagx;
            ArrayXd dy = (-dely + dlam.array()) / diagy;
            ArrayXd dxsi = -pt.xsi.array() + epsi / xa - pt.xsi.array() * dx / xa;
            ArrayXd deta = -pt.eta.array() + epsi / bx + pt.eta.array() * dx / bx;
            ArrayXd dmu = -pt.mu.array() + epsi / pt.y.array() -
                          pt.mu.array() * dy / pt.y.array();
            double dzet = -pt.zet + epsi / pt.z - pt.zet * dz / pt.z;
            ArrayXd ds = -pt.s.array() + epsi / pt.lam.array() -
                         pt.s.array() * dlam.array() / pt.lam.array();

            double stm = 1.0;
            auto cap = [&](const ArrayXd& v, const ArrayXd& dv) {
                if (v.size()) stm = std::max(stm, (-1.01 * dv / v).maxCoeff());
            };
            cap(pt.y.array(), dy);
            cap(pt.lam.array(), dlam.array());
            cap(pt.xsi.array(), dxsi);
            cap(pt.eta.array(), deta);
            cap(pt.mu.array(), dmu);
            cap(pt.s.array(), ds);
            stm = std::max(stm, -1.01 * dz / pt.z);
            stm = std::max(stm, -1.01 * dzet / pt.zet);
            stm = std::max(stm, (-1.01 * dx / xa).maxCoeff());
            stm = std::max(stm, (1.01 * dx / bx).maxCoeff());
            double steg = 1.0 / stm;

            Point older = pt;
            double rnew = 2 * rnorm;
            for (int itto = 0; rnew > rnorm && itto < 50; itto++) {
                pt.x = older.x + steg * dx.matrix();
                pt.y = older.y + steg * dy.matrix();
                pt.z = older.z + steg * dz;
                pt.lam = older.lam + steg * dlam;
                pt.xsi = older.xsi + steg * dxsi.matrix();
                pt.eta = older.eta + steg * deta.matrix();
                pt.mu = older.mu + steg * dmu.matrix();
                pt.zet = older.zet + steg * dzet;
                pt.s = older.s + steg * ds.matrix();
                rnew = residual(pt, epsi, rmax);
                steg *= 0.5;
            }
            rnorm = rnew;
        }
        epsi *= 0.1;
    }
    return pt.x;
}

}  // namespace

Mma::Mma(int n, int m, double move) : n_(n), m_(m), move_(move) {
    low_ = VectorXd::Zero(n);
    upp_ = VectorXd::Zero(n);
}

VectorXd Mma::update(const VectorXd& x, const VectorXd& df0, const VectorXd& g,
                     const Eigen::MatrixXd& dg, const VectorXd& xmin, const VectorXd& xmax) {
    if (x.size() != n_ || df0.size() != n_ || g.size() != m_ || dg.rows() != m_ ||
        dg.cols() != n_)
        throw ConfigError("MMA dimension mismatch");
    iter_++;
    VectorXd range = xmax - xmin;
    if (iter_ < 3) {
        low_ = x - asyinit_ * range;
        upp_ = x + asyinit_ * range;
    } else {
        for (int i = 0; i < n_; i++) {
            double zz = (x(i) - xold1_(i)) * (xold1_(i) - xold2_(i));
            double f = zz > 0 ? asyincr_ : (zz < 0 ? asydecr_ : 1.0);
            low_(i) = x(i) - f * (xold1_(i) - low_(i));
            upp_(i) = x(i) + f * (upp_(i) - xold1_(i));
            low_(i) = std::clamp(low_(i), x(i) - 10.0 * range(i), x(i) - 0.01 * range(i));
            upp_(i) = std::clamp(upp_(i), x(i) + 0.01 * range(i), x(i) + 10.0 * range(i));
        }
    }
    xold2_ = iter_ < 2 ? x : xold1_;
    xold1_ = x;

    Subproblem sp;
    sp.low = low_;
    sp.upp = upp_;
    sp.alfa = (low_ + albefa_ * (x - low_)).cwiseMax(x - move_ * range).cwiseMax(xmin);
    sp.beta = (upp_ - albefa_ * (upp_ - x)).cwiseMin(x + move_ * range).cwiseMin(xmax);
    sp.a0 = a0_;
    sp.a = VectorXd::Zero(m_);
    sp.c = VectorXd::Constant(m_, cc_);
    sp.d = VectorXd::Constant(m_, dd_);

    VectorXd ux1 = upp_ - x, xl1 = x - low_;
    VectorXd ux2 = ux1.cwiseProduct(ux1), xl2 = xl1.cwiseProduct(xl1);
    VectorXd xmami = range.cwiseMax(1e-5).cwiseInverse();

    VectorXd p0 = df0.cwiseMax(0.0), q0 = (-df0).cwiseMax(0.0);
    VectorXd pq0 = 0.001 * (p0 + q0) + raa0_ * xmami;
    sp.p0 = (p0 + pq0).cwiseProduct(ux2);
    sp.q0 = (q0 + pq0).cwiseProduct(xl2);

    Eigen::MatrixXd P = dg.cwiseMax(0.0), Q = (-dg).cwiseMax(0.0);
    Eigen::MatrixXd PQ = 0.001 * (P + Q) + raa0_ * VectorXd::Ones(m_) * xmami.transpose();
    sp.P = (P + PQ) * ux2.asDiagonal();
    sp.Q = (Q + PQ) * xl2.asDiagonal();
    sp.b = sp.P * ux1.cwiseInverse() + sp.Q * xl1.cwiseInverse() - g;

    return subsolv(sp);
}

}  // namespace buckopt
