#include "buckopt/solver.hpp"

#include <string>

namespace buckopt {

IcCg::IcCg(const Eigen::SparseMatrix<double>& A, int deflate_ncomp)
    : A_(&A), deflate_(deflate_ncomp) {
    // the Gamma-point matrix is only semi-definite; retry with growing shift if
    // the incomplete factorization breaks down
    for (double shift : {1e-3, 1e-2, 1e-1, 1.0}) {
        ic_.setInitialShift(shift);
        ic_.compute(A);
        if (ic_.info() == Eigen::Success) return;
    }
    throw NumericalError("incomplete Cholesky breakdown (dim=" + std::to_string(A.rows()) + ")");
}

void IcCg::set_coarse_space(const Eigen::MatrixXd& Z) {
    if (Z.rows() != A_->rows()) throw ConfigError("coarse space dimension mismatch");
    Z_ = Z;
    AZ_ = (*A_) * Z_;
    Eigen::MatrixXd E = Z_.transpose() * AZ_;
    coarseE_.compute(E);
    if (coarseE_.info() != Eigen::Success || !coarseE_.isPositive())
        throw NumericalError("coarse space is (numerically) A-singular");
    coarse_ = true;
}

void IcCg::project(VectorXd& v) const {
    if (!deflate_) return;
    const Eigen::Index N = v.size() / deflate_;
    for (int c = 0; c < deflate_; c++) {
        double mean = 0;
        for (Eigen::Index i = 0; i < N; i++) mean += v(deflate_ * i + c);
        mean /= double(N);
        for (Eigen::Index i = 0; i < N; i++) v(deflate_ * i + c) -= mean;
    }
}

VectorXd IcCg::solve(const VectorXd& b, const VectorXd* warm, const SolveOpts& opts,
                     SolveStats* stats) const {
    if (coarse_) {
        // DEF1 deflated PCG: CG runs on P A with P = I - AZ E^{-1} Z^T, the
        // coarse part is solved exactly at the end. The iterated residual is
        // the true residual of the corrected solution.
        double bnorm = b.norm();
        if (bnorm == 0.0) {
            if (stats) *stats = {0, 0.0};
            return VectorXd::Zero(b.size());
        }
        auto deflate_resid = [&](VectorXd& r) {
            r -= AZ_ * coarseE_.solve(Z_.transpose() * r);
        };
        VectorXd xhat = warm ? *warm : VectorXd::Zero(b.size());
        VectorXd r = b - (*A_) * xhat;
        deflate_resid(r);
        VectorXd z = ic_.solve(r);
        VectorXd p = z;
        double rz = r.dot(z);
        double relres = r.norm() / bnorm;
        int it = 0;
        for (; it < opts.maxit && relres > opts.tol; it++) {
            VectorXd Ap = (*A_) * p;
            deflate_resid(Ap);
            double pAp = p.dot(Ap);
            if (pAp <= 0.0)
                throw NumericalError("CG breakdown: non-positive curvature " +
                                     std::to_string(pAp));
            double alpha = rz / pAp;
            xhat += alpha * p;
            r -= alpha * Ap;
            if ((it + 1) % 50 == 0) deflate_resid(r);  // guard against drift
            relres = r.norm() / bnorm;
            if (relres <= opts.tol) break;
            z = ic_.solve(r);
            double rz_new = r.dot(z);
            p = z + (rz_new / rz) * p;
            rz = rz_new;
        }
        if (relres > opts.tol)
            throw NumericalError("deflated CG failed to converge: relres=" +
                                 std::to_string(relres) + " after " + std::to_string(it) +
                                 " iterations");
        VectorXd x = xhat + Z_ * coarseE_.solve(Z_.transpose() * b - AZ_.transpose() * xhat);
        if (stats) *stats = {it + 1, relres};
        return x;
    }
    VectorXd rhs = b;
    project(rhs);
    double bnorm = rhs.norm();
    VectorXd x = warm ? *warm : VectorXd::Zero(b.size());
    if (bnorm == 0.0) {
        if (stats) *stats = {0, 0.0};
        return VectorXd::Zero(b.size());
    }
    if (warm) project(x);

    VectorXd r = rhs - (*A_) * x;
    project(r);
    VectorXd z = ic_.solve(r);
    project(z);
    VectorXd p = z;
    double rz = r.dot(z);
    double relres = r.norm() / bnorm;
    int it = 0;
    for (; it < opts.maxit && relres > opts.tol; it++) {
        VectorXd Ap = (*A_) * p;
        double pAp = p.dot(Ap);
        if (pAp <= 0.0)
            throw NumericalError("CG breakdown: non-positive curvature " + std::to_string(pAp));
        double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        if ((it + 1) % 50 == 0) {  // guard against null-space drift
            project(r);
            project(x);
        }
        relres = r.norm() / bnorm;
        if (relres <= opts.tol) break;
        z = ic_.solve(r);
        project(z);
        double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    if (relres > opts.tol)
        throw NumericalError("CG failed to converge: relres=" + std::to_string(relres) +
                             " after " + std::to_string(it) + " iterations");
    project(x);
    if (stats) *stats = {it + 1, relres};
    return x;
}

}  // namespace buckopt
