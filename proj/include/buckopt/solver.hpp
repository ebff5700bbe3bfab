#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <memory>

#include "buckopt/core.hpp"

namespace buckopt {

struct SolveOpts {
    double tol = 1e-8;  // relative residual
    int maxit = 10000;
};

struct SolveStats {
    int iters = 0;
    double relres = 0;
};

// Incomplete-Cholesky preconditioned CG for SPD systems. The Gamma-point
// operator carries the 3-dimensional rigid-translation null space, handled by
// deflation: per-component means are projected out of the rhs, the iterates
// and the preconditioned residuals (never by pinning dofs).
class IcCg {
  public:
    // deflate_ncomp = number of interleaved components to project (0 = none)
    IcCg(const Eigen::SparseMatrix<double>& A, int deflate_ncomp);

    // two-level deflation for NEAR-null directions (long-wave Bloch operators):
    // the coarse space Z is solved by a Galerkin correction, CG runs in the
    // A-orthogonal complement. Z^T A Z must be nonsingular, so this is not for
    // an exact null space; use deflate_ncomp for that.
    void set_coarse_space(const Eigen::MatrixXd& Z);

    VectorXd solve(const VectorXd& b, const VectorXd* warm, const SolveOpts& opts,
                   SolveStats* stats = nullptr) const;

    void project(VectorXd& v) const;  // remove translation components

  private:
    const Eigen::SparseMatrix<double>* A_;
    Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::AMDOrdering<int>> ic_;
    int deflate_ = 0;
    Eigen::MatrixXd Z_, AZ_;                 // coarse basis and A Z
    Eigen::LDLT<Eigen::MatrixXd> coarseE_;   // Z^T A Z
    bool coarse_ = false;
};

}  // namespace buckopt
