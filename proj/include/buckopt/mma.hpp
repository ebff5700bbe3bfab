#pragma once

#include "buckopt/core.hpp"

namespace buckopt {

// Svanberg's Method of Moving Asymptotes (primal-dual interior point
// subproblem solver, the 2007 reference scheme). Holds the asymptotes and the
// two previous iterates between update() calls.
class Mma {
  public:
    // n design variables, m constraints g_j <= 0
    Mma(int n, int m, double move = 0.1);

    VectorXd update(const VectorXd& x, const VectorXd& df0, const VectorXd& g,
                    const Eigen::MatrixXd& dg, const VectorXd& xmin, const VectorXd& xmax);

    int iter() const { return iter_; }

  private:
    int n_, m_, iter_ = 0;
    double move_;
    double asyinit_ = 0.5, asydecr_ = 0.7, asyincr_ = 1.2, albefa_ = 0.1, raa0_ = 1e-5;
    double a0_ = 1.0, cc_ = 1000.0, dd_ = 1.0;  // a_j = 0
    VectorXd low_, upp_, xold1_, xold2_;
};

}  // namespace buckopt
