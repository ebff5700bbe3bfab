#pragma once

#include <memory>

#include "buckopt/core.hpp"
#include "buckopt/solver.hpp"

namespace buckopt {

// Helmholtz PDE filter -(r/(2 sqrt 3))^2 lap(rho_tilde) + rho_tilde = rho with
// periodic boundaries, discretized on the voxel centers (7-point stencil).
// Linear, self-adjoint and mass preserving; assembled once per mesh.
class PdeFilter {
  public:
    PdeFilter(const VoxelGrid& grid, double radius);

    VectorXd apply(const VectorXd& rho) const;  // solve A rho_tilde = rho
    double radius() const { return radius_; }

  private:
    double radius_;
    Eigen::SparseMatrix<double> A_;
    std::unique_ptr<IcCg> solver_;
};

// smoothed Heaviside projection (tanh form), threshold eta, sharpness beta
VectorXd project_field(const VectorXd& tilde, double beta, double eta);
VectorXd project_deriv(const VectorXd& tilde, double beta, double eta);

struct RobustTriple {
    VectorXd tilde;  // filtered field (shared by the three realizations)
    VectorXd eroded, intermediate, dilated;
};

// thresholds eta = 0.5 + deta (eroded), 0.5, 0.5 - deta (dilated)
RobustTriple realize_robust(const PdeFilter& filter, const VectorXd& rho, double beta1,
                            double deta);

double volume_fraction(const VectorXd& rho);
// sum 4 rho (1-rho) / N, in [0,1]; report as percent elsewhere
double grayness(const VectorXd& rho);

// average over the 48 cubic symmetry operations (axis permutations x center
// reflections) acting on the voxel field
VectorXd cubic_symmetrize(const VoxelGrid& grid, const VectorXd& field);
bool is_cubic_symmetric(const VoxelGrid& grid, const VectorXd& field, double tol);

// shell r_in <= d <= r_out of the nearest periodic image center; every image
// cavity also trims the overlapping shells, so the face contacts carry a
// single fused wall instead of stacked double caps. Per-voxel coverage
// fractions from 6^3 subsamples (the trimmed seams are thinner than one voxel)
VectorXd voxel_hollow_sphere(const VoxelGrid& grid, double r_in, double r_out);

}  // namespace buckopt
