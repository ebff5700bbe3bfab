#pragma once

#include <memory>

#include "buckopt/assembly.hpp"
#include "buckopt/solver.hpp"

namespace buckopt {

struct EffectiveProps {
    Mat6 C = Mat6::Zero();  // effective stiffness, Voigt (11,22,33,23,13,12)
    Mat6 S = Mat6::Zero();  // compliance
    double Ebar = 0;        // 1 / S(0,0)
    double kappabar = 0;    // (C11 + 2 C12) / 3
    double zener = 0;       // 2 C66 / (C11 - C12)
    double volfrac = 0;
};

// state of the unit-cell pre-analysis, reused by buckling and sensitivities
struct HomState {
    EffectiveProps props;
    std::vector<VectorXd> chi;  // 6 perturbation fields (ndof), mean-free
    Eigen::MatrixXd loads;      // 3N x 6 unit-strain loads
    std::shared_ptr<StencilMatrix> K0;  // k = 0 operator
    std::shared_ptr<IcCg> solver;       // deflated
    SolveStats worst_solve;
};

HomState homogenize(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                    const BaseMaterial& mat, const SolveOpts& opts);

// energy identity route: Cbar_ab = C0_ab - f_b . chi_a (algebraically equal to
// the strain-product route inside homogenize; kept separate for verification)
Mat6 effective_matrix_energy_route(const VoxelGrid& grid, const H11Element& el,
                                   const VectorXd& rho_phys, const BaseMaterial& mat,
                                   const HomState& hs);

EffectiveProps props_from_C(const Mat6& C, double volfrac);

// macroscopic strain for unit-magnitude stress sigma0 * n(loadcase)
Vec6 macro_strain(const EffectiveProps& props, LoadCase lc, double sigma0 = 1.0);

// per-element, per-Gauss-point pre-stress state and the element stress
// stiffness blocks (scaled by rho^p E1)
struct Prestress {
    Vec6 eps0 = Vec6::Zero();
    std::vector<Mat8> ks8;
};

Prestress compute_prestress(const VoxelGrid& grid, const H11Element& el,
                            const VectorXd& rho_phys, const BaseMaterial& mat,
                            const HomState& hs, LoadCase lc, double sigma0 = 1.0);

// element stress at the Gauss points for a given element (diagnostics/tests)
std::array<Vec6, 8> element_stress(const VoxelGrid& grid, const H11Element& el,
                                   const VectorXd& rho_phys, const BaseMaterial& mat,
                                   const HomState& hs, const Vec6& eps0, int e);

}  // namespace buckopt
