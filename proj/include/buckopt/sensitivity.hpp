#pragma once

#include "buckopt/bloch.hpp"
#include "buckopt/design_field.hpp"

namespace buckopt {

// All element-wise gradients below are with respect to the physical density
// rho_phys; chain_to_raw maps them back through projection and filter.

// exact 6x6 dCbar/drho_e (chi fixed: the chi terms vanish at equilibrium)
Mat6 dC_drho_element(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                     const BaseMaterial& mat, const HomState& hs, int e);

// rows of the result: u_i^T (dCbar/drho_e) v_i for each requested pair
Eigen::MatrixXd dC_bilinear_many(const VoxelGrid& grid, const H11Element& el,
                                 const VectorXd& rho_phys, const BaseMaterial& mat,
                                 const HomState& hs,
                                 const std::vector<std::pair<Vec6, Vec6>>& pairs);

VectorXd dEbar_drho(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                    const BaseMaterial& mat, const HomState& hs);
VectorXd dkappa_drho(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                     const BaseMaterial& mat, const HomState& hs);
VectorXd dzener_drho(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                     const BaseMaterial& mat, const HomState& hs);

// KS aggregate (1/zeta) ln sum exp(zeta tau), overflow-safe
double ks_aggregate(const std::vector<double>& tau, double zeta);
// softmax weights dKS/dtau_i (sum to 1)
std::vector<double> ks_weights(const std::vector<double>& tau, double zeta);

// (target index, band index) pairs with tau within rel_window of the global max
std::vector<std::pair<int, int>> select_bands(const TargetEval& ev, double rel_window);

// one eigenpair entering the aggregated buckling sensitivity
struct ModeContribution {
    WaveVector k;
    double tau = 0;
    double weight = 1.0;       // dKS/dtau_i, or 1 for a single pair
    const VectorXcd* phi = nullptr;  // K0(k)-orthonormal master-dof mode
};

std::vector<ModeContribution> mode_contributions(const TargetEval& ev,
                                                 const std::vector<std::pair<int, int>>& sel,
                                                 const std::vector<double>& weights);

struct TauSensitivity {
    double weighted_tau = 0;             // sum_i w_i tau_i (diagnostic)
    VectorXd dtau;                       // total gradient, per element
    VectorXd direct, coupling, adjoint;  // the three pieces, dtau = their sum
    VectorXd psi;                        // shared adjoint field (K0 psi = qhat)
    Vec6 Ghat = Vec6::Zero();            // d(sum w_i phi^H Ksig phi)/d eps0
};

// d(sum_i w_i tau_i)/drho_phys: direct Ksig/K0 terms, the macro-strain
// coupling through Sbar, and the single consolidated adjoint solve for the
// pre-buckling fields
TauSensitivity dtau_drho(const VoxelGrid& grid, const H11Element& el, const VectorXd& rho_phys,
                         const BaseMaterial& mat, const HomState& hs, const Prestress& ps,
                         const std::vector<ModeContribution>& modes);

// g wrt rho_phys -> g wrt raw design: projection chain rule, then the
// self-adjoint filter solve
VectorXd chain_to_raw(const PdeFilter& filter, const VectorXd& tilde, double beta, double eta,
                      const VectorXd& g_phys);

}  // namespace buckopt
