#pragma once

#include <Eigen/Sparse>
#include <cmath>
#include <complex>
#include <vector>

#include "buckopt/core.hpp"
#include "buckopt/element.hpp"

namespace buckopt {

using SpMat = Eigen::SparseMatrix<double>;

// Bloch wave vector, components in [0, pi]. Components equal to 0 or pi give a
// real (anti-)periodic operator.
struct WaveVector {
    Vec3 k = Vec3::Zero();
    bool is_real() const {
        auto ok = [](double v) { return v == 0.0 || v == M_PI; };
        return ok(k(0)) && ok(k(1)) && ok(k(2));
    }
    bool is_gamma() const { return k.isZero(0.0); }
};

// Per-corner Bloch phase bookkeeping: the dof value at a wrapped corner equals
// exp(i k.wrap) times the master value. k = 0 reduces to the plain periodic map.
struct BlochMap {
    Vec3 k;
    std::complex<double> phase(const std::array<int, 3>& wrap) const {
        double a = k(0) * wrap[0] + k(1) * wrap[1] + k(2) * wrap[2];
        return {std::cos(a), std::sin(a)};
    }
};

// Fixed 27-point periodic stencil sparsity (per scalar node), ncomp interleaved
// components, optionally in the real 2N embedding [[A,-B],[B,A]] of a complex
// Hermitian operator. Values are rewritten per assembly; the pattern is reused.
class StencilMatrix {
  public:
    StencilMatrix(const VoxelGrid& grid, int ncomp, bool embedded);

    void zero();
    // accumulate v * exp(i*arg) at scalar block (node_r, node_c), components (cr, cc)
    void add(int node_r, int cr, int node_c, int cc, double v, double cosarg, double sinarg);
    void add_real(int node_r, int cr, int node_c, int cc, double v) {
        add(node_r, cr, node_c, cc, v, 1.0, 0.0);
    }

    const SpMat& matrix() const { return mat_; }
    int dim() const { return mat_.cols(); }
    int half() const { return D_; }  // scalar-part dimension (= dim unless embedded)
    bool embedded() const { return embedded_; }

    // complex matvec through the embedding (or plain real product)
    VectorXcd mult(const VectorXcd& v) const;
    VectorXd mult(const VectorXd& v) const;

  private:
    int slot(int row, int col) const;  // index into values array
    int n_ = 0, ncomp_ = 1, D_ = 0;
    bool embedded_ = false;
    SpMat mat_;
};

// element scatter helpers ------------------------------------------------

struct ElementDofs {
    std::array<int, 8> node;
    std::array<std::array<int, 3>, 8> wrap;
};
ElementDofs element_dofs(const VoxelGrid& grid, int e);

// K0(k) = sum_e E_e P^H k0 P  (3 interleaved components)
void assemble_k0(StencilMatrix& K, const VoxelGrid& grid, const H11Element& el,
                 const VectorXd& rho_phys, const BaseMaterial& mat, const WaveVector& k);

// scalar stress-stiffness operator: identical per-component 8x8 blocks
void assemble_ksig(StencilMatrix& K, const VoxelGrid& grid, const std::vector<Mat8>& ks8,
                   const WaveVector& k);

// unit-strain load columns f_alpha at k = 0 (3N x 6)
Eigen::MatrixXd assemble_unit_loads(const VoxelGrid& grid, const H11Element& el,
                                    const VectorXd& rho_phys, const BaseMaterial& mat);

// gather the element dof vector with Bloch phases applied
template <typename Scalar>
Eigen::Matrix<Scalar, 24, 1> gather_element(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v,
                                            const ElementDofs& ed, const BlochMap& bm) {
    Eigen::Matrix<Scalar, 24, 1> out;
    for (int c = 0; c < 8; c++) {
        std::complex<double> ph = bm.phase(ed.wrap[c]);
        for (int d = 0; d < 3; d++) {
            if constexpr (std::is_same_v<Scalar, double>)
                out(3 * c + d) = ph.real() * v(3 * ed.node[c] + d);
            else
                out(3 * c + d) = ph * v(3 * ed.node[c] + d);
        }
    }
    return out;
}

}  // namespace buckopt
