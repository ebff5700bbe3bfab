#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace buckopt {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// exit codes 2/3/4 (0 = success)
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LoadCase { Hydrostatic, Uniaxial };

// unit-magnitude compressive macro stress direction, Voigt (11,22,33,23,13,12)
Vec6 load_direction(LoadCase lc);

// n^3 voxels on the unit cell, periodic; x-fastest linear indexing for both
// elements and (unique) nodes.
struct VoxelGrid {
    int n = 0;

    explicit VoxelGrid(int n_) : n(n_) {
        if (n < 2) throw ConfigError("grid resolution must be >= 2, got " + std::to_string(n_));
    }
    double h() const { return 1.0 / n; }
    int nelem() const { return n * n * n; }
    int nnode() const { return n * n * n; }
    int ndof() const { return 3 * nnode(); }

    int lin(int i, int j, int k) const { return (k * n + j) * n + i; }

    // corner offsets, VTK hexahedron order
    static const std::array<std::array<int, 3>, 8>& corner_offsets();

    // node index and per-axis wrap flag (1 if the corner crossed the periodic
    // boundary) for corner c of element e
    void corner(int e, int c, int& node, std::array<int, 3>& wrap) const {
        int i = e % n, j = (e / n) % n, k = e / (n * n);
        const auto& o = corner_offsets()[c];
        int ii = i + o[0], jj = j + o[1], kk = k + o[2];
        wrap = {ii == n, jj == n, kk == n};
        node = lin(ii == n ? 0 : ii, jj == n ? 0 : jj, kk == n ? 0 : kk);
    }

    Vec3 centroid(int e) const {
        int i = e % n, j = (e / n) % n, k = e / (n * n);
        return Vec3((i + 0.5) * h(), (j + 0.5) * h(), (k + 0.5) * h());
    }
};

struct BaseMaterial {
    double E1 = 1.0;
    double E0 = 1e-4;  // void floor, 1e-4 * E1
    double nu = 1.0 / 3.0;
    double p = 3.0;  // SIMP exponent

    // stiffness/load interpolation: rho^p (E1-E0) + E0
    double interp_k(double rho) const { return std::pow(rho, p) * (E1 - E0) + E0; }
    double dinterp_k(double rho) const { return p * std::pow(rho, p - 1) * (E1 - E0); }
    // stress-stiffness interpolation: rho^p E1 (no floor)
    double interp_s(double rho) const { return std::pow(rho, p) * E1; }
    double dinterp_s(double rho) const { return p * std::pow(rho, p - 1) * E1; }
};

Mat6 isotropic_C(double E, double nu);

}  // namespace buckopt
