#pragma once

#include "buckopt/core.hpp"

namespace buckopt {

using Mat24 = Eigen::Matrix<double, 24, 24>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Mat6x24 = Eigen::Matrix<double, 6, 24>;
using Mat24x6 = Eigen::Matrix<double, 24, 6>;
using Mat3x8 = Eigen::Matrix<double, 3, 8>;

// Trilinear hexahedron with 9 incompatible displacement modes (Wilson H11),
// statically condensed to the 24 nodal dofs. Built once per mesh for a regular
// cube of edge h and unit modulus; element matrices scale linearly with E.
struct H11Element {
    double h = 0, vol = 0;
    Mat6 C;                       // unit-modulus constitutive matrix
    Mat24 k0;                     // condensed stiffness
    Mat24 k_h8;                   // compatible-only stiffness (reference)
    Mat24x6 f0;                   // condensed unit-strain load columns
    std::array<Mat6x24, 8> B;     // condensed strain-displacement at Gauss points
    std::array<Mat3x8, 8> dN;     // compatible shape gradients at Gauss points
    std::array<double, 8> w{};    // quadrature weight * detJ

    H11Element(double h, double nu);

    // stress stiffness is component-block-diagonal with identical 8x8 blocks:
    // ks(3a+c,3b+c') = delta_cc' ks8(a,b);  sig per Gauss point, Voigt order
    Mat8 stress_stiffness8(const std::array<Vec6, 8>& sig) const;
};

// Voigt stress vector -> 3x3 tensor (order 11,22,33,23,13,12)
Mat3 voigt_to_tensor(const Vec6& s);

}  // namespace buckopt
