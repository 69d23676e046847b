// SPDX-License-Identifier: Apache-2.0
//
// clkl: covariance-domain near-field channel estimation for hybrid arrays
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#ifndef CLKL_TEST_SUPPORT_HPP
#define CLKL_TEST_SUPPORT_HPP

#include "clkl/types.hpp"

#include <cmath>
#include <random>

namespace clkl::test {

inline CMat random_cmat(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    CMat m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double re = g(rng);
            const double im = g(rng);
            m(i, j) = cplx(re, im);
        }
    return m;
}

inline CMat random_unitary(Eigen::Index n, std::mt19937_64& rng) {
    Eigen::HouseholderQR<CMat> qr(random_cmat(n, n, rng));
    return qr.householderQ() * CMat::Identity(n, n);
}

/// Hermitian positive definite matrix with eigenvalues in [1, 1 + spread].
inline CMat random_hpd(Eigen::Index n, std::mt19937_64& rng, double spread = 4.0) {
    std::uniform_real_distribution<double> u(0.0, spread);
    const CMat q = random_unitary(n, rng);
    RVec ev(n);
    for (Eigen::Index i = 0; i < n; ++i) ev[i] = 1.0 + u(rng);
    return q * ev.asDiagonal() * q.adjoint();
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace clkl::test

#endif  // CLKL_TEST_SUPPORT_HPP
