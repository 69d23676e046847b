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

#ifndef CLKL_MANIFOLD_HPP
#define CLKL_MANIFOLD_HPP

#include "clkl/types.hpp"

#include <cmath>
#include <stdexcept>

namespace clkl {

/// Centred element index m - (M-1)/2 for m = 0..M-1.
RVec centred_index(int elements);

/// Uniform linear array geometry. Angles are measured from the array axis
/// (radians); ranges from the array centre (metres).
class ArrayConfig {
public:
    /// `spacing_m <= 0` selects half-wavelength spacing.
    explicit ArrayConfig(double carrier_hz = 28e9, int elements = 64, double spacing_m = 0.0);

    double carrier() const { return carrier_hz_; }
    int elements() const { return elements_; }
    double spacing() const { return spacing_; }
    double wavelength() const { return wavelength_; }
    /// (M-1) * d_ant
    double aperture() const { return (elements_ - 1) * spacing_; }
    /// 2 D^2 / lambda
    double rayleigh_distance() const { return 2.0 * aperture() * aperture() / wavelength_; }

    /// Cached centred index, shared by every steering and derivative routine.
    const RVec& centred() const { return centred_; }

    /// omega(theta) = 2 pi d_ant cos(theta) / lambda, rad/element.
    double spatial_frequency(double theta) const {
        return 2.0 * kPi * spacing_ / wavelength_ * std::cos(theta);
    }
    /// c(theta) = pi d_ant^2 sin^2(theta) / lambda, so that kappa = c / r.
    double chirp_constant(double theta) const {
        const double s = std::sin(theta);
        return kPi * spacing_ * spacing_ / wavelength_ * s * s;
    }
    double curvature(double theta, double range) const { return chirp_constant(theta) / range; }

private:
    double carrier_hz_;
    int elements_;
    double wavelength_;
    double spacing_;
    RVec centred_;
};

struct PathParam {
    double theta = 0.0;  // rad
    double range = 1.0;  // m
    double power = 0.0;
};

struct CurvatureCoords {
    double omega = 0.0;
    double kappa = 0.0;
    double chirp = 0.0;
};

inline CurvatureCoords curvature_coords(const ArrayConfig& cfg, double theta, double range) {
    const double c = cfg.chirp_constant(theta);
    return {cfg.spatial_frequency(theta), c / range, c};
}

/// Exact spherical-wave steering vector, phase-referenced to the array centre.
template <typename Scalar = double>
CVecT<Scalar> steering_usw(const ArrayConfig& cfg, double theta, double range) {
    if (!(range > 0.0)) throw std::invalid_argument("steering_usw: range must be positive");
    const double k = 2.0 * kPi / cfg.wavelength();
    const double px = range * std::cos(theta);
    const double py = range * std::sin(theta);
    const RVec& mbar = cfg.centred();
    CVecT<Scalar> a(mbar.size());
    for (Eigen::Index m = 0; m < mbar.size(); ++m) {
        const double delta = mbar[m] * cfg.spacing();
        const double rm = std::hypot(px - delta, py);
        // r_m - r = (delta^2 - 2 delta r cos(theta)) / (r_m + r), no cancellation for range >> aperture
        const double phase = -k * (delta * (delta - 2.0 * px)) / (rm + range);
        a[m] = std::complex<Scalar>(static_cast<Scalar>(std::cos(phase)), static_cast<Scalar>(std::sin(phase)));
    }
    return a;
}

/// Linear-plus-quadratic chirp exp(j omega m - j c u m^2) in inverse range u >= 0.
/// u = 0 gives the far-field Vandermonde vector.
template <typename Scalar = double>
CVecT<Scalar> steering_chirp(const ArrayConfig& cfg, double theta, double inv_range) {
    const double omega = cfg.spatial_frequency(theta);
    const double kappa = cfg.chirp_constant(theta) * inv_range;
    const RVec& mbar = cfg.centred();
    CVecT<Scalar> a(mbar.size());
    for (Eigen::Index m = 0; m < mbar.size(); ++m) {
        const double phase = omega * mbar[m] - kappa * mbar[m] * mbar[m];
        a[m] = std::complex<Scalar>(static_cast<Scalar>(std::cos(phase)), static_cast<Scalar>(std::sin(phase)));
    }
    return a;
}

/// Fresnel (second-order) approximation of steering_usw.
template <typename Scalar = double>
CVecT<Scalar> steering_fresnel(const ArrayConfig& cfg, double theta, double range) {
    if (!(range > 0.0)) throw std::invalid_argument("steering_fresnel: range must be positive");
    return steering_chirp<Scalar>(cfg, theta, 1.0 / range);
}

/// Effective beamfocused Rayleigh distance r_RD cos^2(theta) / 10.
inline double ebrd(const ArrayConfig& cfg, double theta) {
    const double c = std::cos(theta);
    return cfg.rayleigh_distance() * c * c / 10.0;
}

}  // namespace clkl

#endif  // CLKL_MANIFOLD_HPP
