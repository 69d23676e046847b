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


#include "clkl/manifold.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace clkl;

namespace {

// Long-double reference for the spherical-wave phase, written out from the geometry.
cplx usw_entry_reference(const ArrayConfig& cfg, double theta, double r, int m) {
    const long double x = static_cast<long double>(r) * std::cos(static_cast<long double>(theta));
    const long double y = static_cast<long double>(r) * std::sin(static_cast<long double>(theta));
    const long double s = (m - (cfg.elements() - 1) / 2.0L) * cfg.spacing();
    const long double dist = std::sqrt((x - s) * (x - s) + y * y);
    const long double ph = -2.0L * std::acos(-1.0L) / cfg.wavelength() * (dist - r);
    return {static_cast<double>(std::cos(ph)), static_cast<double>(std::sin(ph))};
}

double fresnel_correlation(const ArrayConfig& cfg, double theta, double r) {
    return std::abs(steering_usw(cfg, theta, r).dot(steering_fresnel(cfg, theta, r))) / cfg.elements();
}

}  // namespace

TEST_CASE("centred index") {
    const RVec m4 = centred_index(4);
    CHECK(m4.size() == 4);
    CHECK(m4[0] == -1.5);
    CHECK(m4[1] == -0.5);
    CHECK(m4[2] == 0.5);
    CHECK(m4[3] == 1.5);

    const RVec m3 = centred_index(3);
    CHECK(m3[0] == -1.0);
    CHECK(m3[1] == 0.0);
    CHECK(m3[2] == 1.0);

    const RVec m64 = centred_index(64);
    CHECK(m64[0] == -31.5);
    CHECK(m64[63] == 31.5);
    for (int m : {2, 3, 7, 64, 255}) CHECK(centred_index(m).sum() == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(centred_index(1), std::invalid_argument);
}

TEST_CASE("array geometry at the reference operating point") {
    const ArrayConfig cfg;
    CHECK(cfg.elements() == 64);
    CHECK(cfg.wavelength() == doctest::Approx(kSpeedOfLight / 28e9));
    CHECK(cfg.wavelength() == doctest::Approx(10.71e-3).epsilon(1e-3));
    CHECK(cfg.spacing() == doctest::Approx(cfg.wavelength() / 2));
    // Aperture 0.338 m and Rayleigh distance 21.25 m.
    CHECK(cfg.aperture() == doctest::Approx(0.338).epsilon(2e-3));
    CHECK(cfg.rayleigh_distance() == doctest::Approx(21.25).epsilon(2e-3));
    CHECK(cfg.centred().size() == 64);

    CHECK_THROWS(ArrayConfig(28e9, 1));
    CHECK_THROWS(ArrayConfig(-1.0, 64));
}

TEST_CASE("steering vectors have unit modulus") {
    const ArrayConfig cfg;
    for (double th_deg : {1.0, 20.0, 37.0, 60.0, 89.0, 90.0, 135.0}) {
        const double th = deg2rad(th_deg);
        for (double r : {0.5, 1.06, 3.3, 21.25, 1e4}) {
            const CVec a = steering_usw(cfg, th, r);
            const CVec f = steering_fresnel(cfg, th, r);
            const CVec c = steering_chirp(cfg, th, 1.0 / r);
            for (Eigen::Index m = 0; m < a.size(); ++m) {
                CHECK(std::abs(a[m]) == doctest::Approx(1.0).epsilon(1e-14));
                CHECK(std::abs(f[m]) == doctest::Approx(1.0).epsilon(1e-14));
                CHECK(std::abs(c[m]) == doctest::Approx(1.0).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("spherical-wave steering matches the geometric phase") {
    const ArrayConfig cfg(28e9, 16);
    for (double th_deg : {15.0, 50.0, 80.0})
        for (double r : {0.2, 1.0, 7.5}) {
            const CVec a = steering_usw(cfg, deg2rad(th_deg), r);
            for (int m = 0; m < 16; ++m) CHECK(std::abs(a[m] - usw_entry_reference(cfg, deg2rad(th_deg), r, m)) < 1e-9);
        }
}

TEST_CASE("non-positive range is rejected") {
    const ArrayConfig cfg;
    CHECK_THROWS_AS(steering_usw(cfg, 0.5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(steering_usw(cfg, 0.5, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(steering_fresnel(cfg, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("broadside far-field limit is the all-ones vector") {
    const ArrayConfig cfg;
    const CVec a = steering_usw(cfg, deg2rad(90.0), 1e9);
    CHECK((a - CVec::Ones(64)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("chirp form: far field, Fresnel identity and symmetry") {
    const ArrayConfig cfg;
    const RVec& mbar = cfg.centred();
    for (double th_deg : {10.0, 45.0, 70.0}) {
        const double th = deg2rad(th_deg);
        const double omega = cfg.spatial_frequency(th);

        const CVec far = steering_chirp(cfg, th, 0.0);
        for (Eigen::Index m = 0; m < far.size(); ++m)
            CHECK(std::abs(far[m] - std::polar(1.0, omega * mbar[m])) < 1e-12);

        const double r = 2.7;
        const CVec f = steering_fresnel(cfg, th, r);
        CHECK((f - steering_chirp(cfg, th, 1.0 / r)).cwiseAbs().maxCoeff() == 0.0);

        // Mirror entries: a(m) a(-m) = exp(-2 j kappa m^2), a(m) / a(-m) = exp(2 j omega m).
        const double kappa = cfg.curvature(th, r);
        for (Eigen::Index m = 0; m < 32; ++m) {
            const Eigen::Index mm = 63 - m;
            CHECK(std::abs(f[m] * f[mm] - std::polar(1.0, -2.0 * kappa * mbar[m] * mbar[m])) < 1e-10);
            CHECK(std::abs(f[m] / f[mm] - std::polar(1.0, 2.0 * omega * mbar[m])) < 1e-10);
        }
    }
}

TEST_CASE("curvature coordinates at 45 degrees and 1.85 m") {
    const ArrayConfig cfg;
    const double th = deg2rad(45.0);
    const double c = kPi * cfg.spacing() * cfg.spacing() / cfg.wavelength() * 0.5;
    const CurvatureCoords cc = curvature_coords(cfg, th, 1.85);
    CHECK(cc.chirp == doctest::Approx(c).epsilon(1e-14));
    CHECK(cc.kappa == doctest::Approx(c / 1.85).epsilon(1e-14));
    CHECK(cc.omega == doctest::Approx(kPi * std::cos(th)).epsilon(1e-14));
}

TEST_CASE("far-field consistency over 50 angles") {
    const ArrayConfig cfg;
    for (int i = 0; i < 50; ++i) {
        const double th = deg2rad(1.0 + 178.0 * i / 49.0);
        const CVec d = steering_chirp(cfg, th, 0.0) - steering_fresnel(cfg, th, 1e9);
        CHECK(d.cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("spherical wave tends to the plane wave at large range") {
    const ArrayConfig cfg;
    for (int i = 0; i < 50; ++i) {
        const double th = deg2rad(1.0 + 178.0 * i / 49.0);
        for (double r : {1e6, 1e9, 1e12}) {
            // leading neglected phase is k delta^2 sin^2(theta) / (2 r)
            const double half_aperture = 0.5 * cfg.aperture();
            const double bound = kPi / cfg.wavelength() * half_aperture * half_aperture / r;
            const CVec d = steering_usw(cfg, th, r) - steering_chirp(cfg, th, 0.0);
            CHECK(d.cwiseAbs().maxCoeff() <= bound + 1e-12);
        }
    }
}

TEST_CASE("Fresnel accuracy improves with range") {
    const ArrayConfig cfg;
    const double rrd = cfg.rayleigh_distance();
    for (double th_deg : {20.0, 40.0, 60.0}) {
        const double th = deg2rad(th_deg);
        std::vector<double> rho;
        for (int k = 0; k < 20; ++k) {
            const double r = rrd * (0.05 + (5.0 - 0.05) * k / 19.0);
            rho.push_back(fresnel_correlation(cfg, th, r));
        }
        for (std::size_t k = 1; k < rho.size(); ++k) CHECK(rho[k] >= rho[k - 1] - 1e-12);
        CHECK(fresnel_correlation(cfg, th, rrd) > fresnel_correlation(cfg, th, 0.05 * rrd));
    }
}

TEST_CASE("Fresnel correlation at 30 degrees and 1.60 m matches a direct evaluation") {
    const ArrayConfig cfg;
    const double th = deg2rad(30.0);
    const double r = 1.60;
    cplx acc = 0.0;
    for (int m = 0; m < 64; ++m) {
        const double mb = m - 31.5;
        const cplx f = std::polar(1.0, cfg.spatial_frequency(th) * mb - cfg.chirp_constant(th) / r * mb * mb);
        acc += std::conj(usw_entry_reference(cfg, th, r, m)) * f;
    }
    const double rho = fresnel_correlation(cfg, th, r);
    CHECK(rho == doctest::Approx(std::abs(acc) / 64.0).epsilon(1e-9));
    CHECK(rho > 0.0);
    CHECK(rho <= 1.0 + 1e-12);
}

TEST_CASE("effective beamfocused Rayleigh distance") {
    const ArrayConfig cfg;
    CHECK(ebrd(cfg, deg2rad(30.0)) == doctest::Approx(1.60).epsilon(0.01));
    CHECK(ebrd(cfg, deg2rad(45.0)) == doctest::Approx(1.06).epsilon(0.01));
    CHECK(std::abs(ebrd(cfg, deg2rad(90.0))) < 1e-12);

    const double cap = cfg.rayleigh_distance() / 10.0;
    CHECK(ebrd(cfg, 0.0) == doctest::Approx(cap));
    for (int i = 1; i < 180; ++i) CHECK(ebrd(cfg, deg2rad(i)) < cap);
}

TEST_CASE("curvature times range is the chirp constant") {
    const ArrayConfig cfg;
    for (double th_deg : {5.0, 33.0, 77.0})
        for (double r : {0.01, 1.0, 42.0, 1e7}) {
            const double th = deg2rad(th_deg);
            CHECK(cfg.curvature(th, r) * r == doctest::Approx(cfg.chirp_constant(th)).epsilon(1e-15));
        }
    CHECK(cfg.curvature(0.7, 1e300) < 1e-300);
}
