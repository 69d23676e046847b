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

#ifndef CLKL_CRB_HPP
#define CLKL_CRB_HPP

#include "clkl/manifold.hpp"
#include "clkl/scene.hpp"

#include <cstdint>
#include <vector>

namespace clkl {

struct SteeringDerivatives {
    CVec d_omega;  // j mbar .* a
    CVec d_kappa;  // -j mbar^2 .* a
};

/// Derivatives of the chirp atom exp(j omega mbar - j kappa mbar^2) at
/// omega = omega(theta).
SteeringDerivatives steering_derivatives(const ArrayConfig& array, double theta, double kappa);

/// Parameter vector eta = [omega_1..d, kappa_1..d, p_1..d, N0].
struct CovarianceParams {
    RVec omega;
    RVec kappa;
    RVec power;
    double noise = 0.0;

    int paths() const { return static_cast<int>(omega.size()); }
    int size() const { return 3 * paths() + 1; }
    RVec packed() const;
    static CovarianceParams unpack(const RVec& eta, int paths);
    static CovarianceParams from_paths(const ArrayConfig& array, const std::vector<PathParam>& paths, double noise);
};

/// sum_l p_l d_l d_l^H + N0 W^H W with d_l = W^H a(omega_l, kappa_l).
CMat compressed_model_covariance(const ArrayConfig& array, const CMat& combiner, const CovarianceParams& params);

/// dR/d eta_i for every component of eta, in packing order.
std::vector<CMat> covariance_derivatives(const ArrayConfig& array, const CMat& combiner,
                                         const CovarianceParams& params);

struct FimReport {
    RMat fim;              // (3d + 1) x (3d + 1)
    RMat pseudo_inverse;   // truncated-SVD inverse
    RVec singular_values;  // descending
    double condition = 0.0;
    int truncated = 0;     // singular values below the tolerance
    bool invalid = false;  // truncation touched the (omega, kappa) block
};

inline constexpr double kFimRelativeTolerance = 1e-6;
inline constexpr double kFimSignalMassLimit = 1e-3;

/// J_ij = N Re tr(R^{-1} dR_i R^{-1} dR_j). Throws std::runtime_error when R is
/// not positive definite.
FimReport fim(const ArrayConfig& array, const CMat& combiner, const CovarianceParams& params, int snapshots);

struct PathCrb {
    double sqrt_theta_deg = 0.0;
    double sqrt_range = 0.0;
    bool endfire = false;  // sin(theta) = 0, angle bound infinite
};

/// Maps the (omega, kappa) block of the inverse FIM to angle (deg) and range (m).
std::vector<PathCrb> propagate_crb(const FimReport& report, const ArrayConfig& array,
                                   const std::vector<PathParam>& paths);

/// Median over the finite entries; NaN if there are none.
double nan_median(std::vector<double> values);

struct CrbTrial {
    double sqrt_theta_deg = 0.0;  // mean over paths, NaN for invalid trials
    double sqrt_range = 0.0;
    double condition = 0.0;
    bool invalid = false;
};

struct CrbSummary {
    double median_theta_deg = 0.0;
    double median_range = 0.0;
    double median_condition = 0.0;
    int trials = 0;
    int invalid_trials = 0;
    bool empty = false;  // every trial invalid
    std::vector<CrbTrial> per_trial;

    double invalid_rate() const { return trials > 0 ? static_cast<double>(invalid_trials) / trials : 0.0; }
};

struct CrbSweepOptions {
    int trials = 50;
    std::uint64_t base_seed = 42;
    bool identity_combiner = false;  // W = I_M reference bound
};

/// Draws paths and combiner for seeds base, base + 1, ... exactly as the Monte
/// Carlo scenes do and aggregates per-trial path-averaged bounds by nan-median.
CrbSummary crb_sweep(const ScenarioConfig& sc, const CrbSweepOptions& opt = {});

/// Per-trial bound for one scene's paths and combiner.
CrbTrial crb_trial(const ArrayConfig& array, const CMat& combiner, const std::vector<PathParam>& paths,
                   double noise, int snapshots);

}  // namespace clkl

#endif  // CLKL_CRB_HPP
