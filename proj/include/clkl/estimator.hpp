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

#ifndef CLKL_ESTIMATOR_HPP
#define CLKL_ESTIMATOR_HPP

#include "clkl/manifold.hpp"
#include "clkl/scene.hpp"

#include <array>
#include <stdexcept>
#include <vector>

namespace clkl {

/// Raised when the requested path count cannot be resolved from an
/// N_RF x N_RF covariance.
class IdentifiabilityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Largest path count the compressed covariance can identify, floor((N_RF - 1) / 2).
constexpr int max_identifiable_paths(int rf_chains) { return rf_chains < 1 ? 0 : (rf_chains - 1) / 2; }

/// CL-KL tuning. Defaults are the reference settings; `inv_range_min` and
/// `inv_range_max` must be set for the scenario (see for_scenario).
struct ClklConfig {
    int angle_grid = 256;
    int scan_angles = 512;
    int scan_inv_ranges = 256;
    double theta_lo_deg = 5.0;
    double theta_hi_deg = 85.0;
    double sparsity = 1e-3;  // l1 weight on p
    int max_iterations = 150;
    double rel_tolerance = 5e-4;
    double armijo_step = 1.0;
    double armijo_shrink = 0.5;
    double armijo_slope = 1e-4;
    int max_backtracks = 40;
    double ring_beta = 1.2;
    double inv_range_min = 1.0 / 21.25;
    double inv_range_max = 1.0 / 1.0625;
    int scan_passes = 4;
    bool scan_normalized = true;         // angle pass scores divided by |d|^2
    bool scan_range_normalized = false;  // same for the inverse-range pass
    bool scan_refit = true;       // least-squares re-fit of active powers before each scan step

    // Ablation switches. The defaults give the full estimator.
    std::array<bool, 3> starts{true, true, true};  // ring, near (u_max), far (u_min)
    bool post_loop_scan = true;
    int noise_refresh_interval = 0;  // 0 keeps the noise estimate frozen

    /// Reference settings with curvature bounds [1 / r_max, 1 / r_min] of the scenario.
    static ClklConfig for_scenario(const ScenarioConfig& sc);
    void validate() const;
};

/// Angle grid uniform in cos(theta) over [lo, hi] degrees, ascending in theta.
RVec cosine_angle_grid(int points, double lo_deg, double hi_deg);
/// Uniform grid over [lo, hi].
RVec uniform_grid(int points, double lo, double hi);

/// Writes the chirp atom exp(j omega m - j kappa m^2) into `out` using phasor
/// recurrences (a few complex products per element instead of sin/cos).
void chirp_atom(const RVec& mbar, double omega, double kappa, Eigen::Ref<CVec> out);

/// Angle-gridded dictionary with one learnable inverse range per angle.
/// Keeps the compressed atoms W^H a_i(u_i) consistent with (theta_i, u_i).
class AngleDictionary {
public:
    AngleDictionary(const ArrayConfig& array, const CMat& combiner, RVec thetas, RVec inv_ranges);

    Eigen::Index size() const { return thetas_.size(); }
    const ArrayConfig& array() const { return array_; }
    const CMat& combiner() const { return combiner_; }
    /// W^H W
    const CMat& gram() const { return gram_; }
    const RVec& thetas() const { return thetas_; }
    const RVec& inv_ranges() const { return inv_ranges_; }
    /// N_RF x Q matrix of compressed atoms.
    const CMat& atoms() const { return atoms_; }

    void set_atom(Eigen::Index i, double theta, double inv_range);
    void set_inv_ranges(const RVec& inv_ranges);

    /// W^H a(theta, u) for an arbitrary point.
    CVec compressed_atom(double theta, double inv_range) const;
    /// W^H [a(theta_j, u) ...] for a batch of angles at one inverse range.
    CMat compressed_atoms_over_angles(const RVec& thetas, double inv_range) const;
    /// W^H [a(theta, u_j) ...] for a batch of inverse ranges at one angle.
    CMat compressed_atoms_over_inv_ranges(double theta, const RVec& inv_ranges) const;
    /// d/du_i of atom i, W^H (-j c_i mbar^2 .* a_i).
    CVec atom_inv_range_derivative(Eigen::Index i) const;

private:
    ArrayConfig array_;
    CMat combiner_;
    CMat gram_;
    RVec thetas_;
    RVec inv_ranges_;
    CMat atoms_;
};

/// Symmetrize, sort eigenvalues ascending, average the N_RF - d smallest and
/// floor at 1e-12.
double estimate_noise_frozen(const CMat& sample_cov, int paths);

/// sum_i p_i d_i d_i^H + noise W^H W
CMat model_covariance(const RVec& powers, const AngleDictionary& dict, double noise);

/// log det R + tr(R^{-1} R_hat) + sparsity * ||p||_1. Throws std::runtime_error
/// when the model covariance is not positive definite.
double kl_objective(const RVec& powers, const AngleDictionary& dict, double noise, const CMat& sample_cov,
                    double sparsity);

/// d_i^H G d_i + sparsity, G = R^{-1} - R^{-1} R_hat R^{-1}.
RVec power_gradient(const RVec& powers, const AngleDictionary& dict, double noise, const CMat& sample_cov,
                    double sparsity);

/// 2 p_i Re{(dd_i/du_i)^H G d_i}. Not used by the estimator itself.
RVec inv_range_gradient(const RVec& powers, const AngleDictionary& dict, double noise, const CMat& sample_cov);

struct PowerLoopResult {
    RVec powers;
    std::vector<double> trace;  // objective after every accepted step, trace[0] at p = 0
    int iterations = 0;
    bool converged = false;
    double noise = 0.0;  // noise level the final objective was evaluated with
    double objective() const { return trace.back(); }
};

/// Projected-gradient descent on p with Armijo backtracking, inverse ranges
/// frozen at the dictionary's current values. Starts from p = 0 unless an
/// initial point is supplied.
PowerLoopResult power_loop(const AngleDictionary& dict, const CMat& sample_cov, double noise, int paths,
                           const ClklConfig& cfg, const RVec* initial = nullptr);

/// Ring-indexed warm start clip(1 / (Z sin^2 theta)), Z = D^2 / (2 beta^2 lambda).
double ring_inv_range(const ArrayConfig& array, double theta, double beta, double u_min, double u_max);

struct StartDiagnostics {
    int start = 0;  // 1 ring, 2 near, 3 far
    int iterations = 0;
    bool converged = false;
    double objective = 0.0;
    std::vector<double> trace;
};

struct MultiStartResult {
    AngleDictionary dictionary;  // inverse ranges of the winning start
    RVec powers;
    double noise = 0.0;
    int winning_start = 0;
    std::vector<StartDiagnostics> starts;
};

MultiStartResult multi_start(const ArrayConfig& array, const CMat& combiner, const CMat& sample_cov, double noise,
                             int paths, const ClklConfig& cfg);

/// Top-d atoms by power (ties by index). When fewer than d atoms are active,
/// pads with the inactive atoms scoring highest against the residual covariance.
std::vector<Eigen::Index> select_active_set(const RVec& powers, const AngleDictionary& dict, const CMat& sample_cov,
                                            int paths);

struct ScannedPath {
    double theta = 0.0;
    double inv_range = 0.0;
    double power = 0.0;
    CVec atom;  // compressed
};

/// Powers diag(A^+ R_hat A^+^H), clipped at zero, for the compressed atoms A
/// of the active set.
void refit_scan_powers(std::vector<ScannedPath>& active, const CMat& sample_cov);

/// Matched-filter scan: alternating angle / inverse-range passes over fine
/// grids, each atom scored against the sample covariance with every other
/// active atom deflated.
std::vector<ScannedPath> post_loop_scan(std::vector<ScannedPath> active, const AngleDictionary& dict,
                                        const CMat& sample_cov, const ClklConfig& cfg);

/// Ŝ = (W^H Â)^+ Y, Ĥ = Â Ŝ with Fresnel atoms. Sets `rank_deficient` when
/// W^H Â loses column rank.
CMat reconstruct_channel(const ArrayConfig& array, const std::vector<double>& thetas,
                         const std::vector<double>& ranges, const CMat& combiner, const CMat& snapshots,
                         bool* rank_deficient = nullptr);

struct PathEstimate {
    double theta = 0.0;  // rad
    double range = 0.0;  // m
    double power = 0.0;
    double curvature = 0.0;
};

struct EstimateResult {
    std::vector<PathEstimate> paths;
    CMat channel;
    double noise_estimate = 0.0;
    int winning_start = 0;
    std::vector<StartDiagnostics> starts;
    bool empty_active_set = false;
    bool rank_deficient = false;
    bool beyond_identifiability = false;

    const StartDiagnostics* winner() const;
    int iterations() const { return winner() ? winner()->iterations : 0; }
    bool converged() const { return winner() ? winner()->converged : false; }
};

EstimateResult clkl_estimate(const ArrayConfig& array, const CompressedObservation& obs, int paths,
                             const ClklConfig& cfg);

}  // namespace clkl

#endif  // CLKL_ESTIMATOR_HPP
