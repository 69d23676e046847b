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

#ifndef CLKL_SCENE_HPP
#define CLKL_SCENE_HPP

#include "clkl/manifold.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace clkl {

enum class SourceModel { Gaussian, Qpsk };
enum class TruthModel { Usw, Fresnel };

std::string_view to_string(SourceModel m);
std::string_view to_string(TruthModel m);
SourceModel parse_source_model(std::string_view s);
TruthModel parse_truth_model(std::string_view s);

/// Monte-Carlo scenario. Defaults reproduce the reference operating point:
/// M = 64, N_RF = 8, N = 64, d = 3, theta ~ U[20, 60] deg, r ~ U[0.05, 1] r_RD.
struct ScenarioConfig {
    ArrayConfig array{};
    int rf_chains = 8;
    int snapshots = 64;
    int paths = 3;
    double snr_db = 10.0;
    double theta_min_deg = 20.0;
    double theta_max_deg = 60.0;
    double range_min_frac = 0.05;  // of r_RD
    double range_max_frac = 1.0;   // of r_RD
    SourceModel source = SourceModel::Gaussian;
    TruthModel truth = TruthModel::Usw;

    double range_min() const { return range_min_frac * array.rayleigh_distance(); }
    double range_max() const { return range_max_frac * array.rayleigh_distance(); }
    /// Throws std::invalid_argument on an unusable configuration.
    void validate() const;
};

/// Independent random streams derived from one trial seed. Every component of
/// a scene draws from its own stream, so changing e.g. the source model leaves
/// paths, combiner and noise untouched.
class SceneRng {
public:
    enum class Stream : std::uint32_t { Paths = 1, Combiner = 2, Sources = 3, Noise = 4 };

    explicit SceneRng(std::uint64_t seed) : seed_(seed) {}
    std::uint64_t seed() const { return seed_; }
    std::mt19937_64 stream(Stream id) const;

private:
    std::uint64_t seed_;
};

/// Estimator-visible data: no ground truth.
struct CompressedObservation {
    CMat combiner;     // M x N_RF
    CMat snapshots;    // N_RF x N
    CMat covariance;   // N_RF x N_RF
    bool whitened = false;

    int rf_chains() const { return static_cast<int>(combiner.cols()); }
    int snapshot_count() const { return static_cast<int>(snapshots.cols()); }
};

struct Scene {
    std::vector<PathParam> paths;
    double noise_power = 1.0;
    CMat sources;     // d x N
    CMat combiner;    // M x N_RF
    CMat full;        // X, M x N
    CMat channel;     // H = A S, M x N
    CMat compressed;  // Y = W^H X
    CMat covariance;  // (1/N) Y Y^H

    CompressedObservation observation() const { return {combiner, compressed, covariance, false}; }
};

/// N0 = 10^(-SNR/10); valid for unit-power paths and unit-modulus steering.
double snr_to_noise(double snr_db);

std::vector<PathParam> draw_paths(const ScenarioConfig& sc, std::mt19937_64& rng);
/// Random phase-only combiner, entries exp(j phi) / sqrt(M).
CMat draw_combiner(int elements, int rf_chains, std::mt19937_64& rng);
/// d x N source matrix with E|s_l(n)|^2 = powers[l].
CMat draw_sources(SourceModel model, int snapshots, const std::vector<double>& powers, std::mt19937_64& rng);
/// Steering matrix [a(theta_1, r_1), ...] under the chosen truth manifold.
CMat steering_matrix(const ArrayConfig& cfg, const std::vector<PathParam>& paths, TruthModel model);
/// (1/N) Y Y^H, Hermitian-symmetrized.
CMat sample_covariance(const CMat& snapshots);

Scene draw_scene(const ScenarioConfig& sc, const SceneRng& rng);
/// Same as above but reuses a given combiner instead of drawing one.
Scene draw_scene(const ScenarioConfig& sc, const SceneRng& rng, const CMat& fixed_combiner);

/// Applies (W^H W)^{-1/2} to the snapshots and the combiner so that the
/// effective combiner satisfies W^H W = I.
CompressedObservation whiten(const CompressedObservation& obs);

}  // namespace clkl

#endif  // CLKL_SCENE_HPP
