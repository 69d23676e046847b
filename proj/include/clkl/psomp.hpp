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

#ifndef CLKL_PSOMP_HPP
#define CLKL_PSOMP_HPP

#include "clkl/estimator.hpp"
#include "clkl/manifold.hpp"
#include "clkl/scene.hpp"

#include <vector>

namespace clkl {

struct PolarAtom {
    double theta = 0.0;      // rad
    double inv_range = 0.0;  // 0 is the far-field atom
};

/// Per-angle polar dictionary with beam-depth ring spacing. Combiner-free:
/// the uncompressed steering matrix is cached and compressed per observation.
struct PolarDictionary {
    std::vector<PolarAtom> atoms;
    std::vector<int> rings_per_angle;  // near-field rings, far-field atom excluded
    CMat steering;                     // M x S, Fresnel atoms (u = 0 is planar)
    double spacing_scale = 1.0;        // applied multiple of the one-beam-depth spacing
    double max_adjacent_coherence = 0.0;

    Eigen::Index size() const { return static_cast<Eigen::Index>(atoms.size()); }
};

struct PolarDictionaryOptions {
    int angles = 512;
    double theta_lo_deg = 5.0;
    double theta_hi_deg = 85.0;
    double coherence_limit = 0.55;
    double widen_factor = 1.1;
};

/// One-beam-depth ring spacing pi / (c(theta) ((M-1)/2)^2); infinite at endfire.
double beam_depth_spacing(const ArrayConfig& array, double theta);

/// |a(theta, u)^H a(theta, u + du)| / M for the chirp manifold.
double ring_coherence(const ArrayConfig& array, double theta, double du);

/// Rings at u = k du (k >= 1) inside [u_min, u_max] plus one far-field atom per
/// angle. The spacing is widened geometrically until adjacent same-angle atoms
/// fall below the coherence limit.
PolarDictionary build_beam_depth_dictionary(const ArrayConfig& array, double u_min, double u_max,
                                            const PolarDictionaryOptions& opt = {});

struct PsompResult {
    std::vector<PathEstimate> paths;
    std::vector<Eigen::Index> selected;  // dictionary indices in selection order
    std::vector<double> residual_norms;  // Frobenius norm after each selection, [0] before any
    CMat channel;
    double noise_estimate = 0.0;
    bool rank_deficient = false;
};

struct PsompOptions {
    /// Correlate against unit-norm compressed atoms instead of W^H a itself.
    bool normalize_atoms = false;
};

/// Simultaneous OMP on eigen pseudo-snapshots U_d diag(sqrt(max(lambda - N0, 0)))
/// of the compressed covariance. `range_max` is reported for far-field atoms.
PsompResult psomp_estimate(const ArrayConfig& array, const CompressedObservation& obs, int paths,
                           const PolarDictionary& dict, double range_max, const PsompOptions& opt = {});

}  // namespace clkl

#endif  // CLKL_PSOMP_HPP
