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

#ifndef CLKL_METRICS_HPP
#define CLKL_METRICS_HPP

#include "clkl/types.hpp"

#include <vector>

namespace clkl {

inline constexpr double kNmseFloorDb = -200.0;
inline constexpr double kAngleToleranceDeg = 15.0;
inline constexpr double kRangeToleranceRel = 0.6;

/// ||H_hat - H||_F^2 / ||H||_F^2
double channel_nmse(const CMat& estimate, const CMat& truth);
/// 10 log10(nmse), floored at kNmseFloorDb.
double nmse_db(double nmse);

/// Angle (deg) and range (m) of one path.
struct GeoPoint {
    double theta_deg = 0.0;
    double range = 0.0;
};

struct PathError {
    double dtheta_deg = 0.0;  // estimate - truth
    double drange = 0.0;      // estimate - truth
    double range_true = 0.0;
};

struct Matching {
    std::vector<int> assignment;  // assignment[i] = truth index matched to estimate i
    std::vector<PathError> errors;  // indexed by truth path
    double cost = 0.0;
};

/// Optimal assignment for a square cost matrix (Hungarian / Kuhn-Munkres).
/// Returns the column assigned to each row.
std::vector<int> solve_assignment(const RMat& cost);

/// Pairing cost |dtheta| / 15 deg + |dr| / (0.6 r_true).
double matching_cost(const GeoPoint& est, const GeoPoint& truth);

/// Minimum-cost pairing of estimated and true paths.
Matching match_paths(const std::vector<GeoPoint>& estimates, const std::vector<GeoPoint>& truth);

/// Any matched path off by more than 15 deg or 60 % relative range.
bool failure(const std::vector<PathError>& errors);

struct TrialMetrics {
    double nmse = 0.0;
    double nmse_db = 0.0;
    double rmse_theta_deg = 0.0;  // RMS over the paths of this trial
    double rmse_range = 0.0;
    bool failed = false;
    std::vector<int> matching;
};

TrialMetrics evaluate_trial(const CMat& estimate, const CMat& truth, const std::vector<GeoPoint>& est_paths,
                            const std::vector<GeoPoint>& true_paths);

/// Pooled root-mean-square error accumulator (squared errors pooled over paths
/// and trials); order-independent.
class RmsAccumulator {
public:
    void add(double error) {
        sum_sq_ += error * error;
        ++count_;
    }
    double value() const;
    long count() const { return count_; }

private:
    double sum_sq_ = 0.0;
    long count_ = 0;
};

}  // namespace clkl

#endif  // CLKL_METRICS_HPP
