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

#include "clkl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace clkl {

double channel_nmse(const CMat& estimate, const CMat& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
        throw std::invalid_argument("channel_nmse: shape mismatch");
    const double ref = truth.squaredNorm();
    if (!(ref > 0.0)) throw std::invalid_argument("channel_nmse: reference channel is zero");
    return (estimate - truth).squaredNorm() / ref;
}

double nmse_db(double nmse) {
    if (!(nmse > 0.0)) return kNmseFloorDb;
    return std::max(10.0 * std::log10(nmse), kNmseFloorDb);
}

// Shortest augmenting path with row/column potentials, O(n^3).
std::vector<int> solve_assignment(const RMat& cost) {
    const auto n = static_cast<int>(cost.rows());
    if (cost.cols() != n) throw std::invalid_argument("solve_assignment: cost matrix must be square");
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is the virtual source.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

double matching_cost(const GeoPoint& est, const GeoPoint& truth) {
    return std::abs(est.theta_deg - truth.theta_deg) / kAngleToleranceDeg +
           std::abs(est.range - truth.range) / (truth.range * kRangeToleranceRel);
}

Matching match_paths(const std::vector<GeoPoint>& estimates, const std::vector<GeoPoint>& truth) {
    if (estimates.size() != truth.size()) throw std::invalid_argument("match_paths: path count mismatch");
    const auto n = static_cast<Eigen::Index>(truth.size());
    RMat cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = matching_cost(estimates[i], truth[j]);

    Matching m;
    m.assignment = solve_assignment(cost);
    m.errors.resize(truth.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const int j = m.assignment[i];
        m.cost += cost(i, j);
        m.errors[j] = {estimates[i].theta_deg - truth[j].theta_deg, estimates[i].range - truth[j].range, truth[j].range};
    }
    return m;
}

bool failure(const std::vector<PathError>& errors) {
    for (const auto& e : errors)
        if (std::abs(e.dtheta_deg) > kAngleToleranceDeg || std::abs(e.drange) / e.range_true > kRangeToleranceRel)
            return true;
    return false;
}

TrialMetrics evaluate_trial(const CMat& estimate, const CMat& truth, const std::vector<GeoPoint>& est_paths,
                            const std::vector<GeoPoint>& true_paths) {
    TrialMetrics t;
    t.nmse = channel_nmse(estimate, truth);
    t.nmse_db = nmse_db(t.nmse);
    const Matching m = match_paths(est_paths, true_paths);
    RmsAccumulator th, r;
    for (const auto& e : m.errors) {
        th.add(e.dtheta_deg);
        r.add(e.drange);
    }
    t.rmse_theta_deg = th.value();
    t.rmse_range = r.value();
    t.failed = failure(m.errors);
    t.matching = m.assignment;
    return t;
}

double RmsAccumulator::value() const {
    return count_ == 0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(sum_sq_ / static_cast<double>(count_));
}

}  // namespace clkl
