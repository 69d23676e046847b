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

#ifndef CLKL_HARNESS_HPP
#define CLKL_HARNESS_HPP

#include "clkl/crb.hpp"
#include "clkl/estimator.hpp"
#include "clkl/metrics.hpp"
#include "clkl/psomp.hpp"
#include "clkl/scene.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace clkl {

inline constexpr const char* kCsvSchema = "clkl-results/1";

enum class Method { Clkl, Psomp };
std::string_view to_string(Method m);
Method parse_method(std::string_view s);

enum class SweepVariable { Snr, RfChains, Snapshots, Paths, RangeMaxFrac, Elements, SourceModel, TruthModel };
std::string_view to_string(SweepVariable v);
SweepVariable parse_sweep_variable(std::string_view s);

/// Menu of values used when a sweep does not list its own.
std::vector<std::string> default_sweep_values(SweepVariable v);

/// Sets one scenario field from its textual sweep value.
void apply_sweep_value(ScenarioConfig& sc, SweepVariable v, const std::string& value);

/// Named CL-KL configuration change (ablation arm).
enum class Variant { Full, NoiseRefresh, SingleStart, NoScan };
std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);
void apply_variant(ClklConfig& cfg, Variant v);

/// Estimator settings that are not scenario fields.
struct EstimatorSettings {
    int angle_grid = 256;
    int scan_angles = 512;
    int scan_inv_ranges = 256;
    double sparsity = 1e-3;
    int max_iterations = 150;
    double rel_tolerance = 5e-4;
    double ring_beta = 1.2;
    int scan_passes = 4;
    bool scan_angle_normalized = true;
    bool scan_range_normalized = false;
    bool scan_refit = true;
    int psomp_angle_factor = 8;  // P-SOMP angles per array element
    bool psomp_normalize = false;

    ClklConfig clkl(const ScenarioConfig& sc, Variant v = Variant::Full) const;
    PolarDictionaryOptions polar(const ScenarioConfig& sc) const;
};

struct SweepSpec {
    SweepVariable variable = SweepVariable::Snr;
    std::vector<std::string> values = default_sweep_values(SweepVariable::Snr);
    ScenarioConfig base{};
    EstimatorSettings estimator{};
    int trials = 100;
    std::vector<Method> methods{Method::Clkl, Method::Psomp};
    std::vector<Variant> variants{Variant::Full};
    std::uint64_t seed = 42;
    bool fixed_combiner = false;
    int workers = 1;
    bool timing = false;     // fill runtime_s; off keeps the CSV reproducible
    int crb_trials = 0;      // per-trial CRB for the first n trials of every value
    bool keep_traces = false;

    void validate() const;
};

struct TrialRecord {
    std::size_t value_index = 0;
    std::string value;
    int trial = 0;
    std::uint64_t seed = 0;
    Method method = Method::Clkl;
    Variant variant = Variant::Full;
    ScenarioConfig scenario{};

    double nmse = std::numeric_limits<double>::quiet_NaN();
    double nmse_db = std::numeric_limits<double>::quiet_NaN();
    double rmse_theta_deg = std::numeric_limits<double>::quiet_NaN();
    double rmse_range = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;
    double runtime_s = std::numeric_limits<double>::quiet_NaN();

    // CL-KL diagnostics
    int winning_start = 0;
    int iterations = 0;
    bool converged = false;
    double noise_ratio = std::numeric_limits<double>::quiet_NaN();

    double crb_theta_deg = std::numeric_limits<double>::quiet_NaN();
    double crb_range = std::numeric_limits<double>::quiet_NaN();

    std::vector<PathError> errors;  // matched, per true path
    std::vector<double> trace;      // winning-start objective trace when requested
    std::string error;              // non-empty when the trial threw
};

/// Aggregate over the records of one (value, method, variant) cell.
struct SummaryRow {
    std::string value;
    Method method = Method::Clkl;
    Variant variant = Variant::Full;
    int trials = 0;
    int errors = 0;
    double nmse_db_mean = 0.0;    // 10 log10 of the mean linear NMSE
    double nmse_db_median = 0.0;  // median of per-trial dB values
    double rmse_theta_deg = 0.0;  // pooled over paths and trials
    double rmse_range = 0.0;
    double failure_rate = 0.0;
    double convergence_rate = 0.0;
    double median_iterations = 0.0;
    double median_noise_ratio = 0.0;
    double median_runtime_s = 0.0;
    double crb_theta_deg = 0.0;  // nan-median over trials with a bound
    double crb_range = 0.0;
    std::map<int, int> start_wins;
};

/// P-SOMP dictionary actually used at one sweep value.
struct PolarReport {
    std::string value;
    Eigen::Index atoms = 0;
    double max_adjacent_coherence = 0.0;
    double spacing_scale = 1.0;
};

struct SweepResult {
    SweepSpec spec;
    std::vector<PolarReport> polar;
    std::vector<TrialRecord> records;  // sorted by (value, trial, method, variant)
    std::vector<SummaryRow> summary;
};

/// Runs every (value, trial) job on `spec.workers` threads. Output does not
/// depend on the worker count.
SweepResult run_sweep(const SweepSpec& spec);

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records);

void write_csv(std::ostream& os, const SweepResult& result);
void write_csv(const std::string& path, const SweepResult& result);
void print_summary(std::ostream& os, const SweepResult& result);

/// Reference ablation: full, noise refresh, start 3 only and no scan at
/// SNR -5, +5 and +15 dB.
SweepSpec ablation_spec(SweepSpec base);

/// Convergence diagnostic at SNR -10, 0, +10 and +20 dB with traces kept.
SweepSpec convergence_spec(SweepSpec base);
/// Per-iteration rows snr, trial, iteration, objective, delta with
/// delta(t) = L(t) - L(1) for the winning start.
void write_traces(std::ostream& os, const SweepResult& result);
void write_traces(const std::string& path, const SweepResult& result);

/// Array-size sweep M in {32, 64, 128, 256} on one worker with timing on.
SweepSpec runtime_spec(SweepSpec base);

struct CrbReportRow {
    int paths = 0;
    CrbSummary compressed;
    CrbSummary full_array;  // W = I
};
/// Bounds for d = 1..max_paths at the base scenario.
std::vector<CrbReportRow> crb_report(const ScenarioConfig& sc, int trials, std::uint64_t seed, int max_paths = 5);
void print_crb_report(std::ostream& os, const std::vector<CrbReportRow>& rows);
void write_crb_csv(std::ostream& os, const std::vector<CrbReportRow>& rows);

/// key = value configuration; '#' starts a comment.
using ConfigMap = std::map<std::string, std::string>;
ConfigMap parse_config(std::istream& is);
ConfigMap read_config(const std::string& path);
/// Applies known keys to the spec; throws std::invalid_argument on unknown
/// keys or malformed values.
void apply_config(const ConfigMap& cfg, SweepSpec& spec);

}  // namespace clkl

#endif  // CLKL_HARNESS_HPP
