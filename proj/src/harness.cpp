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

#include "clkl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace clkl {

// ---------------------------------------------------------------------------
// enums

std::string_view to_string(Method m) { return m == Method::Psomp ? "psomp" : "clkl"; }

Method parse_method(std::string_view s) {
    if (s == "clkl") return Method::Clkl;
    if (s == "psomp") return Method::Psomp;
    throw std::invalid_argument("unknown method '" + std::string(s) + "'");
}

namespace {

constexpr std::pair<SweepVariable, std::string_view> kVariables[] = {
    {SweepVariable::Snr, "snr"},
    {SweepVariable::RfChains, "n_rf"},
    {SweepVariable::Snapshots, "n_snapshots"},
    {SweepVariable::Paths, "d"},
    {SweepVariable::RangeMaxFrac, "range_max_frac"},
    {SweepVariable::Elements, "m_elements"},
    {SweepVariable::SourceModel, "source_model"},
    {SweepVariable::TruthModel, "truth_model"},
};

constexpr std::pair<Variant, std::string_view> kVariants[] = {
    {Variant::Full, "full"},
    {Variant::NoiseRefresh, "noise_refresh"},
    {Variant::SingleStart, "start3_only"},
    {Variant::NoScan, "no_scan"},
};

double parse_double(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument(what + ": '" + s + "' is not a number");
    }
    if (used != s.size()) throw std::invalid_argument(what + ": '" + s + "' is not a number");
    return v;
}

int parse_int(const std::string& s, const std::string& what) {
    const double v = parse_double(s, what);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw std::invalid_argument(what + ": '" + s + "' is not an integer");
    return static_cast<int>(v);
}

bool parse_bool(const std::string& s, const std::string& what) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw std::invalid_argument(what + ": '" + s + "' is not a boolean");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',' || ch == ' ' || ch == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

std::string_view to_string(SweepVariable v) {
    for (const auto& [k, name] : kVariables)
        if (k == v) return name;
    return "?";
}

SweepVariable parse_sweep_variable(std::string_view s) {
    for (const auto& [k, name] : kVariables)
        if (name == s) return k;
    throw std::invalid_argument("unknown sweep variable '" + std::string(s) + "'");
}

std::string_view to_string(Variant v) {
    for (const auto& [k, name] : kVariants)
        if (k == v) return name;
    return "?";
}

Variant parse_variant(std::string_view s) {
    for (const auto& [k, name] : kVariants)
        if (name == s) return k;
    throw std::invalid_argument("unknown variant '" + std::string(s) + "'");
}

std::vector<std::string> default_sweep_values(SweepVariable v) {
    switch (v) {
    case SweepVariable::Snr: return {"-15", "-10", "-5", "0", "5", "10", "15", "20", "25"};
    case SweepVariable::RfChains: return {"4", "8", "12", "16"};
    case SweepVariable::Snapshots: return {"16", "32", "64", "128"};
    case SweepVariable::Paths: return {"1", "2", "3", "4", "5"};
    case SweepVariable::RangeMaxFrac: return {"0.1", "0.25", "0.5", "1", "2", "5"};
    case SweepVariable::Elements: return {"32", "64", "128", "256"};
    case SweepVariable::SourceModel: return {"gaussian", "qpsk"};
    case SweepVariable::TruthModel: return {"usw", "fresnel"};
    }
    return {};
}

void apply_sweep_value(ScenarioConfig& sc, SweepVariable v, const std::string& value) {
    const std::string what = std::string(to_string(v));
    switch (v) {
    case SweepVariable::Snr: sc.snr_db = parse_double(value, what); break;
    case SweepVariable::RfChains: sc.rf_chains = parse_int(value, what); break;
    case SweepVariable::Snapshots: sc.snapshots = parse_int(value, what); break;
    case SweepVariable::Paths: sc.paths = parse_int(value, what); break;
    case SweepVariable::RangeMaxFrac: sc.range_max_frac = parse_double(value, what); break;
    case SweepVariable::Elements: sc.array = ArrayConfig(sc.array.carrier(), parse_int(value, what)); break;
    case SweepVariable::SourceModel: sc.source = parse_source_model(value); break;
    case SweepVariable::TruthModel: sc.truth = parse_truth_model(value); break;
    }
}

void apply_variant(ClklConfig& cfg, Variant v) {
    switch (v) {
    case Variant::Full: break;
    case Variant::NoiseRefresh: cfg.noise_refresh_interval = 10; break;
    case Variant::SingleStart: cfg.starts = {false, false, true}; break;
    case Variant::NoScan: cfg.post_loop_scan = false; break;
    }
}

ClklConfig EstimatorSettings::clkl(const ScenarioConfig& sc, Variant v) const {
    ClklConfig cfg = ClklConfig::for_scenario(sc);
    cfg.angle_grid = angle_grid;
    cfg.scan_angles = scan_angles;
    cfg.scan_inv_ranges = scan_inv_ranges;
    cfg.sparsity = sparsity;
    cfg.max_iterations = max_iterations;
    cfg.rel_tolerance = rel_tolerance;
    cfg.ring_beta = ring_beta;
    cfg.scan_passes = scan_passes;
    cfg.scan_normalized = scan_angle_normalized;
    cfg.scan_range_normalized = scan_range_normalized;
    cfg.scan_refit = scan_refit;
    apply_variant(cfg, v);
    return cfg;
}

PolarDictionaryOptions EstimatorSettings::polar(const ScenarioConfig& sc) const {
    PolarDictionaryOptions opt;
    opt.angles = psomp_angle_factor * sc.array.elements();
    return opt;
}

void SweepSpec::validate() const {
    if (values.empty()) throw std::invalid_argument("sweep: no values");
    if (trials < 1) throw std::invalid_argument("sweep: need at least one trial");
    if (methods.empty()) throw std::invalid_argument("sweep: no methods");
    if (variants.empty()) throw std::invalid_argument("sweep: no variants");
    if (workers < 1) throw std::invalid_argument("sweep: need at least one worker");
    if (crb_trials < 0) throw std::invalid_argument("sweep: negative CRB trial count");
    for (const auto& v : values) {
        ScenarioConfig sc = base;
        apply_sweep_value(sc, variable, v);
        sc.validate();
        estimator.clkl(sc).validate();
    }
}

// ---------------------------------------------------------------------------
// sweep execution

namespace {

std::vector<GeoPoint> truth_points(const std::vector<PathParam>& paths) {
    std::vector<GeoPoint> g;
    for (const auto& p : paths) g.push_back({rad2deg(p.theta), p.range});
    return g;
}

std::vector<GeoPoint> estimate_points(const std::vector<PathEstimate>& paths) {
    std::vector<GeoPoint> g;
    for (const auto& p : paths) g.push_back({rad2deg(p.theta), p.range});
    return g;
}

void fill_metrics(TrialRecord& rec, const CMat& estimate, const Scene& scene, const std::vector<PathEstimate>& paths) {
    const TrialMetrics m = evaluate_trial(estimate, scene.channel, estimate_points(paths), truth_points(scene.paths));
    rec.nmse = m.nmse;
    rec.nmse_db = m.nmse_db;
    rec.rmse_theta_deg = m.rmse_theta_deg;
    rec.rmse_range = m.rmse_range;
    rec.failed = m.failed;
    rec.errors = match_paths(estimate_points(paths), truth_points(scene.paths)).errors;
}

struct ValueContext {
    ScenarioConfig scenario;
    std::optional<PolarDictionary> polar;
    std::optional<CMat> combiner;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<TrialRecord> run_job(const SweepSpec& spec, std::size_t vi, const ValueContext& ctx, int trial) {
    const ScenarioConfig& sc = ctx.scenario;
    const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(trial);

    std::vector<TrialRecord> recs;
    auto blank = [&](Method m, Variant v) {
        TrialRecord r;
        r.value_index = vi;
        r.value = spec.values[vi];
        r.trial = trial;
        r.seed = seed;
        r.method = m;
        r.variant = v;
        r.scenario = sc;
        return r;
    };
    for (Method m : spec.methods) {
        if (m == Method::Clkl)
            for (Variant v : spec.variants) recs.push_back(blank(m, v));
        else
            recs.push_back(blank(m, Variant::Full));
    }

    Scene scene;
    CompressedObservation obs;
    try {
        const SceneRng rng(seed);
        scene = ctx.combiner ? draw_scene(sc, rng, *ctx.combiner) : draw_scene(sc, rng);
        obs = whiten(scene.observation());
    } catch (const std::exception& e) {
        for (auto& r : recs) {
            r.failed = true;
            r.error = std::string("scene: ") + e.what();
        }
        return recs;
    }

    double crb_theta = std::numeric_limits<double>::quiet_NaN();
    double crb_range = crb_theta;
    if (trial < spec.crb_trials) {
        try {
            const CrbTrial t = crb_trial(sc.array, scene.combiner, scene.paths, scene.noise_power, sc.snapshots);
            crb_theta = t.sqrt_theta_deg;
            crb_range = t.sqrt_range;
        } catch (const std::exception&) {
            // bound left undefined for this trial
        }
    }

    for (auto& rec : recs) {
        rec.crb_theta_deg = crb_theta;
        rec.crb_range = crb_range;
        try {
            if (rec.method == Method::Clkl) {
                const ClklConfig cfg = spec.estimator.clkl(sc, rec.variant);
                const auto t0 = std::chrono::steady_clock::now();
                EstimateResult est = clkl_estimate(sc.array, obs, sc.paths, cfg);
                const double dt = seconds_since(t0);
                if (spec.timing) rec.runtime_s = dt;
                fill_metrics(rec, est.channel, scene, est.paths);
                rec.winning_start = est.winning_start;
                rec.iterations = est.iterations();
                rec.converged = est.converged();
                rec.noise_ratio = est.noise_estimate / scene.noise_power;
                if (spec.keep_traces && est.winner()) rec.trace = est.winner()->trace;
            } else {
                PsompOptions popt;
                popt.normalize_atoms = spec.estimator.psomp_normalize;
                const auto t0 = std::chrono::steady_clock::now();
                PsompResult est = psomp_estimate(sc.array, obs, sc.paths, *ctx.polar, sc.range_max(), popt);
                const double dt = seconds_since(t0);
                if (spec.timing) rec.runtime_s = dt;
                fill_metrics(rec, est.channel, scene, est.paths);
                rec.noise_ratio = est.noise_estimate / scene.noise_power;
            }
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.error = e.what();
        }
    }
    return recs;
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec) {
    spec.validate();
    const bool need_polar = std::find(spec.methods.begin(), spec.methods.end(), Method::Psomp) != spec.methods.end();

    std::vector<ValueContext> contexts;
    for (const auto& v : spec.values) {
        ValueContext ctx;
        ctx.scenario = spec.base;
        apply_sweep_value(ctx.scenario, spec.variable, v);
        if (need_polar) {
            const ClklConfig bounds = ClklConfig::for_scenario(ctx.scenario);
            ctx.polar = build_beam_depth_dictionary(ctx.scenario.array, bounds.inv_range_min, bounds.inv_range_max,
                                                    spec.estimator.polar(ctx.scenario));
        }
        if (spec.fixed_combiner) {
            auto w_rng = SceneRng(spec.seed).stream(SceneRng::Stream::Combiner);
            ctx.combiner = draw_combiner(ctx.scenario.array.elements(), ctx.scenario.rf_chains, w_rng);
        }
        contexts.push_back(std::move(ctx));
    }

    const std::size_t jobs = spec.values.size() * static_cast<std::size_t>(spec.trials);
    std::vector<std::vector<TrialRecord>> out(jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next.fetch_add(1); j < jobs; j = next.fetch_add(1)) {
            const std::size_t vi = j / static_cast<std::size_t>(spec.trials);
            const int trial = static_cast<int>(j % static_cast<std::size_t>(spec.trials));
            out[j] = run_job(spec, vi, contexts[vi], trial);
        }
    };
    const int n = std::min<int>(spec.workers, static_cast<int>(jobs));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    SweepResult res;
    res.spec = spec;
    for (std::size_t vi = 0; vi < contexts.size(); ++vi)
        if (contexts[vi].polar)
            res.polar.push_back({spec.values[vi], contexts[vi].polar->size(), contexts[vi].polar->max_adjacent_coherence,
                                 contexts[vi].polar->spacing_scale});
    for (auto& batch : out)
        for (auto& r : batch) res.records.push_back(std::move(r));
    res.summary = summarize(res.records);
    return res;
}

// ---------------------------------------------------------------------------
// aggregation

namespace {

double median_of(std::vector<double> v) { return nan_median(std::move(v)); }

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records) {
    struct Acc {
        SummaryRow row;
        double nmse_sum = 0.0;
        int ok = 0;
        int failures = 0;
        int converged = 0;
        std::vector<double> db, iters, ratio, runtime, crb_t, crb_r;
        RmsAccumulator th, rg;
    };
    std::vector<Acc> accs;
    std::map<std::tuple<std::size_t, int, int>, std::size_t> index;
    for (const auto& r : records) {
        const auto key = std::make_tuple(r.value_index, static_cast<int>(r.method), static_cast<int>(r.variant));
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, accs.size()).first;
            Acc a;
            a.row.value = r.value;
            a.row.method = r.method;
            a.row.variant = r.variant;
            accs.push_back(std::move(a));
        }
        Acc& a = accs[it->second];
        ++a.row.trials;
        a.crb_t.push_back(r.crb_theta_deg);
        a.crb_r.push_back(r.crb_range);
        if (!r.error.empty()) {
            ++a.row.errors;
            continue;
        }
        ++a.ok;
        a.nmse_sum += r.nmse;
        a.db.push_back(r.nmse_db);
        a.failures += r.failed ? 1 : 0;
        a.ratio.push_back(r.noise_ratio);
        a.runtime.push_back(r.runtime_s);
        for (const auto& e : r.errors) {
            a.th.add(e.dtheta_deg);
            a.rg.add(e.drange);
        }
        if (r.method == Method::Clkl) {
            a.converged += r.converged ? 1 : 0;
            a.iters.push_back(r.iterations);
            ++a.row.start_wins[r.winning_start];
        }
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<SummaryRow> rows;
    for (auto& a : accs) {
        SummaryRow& s = a.row;
        s.nmse_db_mean = a.ok ? nmse_db(a.nmse_sum / a.ok) : nan;
        s.nmse_db_median = median_of(a.db);
        s.rmse_theta_deg = a.th.value();
        s.rmse_range = a.rg.value();
        s.failure_rate = a.ok ? static_cast<double>(a.failures) / a.ok : nan;
        s.convergence_rate = (s.method == Method::Clkl && a.ok) ? static_cast<double>(a.converged) / a.ok : nan;
        s.median_iterations = median_of(a.iters);
        s.median_noise_ratio = median_of(a.ratio);
        s.median_runtime_s = median_of(a.runtime);
        s.crb_theta_deg = median_of(a.crb_t);
        s.crb_range = median_of(a.crb_r);
        rows.push_back(std::move(s));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// output

namespace {

std::string num(double v) {
    if (std::isnan(v)) return {};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string csv_text(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else if (ch == '\n' || ch == '\r') out += ' ';
        else out += ch;
    }
    return out + "\"";
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    return f;
}

}  // namespace

void write_csv(std::ostream& os, const SweepResult& result) {
    os << "# schema=" << kCsvSchema << "; input=whitened; nmse_db per trial; rmse columns are per-trial RMS over matched paths; "
          "summaries pool squared errors over paths and trials\n";
    {
        const EstimatorSettings& e = result.spec.estimator;
        os << "# clkl angle_grid=" << e.angle_grid << " scan_angles=" << e.scan_angles
           << " scan_inv_ranges=" << e.scan_inv_ranges << " sparsity=" << num(e.sparsity)
           << " max_iterations=" << e.max_iterations << " rel_tolerance=" << num(e.rel_tolerance)
           << " ring_beta=" << num(e.ring_beta) << " scan_passes=" << e.scan_passes
           << " scan_angle_normalized=" << e.scan_angle_normalized << " scan_range_normalized=" << e.scan_range_normalized
           << " scan_refit=" << e.scan_refit << '\n';
    }
    for (const auto& p : result.polar)
        os << "# psomp value=" << p.value << " atoms=" << p.atoms << " max_adjacent_coherence=" << num(p.max_adjacent_coherence)
           << " spacing_scale=" << num(p.spacing_scale) << " mmv=eig normalize=" << (result.spec.estimator.psomp_normalize ? 1 : 0)
           << '\n';
    os << "sweep,value,trial,seed,method,variant,m_elements,n_rf,n_snapshots,d,snr_db,range_max_frac,source_model,"
          "truth_model,fixed_combiner,nmse,nmse_db,rmse_theta_deg,rmse_range_m,failed,runtime_s,winning_start,"
          "iterations,converged,noise_ratio,crb_theta_deg,crb_range_m,error\n";
    const std::string sweep(to_string(result.spec.variable));
    for (const auto& r : result.records) {
        const ScenarioConfig& sc = r.scenario;
        const bool clkl = r.method == Method::Clkl && r.error.empty();
        os << sweep << ',' << csv_text(r.value) << ',' << r.trial << ',' << r.seed << ',' << to_string(r.method) << ','
           << to_string(r.variant) << ',' << sc.array.elements() << ',' << sc.rf_chains << ',' << sc.snapshots << ','
           << sc.paths << ',' << num(sc.snr_db) << ',' << num(sc.range_max_frac) << ',' << to_string(sc.source) << ','
           << to_string(sc.truth) << ',' << (result.spec.fixed_combiner ? 1 : 0) << ',' << num(r.nmse) << ','
           << num(r.nmse_db) << ',' << num(r.rmse_theta_deg) << ',' << num(r.rmse_range) << ',' << (r.failed ? 1 : 0)
           << ',' << num(r.runtime_s) << ',' << (clkl ? std::to_string(r.winning_start) : "") << ','
           << (clkl ? std::to_string(r.iterations) : "") << ',' << (clkl ? (r.converged ? "1" : "0") : "") << ','
           << num(r.noise_ratio) << ',' << num(r.crb_theta_deg) << ',' << num(r.crb_range) << ','
           << csv_text(r.error) << '\n';
    }
}

void write_csv(const std::string& path, const SweepResult& result) {
    auto f = open_out(path);
    write_csv(f, result);
}

void print_summary(std::ostream& os, const SweepResult& result) {
    const std::string sweep(to_string(result.spec.variable));
    os << std::left << std::setw(14) << sweep << std::setw(7) << "method" << std::setw(14) << "variant" << std::right
       << std::setw(6) << "n" << std::setw(10) << "NMSE dB" << std::setw(10) << "med dB" << std::setw(10) << "RMSE deg"
       << std::setw(10) << "RMSE m" << std::setw(8) << "fail %" << std::setw(8) << "conv %" << std::setw(7) << "iters"
       << std::setw(8) << "N0 rat" << std::setw(10) << "ms" << std::setw(10) << "CRB deg" << std::setw(9) << "CRB m"
       << '\n';
    auto f = [&](double v, int w, int prec) {
        if (std::isnan(v)) os << std::setw(w) << "-";
        else os << std::setw(w) << std::fixed << std::setprecision(prec) << v;
    };
    for (const auto& s : result.summary) {
        os << std::left << std::setw(14) << s.value << std::setw(7) << to_string(s.method) << std::setw(14)
           << to_string(s.variant) << std::right << std::setw(6) << s.trials - s.errors;
        f(s.nmse_db_mean, 10, 2);
        f(s.nmse_db_median, 10, 2);
        f(s.rmse_theta_deg, 10, 2);
        f(s.rmse_range, 10, 2);
        f(100.0 * s.failure_rate, 8, 1);
        f(100.0 * s.convergence_rate, 8, 1);
        f(s.median_iterations, 7, 0);
        f(s.median_noise_ratio, 8, 3);
        f(1e3 * s.median_runtime_s, 10, 1);
        f(s.crb_theta_deg, 10, 4);
        f(s.crb_range, 9, 3);
        os << '\n';
        if (s.errors > 0) os << "  (" << s.errors << " trials raised errors)\n";
    }
    os.unsetf(std::ios::floatfield);
}

// ---------------------------------------------------------------------------
// canned experiments

SweepSpec ablation_spec(SweepSpec base) {
    base.variable = SweepVariable::Snr;
    base.values = {"-5", "5", "15"};
    base.methods = {Method::Clkl};
    base.variants = {Variant::Full, Variant::NoiseRefresh, Variant::SingleStart, Variant::NoScan};
    return base;
}

SweepSpec convergence_spec(SweepSpec base) {
    base.variable = SweepVariable::Snr;
    base.values = {"-10", "0", "10", "20"};
    base.methods = {Method::Clkl};
    base.variants = {Variant::Full};
    base.keep_traces = true;
    return base;
}

void write_traces(std::ostream& os, const SweepResult& result) {
    os << "# schema=clkl-traces/1; delta = L(t) - L(1), t = 1 at p = 0\n";
    os << "snr_db,trial,iteration,objective,delta\n";
    for (const auto& r : result.records) {
        if (r.trace.empty()) continue;
        for (std::size_t t = 0; t < r.trace.size(); ++t)
            os << num(r.scenario.snr_db) << ',' << r.trial << ',' << t + 1 << ',' << num(r.trace[t]) << ','
               << num(r.trace[t] - r.trace.front()) << '\n';
    }
}

void write_traces(const std::string& path, const SweepResult& result) {
    auto f = open_out(path);
    write_traces(f, result);
}

SweepSpec runtime_spec(SweepSpec base) {
    base.variable = SweepVariable::Elements;
    base.values = {"32", "64", "128", "256"};
    base.variants = {Variant::Full};
    base.workers = 1;
    base.timing = true;
    return base;
}

std::vector<CrbReportRow> crb_report(const ScenarioConfig& sc, int trials, std::uint64_t seed, int max_paths) {
    std::vector<CrbReportRow> rows;
    for (int d = 1; d <= max_paths; ++d) {
        ScenarioConfig s = sc;
        s.paths = d;
        CrbReportRow row;
        row.paths = d;
        row.compressed = crb_sweep(s, {trials, seed, false});
        row.full_array = crb_sweep(s, {trials, seed, true});
        rows.push_back(std::move(row));
    }
    return rows;
}

void print_crb_report(std::ostream& os, const std::vector<CrbReportRow>& rows) {
    os << std::setw(3) << "d" << std::setw(14) << "sqrtCRB deg" << std::setw(12) << "sqrtCRB m" << std::setw(10)
       << "invalid" << std::setw(12) << "median cond" << std::setw(14) << "W=I deg" << std::setw(12) << "W=I m" << '\n';
    for (const auto& r : rows) {
        os << std::setw(3) << r.paths << std::setw(14) << std::setprecision(4) << std::fixed
           << r.compressed.median_theta_deg << std::setw(12) << std::setprecision(3) << r.compressed.median_range
           << std::setw(9) << std::setprecision(0) << 100.0 * r.compressed.invalid_rate() << '%' << std::setw(12)
           << std::setprecision(2) << std::scientific << r.compressed.median_condition << std::fixed << std::setw(14)
           << std::setprecision(4) << r.full_array.median_theta_deg << std::setw(12) << std::setprecision(3)
           << r.full_array.median_range << '\n';
    }
    os.unsetf(std::ios::floatfield);
}

void write_crb_csv(std::ostream& os, const std::vector<CrbReportRow>& rows) {
    os << "# schema=clkl-crb/1; medians over valid trials of the path-averaged sqrt CRB\n";
    os << "d,trials,invalid_trials,crb_theta_deg,crb_range_m,median_condition,full_crb_theta_deg,full_crb_range_m\n";
    for (const auto& r : rows)
        os << r.paths << ',' << r.compressed.trials << ',' << r.compressed.invalid_trials << ','
           << num(r.compressed.median_theta_deg) << ',' << num(r.compressed.median_range) << ','
           << num(r.compressed.median_condition) << ',' << num(r.full_array.median_theta_deg) << ','
           << num(r.full_array.median_range) << '\n';
}

// ---------------------------------------------------------------------------
// configuration file

ConfigMap parse_config(std::istream& is) {
    ConfigMap out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        if (!out.emplace(key, value).second)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return out;
}

ConfigMap read_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config '" + path + "'");
    return parse_config(f);
}

void apply_config(const ConfigMap& cfg, SweepSpec& spec) {
    ConfigMap rest = cfg;
    auto take = [&](const std::string& key) -> std::optional<std::string> {
        auto it = rest.find(key);
        if (it == rest.end()) return std::nullopt;
        std::string v = it->second;
        rest.erase(it);
        return v;
    };
    auto pair_of = [](const std::string& s, const std::string& what) {
        const auto parts = split_list(s);
        if (parts.size() != 2) throw std::invalid_argument(what + ": expected two values");
        return std::make_pair(parse_double(parts[0], what), parse_double(parts[1], what));
    };

    ScenarioConfig& sc = spec.base;
    double carrier = sc.array.carrier();
    int elements = sc.array.elements();
    if (auto v = take("carrier")) carrier = parse_double(*v, "carrier");
    if (auto v = take("array")) elements = parse_int(*v, "array");
    sc.array = ArrayConfig(carrier, elements);
    if (auto v = take("rf_chains")) sc.rf_chains = parse_int(*v, "rf_chains");
    if (auto v = take("snapshots")) sc.snapshots = parse_int(*v, "snapshots");
    if (auto v = take("paths")) sc.paths = parse_int(*v, "paths");
    if (auto v = take("snr")) sc.snr_db = parse_double(*v, "snr");
    if (auto v = take("angle_support")) std::tie(sc.theta_min_deg, sc.theta_max_deg) = pair_of(*v, "angle_support");
    if (auto v = take("range_support")) std::tie(sc.range_min_frac, sc.range_max_frac) = pair_of(*v, "range_support");
    if (auto v = take("pilot_distribution")) sc.source = parse_source_model(*v);
    if (auto v = take("truth_model")) sc.truth = parse_truth_model(*v);
    if (auto v = take("trials")) spec.trials = parse_int(*v, "trials");

    if (auto v = take("sweep")) {
        spec.variable = parse_sweep_variable(*v);
        spec.values = default_sweep_values(spec.variable);
    }
    const auto snr_sweep = take("snr_sweep");
    if (snr_sweep && spec.variable == SweepVariable::Snr) spec.values = split_list(*snr_sweep);
    if (auto v = take("values")) spec.values = split_list(*v);
    if (auto v = take("methods")) {
        spec.methods.clear();
        for (const auto& m : split_list(*v)) spec.methods.push_back(parse_method(m));
    }
    if (auto v = take("variants")) {
        spec.variants.clear();
        for (const auto& m : split_list(*v)) spec.variants.push_back(parse_variant(m));
    }
    if (auto v = take("seed")) {
        try {
            spec.seed = std::stoull(*v);
        } catch (const std::exception&) {
            throw std::invalid_argument("seed: '" + *v + "' is not an unsigned integer");
        }
    }
    if (auto v = take("fixed_combiner")) spec.fixed_combiner = parse_bool(*v, "fixed_combiner");
    if (auto v = take("workers")) spec.workers = parse_int(*v, "workers");
    if (auto v = take("timing")) spec.timing = parse_bool(*v, "timing");
    if (auto v = take("crb_trials")) spec.crb_trials = parse_int(*v, "crb_trials");

    EstimatorSettings& e = spec.estimator;
    if (auto v = take("angle_grid")) e.angle_grid = parse_int(*v, "angle_grid");
    if (auto v = take("scan_angles")) e.scan_angles = parse_int(*v, "scan_angles");
    if (auto v = take("scan_inv_ranges")) e.scan_inv_ranges = parse_int(*v, "scan_inv_ranges");
    if (auto v = take("sparsity")) e.sparsity = parse_double(*v, "sparsity");
    if (auto v = take("max_iterations")) e.max_iterations = parse_int(*v, "max_iterations");
    if (auto v = take("rel_tolerance")) e.rel_tolerance = parse_double(*v, "rel_tolerance");
    if (auto v = take("ring_beta")) e.ring_beta = parse_double(*v, "ring_beta");
    if (auto v = take("scan_passes")) e.scan_passes = parse_int(*v, "scan_passes");
    if (auto v = take("scan_angle_normalized")) e.scan_angle_normalized = parse_bool(*v, "scan_angle_normalized");
    if (auto v = take("scan_range_normalized")) e.scan_range_normalized = parse_bool(*v, "scan_range_normalized");
    if (auto v = take("scan_refit")) e.scan_refit = parse_bool(*v, "scan_refit");
    if (auto v = take("psomp_angle_factor")) e.psomp_angle_factor = parse_int(*v, "psomp_angle_factor");
    if (auto v = take("psomp_normalize")) e.psomp_normalize = parse_bool(*v, "psomp_normalize");

    if (!rest.empty()) throw std::invalid_argument("config: unknown key '" + rest.begin()->first + "'");
}

}  // namespace clkl
