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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include "clkl/harness.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace clkl;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Summary of the records of one cell restricted to the first `max_trials` trials.
SummaryRow cell(const SweepResult& res, const std::string& value, Method m, Variant v = Variant::Full,
                int max_trials = 1 << 30) {
    std::vector<TrialRecord> sel;
    for (const auto& r : res.records)
        if (r.value == value && r.method == m && r.variant == v && r.trial < max_trials) sel.push_back(r);
    const auto rows = summarize(sel);
    if (rows.size() != 1) throw std::runtime_error("no records for cell " + value);
    return rows.front();
}

SweepSpec base_spec(int trials) {
    SweepSpec s;
    s.trials = trials;
    s.workers = 1;
    return s;
}

// --- shared Monte Carlo runs ---------------------------------------------

struct Runs {
    SweepResult gauss;       // SNR -5..10, both methods, 200 trials
    SweepResult qpsk;        // SNR 0, 10, CL-KL, 200 trials
    SweepResult noise_conv;  // SNR -10..20, CL-KL, 100 trials
    SweepResult ablation;    // 50 trials
    SweepResult runtime;     // M = 64, 256
};

SweepResult timed_run(const char* name, const SweepSpec& spec) {
    const auto t0 = std::chrono::steady_clock::now();
    SweepResult r = run_sweep(spec);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "  [" << name << "] " << r.records.size() << " records in " << fmt("%.1f", s) << " s\n";
    return r;
}

// --- criteria --------------------------------------------------------------

Outcome nmse_anchors(const Runs& r) {
    const struct {
        const char* snr;
        double target;
    } anchors[] = {{"-5", 2.06}, {"0", -1.02}, {"10", -5.16}};
    Outcome o{true, {}};
    for (const auto& a : anchors) {
        const double v = cell(r.gauss, a.snr, Method::Clkl, Variant::Full, 100).nmse_db_mean;
        const bool ok = std::abs(v - a.target) <= 1.0;
        o.pass = o.pass && ok;
        o.detail += std::string(a.snr) + " dB: " + fmt("%.2f", v) + " (target " + fmt("%.2f", a.target) + " +-1) ";
    }
    return o;
}

Outcome ordering(const Runs& r) {
    Outcome o{true, {}};
    for (const char* snr : {"0", "5", "10"}) {
        const double c = cell(r.gauss, snr, Method::Clkl).nmse_db_mean;
        const double p = cell(r.gauss, snr, Method::Psomp).nmse_db_mean;
        o.pass = o.pass && c <= p;
        o.detail += std::string(snr) + " dB: clkl " + fmt("%.2f", c) + " vs psomp " + fmt("%.2f", p) + "; ";
    }
    return o;
}

Outcome psomp_anchor(const Runs& r) {
    const double v = cell(r.gauss, "10", Method::Psomp, Variant::Full, 100).nmse_db_mean;
    return {std::abs(v - (-4.06)) <= 1.5, "+10 dB: " + fmt("%.2f", v) + " (target -4.06 +-1.5)"};
}

Outcome crb_reference(std::vector<CrbSummary>& by_d) {
    ScenarioConfig sc;
    sc.snr_db = 10.0;
    by_d.clear();
    for (int d = 1; d <= 4; ++d) {
        sc.paths = d;
        by_d.push_back(crb_sweep(sc, {50, 42, false}));
    }
    const CrbSummary& d3 = by_d[2];
    const bool th = std::abs(d3.median_theta_deg / 0.044 - 1.0) <= 0.3;
    const bool rg = std::abs(d3.median_range / 4.32 - 1.0) <= 0.3;
    const bool mono = by_d[0].median_theta_deg < by_d[1].median_theta_deg &&
                      by_d[1].median_theta_deg < by_d[2].median_theta_deg &&
                      by_d[0].median_range < by_d[1].median_range && by_d[1].median_range < by_d[2].median_range;
    std::string det = "d=3: " + fmt("%.4f", d3.median_theta_deg) + " deg, " + fmt("%.2f", d3.median_range) +
                      " m; d=1..3 deg";
    for (int d = 0; d < 3; ++d) det += " " + fmt("%.4f", by_d[d].median_theta_deg);
    det += ", m";
    for (int d = 0; d < 3; ++d) det += " " + fmt("%.2f", by_d[d].median_range);
    return {th && rg && mono, det};
}

Outcome noise_quality(const Runs& r) {
    Outcome o{true, {}};
    for (const char* snr : {"-10", "0", "10", "20"}) {
        const double v = cell(r.noise_conv, snr, Method::Clkl).median_noise_ratio;
        o.pass = o.pass && v >= 0.75 && v <= 1.0;
        o.detail += std::string(snr) + " dB: " + fmt("%.3f", v) + "; ";
    }
    return o;
}

Outcome qpsk_robustness(const Runs& r) {
    Outcome o{true, {}};
    for (const char* snr : {"0", "10"}) {
        const double g = cell(r.gauss, snr, Method::Clkl).nmse_db_mean;
        const double q = cell(r.qpsk, snr, Method::Clkl).nmse_db_mean;
        o.pass = o.pass && std::abs(q - g) <= 0.9;
        o.detail += std::string(snr) + " dB: |" + fmt("%.2f", q) + " - " + fmt("%.2f", g) + "| = " +
                    fmt("%.2f", std::abs(q - g)) + "; ";
    }
    return o;
}

Outcome ablation(const Runs& r) {
    const SummaryRow full5 = cell(r.ablation, "5", Method::Clkl, Variant::Full);
    const SummaryRow noscan5 = cell(r.ablation, "5", Method::Clkl, Variant::NoScan);
    const SummaryRow full15 = cell(r.ablation, "15", Method::Clkl, Variant::Full);
    const SummaryRow noscan15 = cell(r.ablation, "15", Method::Clkl, Variant::NoScan);
    const double dr = noscan5.rmse_range - full5.rmse_range;
    const double dn = noscan15.nmse_db_mean - full15.nmse_db_mean;
    const bool a = dr >= 5.0;
    const bool b = dn >= 1.0;
    return {a && b, std::string("range RMSE +5 dB: ") + fmt("%.2f", noscan5.rmse_range) + " vs " +
                        fmt("%.2f", full5.rmse_range) + " m (delta " + fmt("%.2f", dr) + ", need >= 5) " +
                        (a ? "ok" : "MISS") + "; NMSE +15 dB: " + fmt("%.2f", noscan15.nmse_db_mean) + " vs " +
                        fmt("%.2f", full15.nmse_db_mean) + " dB (delta " + fmt("%.2f", dn) + ", need >= 1) " +
                        (b ? "ok" : "MISS")};
}

Outcome runtime_scaling(const Runs& r) {
    const double t64 = cell(r.runtime, "64", Method::Clkl).median_runtime_s;
    const double t256 = cell(r.runtime, "256", Method::Clkl).median_runtime_s;
    return {t256 <= 2.0 * t64, "median " + fmt("%.1f", 1e3 * t64) + " ms at M=64, " + fmt("%.1f", 1e3 * t256) +
                                   " ms at M=256, ratio " + fmt("%.2f", t256 / t64)};
}

Outcome convergence(const Runs& r) {
    const SummaryRow lo = cell(r.noise_conv, "-10", Method::Clkl, Variant::Full, 50);
    const SummaryRow hi = cell(r.noise_conv, "10", Method::Clkl, Variant::Full, 50);
    const bool a = lo.convergence_rate == 1.0;
    const bool b = hi.convergence_rate < 0.6;
    const bool c = lo.median_iterations <= 20.0;
    return {a && b && c, "-10 dB: " + fmt("%.0f", 100 * lo.convergence_rate) + "% converged " + (a ? "ok" : "MISS") +
                             ", median iterations " + fmt("%.0f", lo.median_iterations) + (c ? " ok" : " MISS") +
                             "; +10 dB: " + fmt("%.0f", 100 * hi.convergence_rate) + "% converged (need < 60%) " +
                             (b ? "ok" : "MISS")};
}

AngleDictionary random_dictionary(std::mt19937_64& rng, int atoms = 12) {
    const ArrayConfig array;
    std::mt19937_64 wr(rng());
    const CMat w = whiten({draw_combiner(64, 8, wr), CMat::Zero(8, 1), CMat::Zero(8, 8), false}).combiner;
    std::uniform_real_distribution<double> u(0.05, 0.9);
    RVec inv(atoms);
    for (int i = 0; i < atoms; ++i) inv[i] = u(rng);
    return AngleDictionary(array, w, cosine_angle_grid(atoms, 20.0, 60.0), inv);
}

CMat random_hpd(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    CMat a(n, 2 * n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = cplx(g(rng), g(rng));
    return a * a.adjoint() / (2.0 * n) + 0.1 * CMat::Identity(n, n);
}

Outcome gradient_oracles() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    double worst_p = 0.0, worst_u = 0.0, worst_r = 0.0;
    const double h = 1e-6;
    for (int state = 0; state < 20; ++state) {
        AngleDictionary dict = random_dictionary(rng);
        const CMat rhat = random_hpd(8, rng);
        const double n0 = u(rng);
        RVec p(dict.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = u(rng);

        const RVec g = power_gradient(p, dict, n0, rhat, 1e-3);
        const RVec gu = inv_range_gradient(p, dict, n0, rhat);
        RVec fd(p.size()), fdu(p.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            RVec a = p, b = p;
            a[i] += h;
            b[i] -= h;
            fd[i] = (kl_objective(a, dict, n0, rhat, 1e-3) - kl_objective(b, dict, n0, rhat, 1e-3)) / (2 * h);
            const double th = dict.thetas()[i];
            const double ui = dict.inv_ranges()[i];
            dict.set_atom(i, th, ui + h);
            const double lp = kl_objective(p, dict, n0, rhat, 0.0);
            dict.set_atom(i, th, ui - h);
            const double lm = kl_objective(p, dict, n0, rhat, 0.0);
            dict.set_atom(i, th, ui);
            fdu[i] = (lp - lm) / (2 * h);
        }
        worst_p = std::max(worst_p, (fd - g).cwiseAbs().maxCoeff() / g.cwiseAbs().maxCoeff());
        worst_u = std::max(worst_u, (fdu - gu).cwiseAbs().maxCoeff() / gu.cwiseAbs().maxCoeff());

        ScenarioConfig sc;
        const SceneRng srng(5000 + static_cast<std::uint64_t>(state));
        auto pr = srng.stream(SceneRng::Stream::Paths);
        auto wr = srng.stream(SceneRng::Stream::Combiner);
        const CMat w = draw_combiner(64, 8, wr);
        const CovarianceParams cp = CovarianceParams::from_paths(sc.array, draw_paths(sc, pr), u(rng));
        const std::vector<CMat> dr = covariance_derivatives(sc.array, w, cp);
        const RVec eta = cp.packed();
        for (std::size_t i = 0; i < dr.size(); ++i) {
            const auto idx = static_cast<Eigen::Index>(i);
            const double step = 1e-6 * std::max(std::abs(eta[idx]), 1e-2);
            RVec a = eta, b = eta;
            a[idx] += step;
            b[idx] -= step;
            const CMat num = (compressed_model_covariance(sc.array, w, CovarianceParams::unpack(a, cp.paths())) -
                              compressed_model_covariance(sc.array, w, CovarianceParams::unpack(b, cp.paths()))) /
                             (2 * step);
            worst_r = std::max(worst_r, (num - dr[i]).norm() / dr[i].norm());
        }
    }
    const double worst = std::max({worst_p, worst_u, worst_r});
    return {worst <= 1e-5, "max rel err: power " + fmt("%.1e", worst_p) + ", inverse range " + fmt("%.1e", worst_u) +
                               ", covariance derivatives " + fmt("%.1e", worst_r)};
}

Outcome monotone_descent() {
    int traces = 0, violations = 0;
    for (double snr : {-10.0, 0.0, 10.0, 20.0})
        for (int trial = 0; trial < 50; ++trial) {
            ScenarioConfig sc;
            sc.snr_db = snr;
            const Scene scene = draw_scene(sc, SceneRng(7000 + static_cast<std::uint64_t>(trial)));
            const EstimateResult est =
                clkl_estimate(sc.array, whiten(scene.observation()), sc.paths, ClklConfig::for_scenario(sc));
            for (const auto& s : est.starts) {
                ++traces;
                for (std::size_t t = 1; t < s.trace.size(); ++t)
                    if (s.trace[t] > s.trace[t - 1] + 1e-12 * std::abs(s.trace[t - 1])) ++violations;
            }
        }
    return {violations == 0 && traces > 0, std::to_string(traces) + " traces, " + std::to_string(violations) +
                                                " increasing steps"};
}

double fresnel_correlation(const ArrayConfig& cfg, double theta, double r) {
    return std::abs(steering_usw(cfg, theta, r).dot(steering_fresnel(cfg, theta, r))) / cfg.elements();
}

Outcome manifold_invariants() {
    const ArrayConfig cfg;
    double worst_mod = 0.0;
    for (double th_deg : {5.0, 30.0, 60.0, 90.0, 120.0})
        for (double r : {0.5, 1.6, 21.25, 1e4}) {
            const CVec a = steering_usw(cfg, deg2rad(th_deg), r);
            worst_mod = std::max(worst_mod, (a.cwiseAbs().array() - 1.0).abs().maxCoeff());
        }
    double worst_far = 0.0;
    for (double th_deg : {10.0, 45.0, 90.0, 150.0}) {
        const double th = deg2rad(th_deg);
        CVec plane(64);
        for (Eigen::Index m = 0; m < 64; ++m) plane[m] = std::polar(1.0, cfg.spatial_frequency(th) * cfg.centred()[m]);
        worst_far = std::max(worst_far, (steering_usw(cfg, th, 1e9) - plane).cwiseAbs().maxCoeff());
    }
    bool mono = true;
    for (double th_deg : {20.0, 40.0, 60.0}) {
        double prev = -1.0;
        for (int k = 0; k < 20; ++k) {
            const double rho = fresnel_correlation(cfg, deg2rad(th_deg), cfg.rayleigh_distance() * (0.05 + 0.25 * k));
            mono = mono && rho >= prev - 1e-12;
            prev = rho;
        }
    }
    const double e30 = ebrd(cfg, deg2rad(30.0));
    const bool ok = worst_mod < 1e-12 && worst_far < 1e-6 && mono && std::abs(e30 / 1.60 - 1.0) <= 0.01;
    return {ok, "max |1-|a|| " + fmt("%.1e", worst_mod) + ", far-field gap " + fmt("%.1e", worst_far) +
                    ", correlation monotone " + (mono ? "yes" : "no") + ", EBRD(30 deg) " + fmt("%.4f", e30) + " m"};
}

Outcome hungarian() {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> angle(20.0, 60.0), range(1.0, 21.0);
    std::uniform_int_distribution<int> size(1, 4);
    int mismatches = 0;
    for (int c = 0; c < 1000; ++c) {
        const int d = size(rng);
        std::vector<GeoPoint> est(d), truth(d);
        for (int i = 0; i < d; ++i) {
            est[i] = {angle(rng), range(rng)};
            truth[i] = {angle(rng), range(rng)};
        }
        const double got = match_paths(est, truth).cost;
        std::vector<int> perm(d);
        std::iota(perm.begin(), perm.end(), 0);
        double best = 1e300;
        do {
            double s = 0.0;
            for (int i = 0; i < d; ++i) s += matching_cost(est[i], truth[perm[i]]);
            best = std::min(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        if (std::abs(got - best) > 1e-9 * std::max(1.0, best)) ++mismatches;
    }
    return {mismatches == 0, "1000 instances, " + std::to_string(mismatches) + " mismatches"};
}

Outcome identifiability(const std::vector<CrbSummary>& by_d) {
    const double r3 = by_d[2].invalid_rate();
    const double r4 = by_d[3].invalid_rate();
    const int dmax = max_identifiable_paths(8);
    return {r4 > r3 && dmax == 3, "invalid rate d=3 " + fmt("%.0f", 100 * r3) + "%, d=4 " + fmt("%.0f", 100 * r4) +
                                      "%; max paths for 8 chains = " + std::to_string(dmax)};
}

Outcome determinism() {
    SweepSpec s;
    s.values = {"0", "10"};
    s.trials = 3;
    auto csv = [](const SweepSpec& spec) {
        std::ostringstream os;
        write_csv(os, run_sweep(spec));
        return os.str();
    };
    const std::string a = csv(s);
    const std::string b = csv(s);
    s.workers = 3;
    const std::string c = csv(s);
    return {a == b && a == c, std::to_string(a.size()) + " bytes; rerun " + (a == b ? "identical" : "DIFFERS") +
                                  ", 3 workers " + (a == c ? "identical" : "DIFFERS")};
}

}  // namespace

int main() {
    std::cerr << "running Monte Carlo sweeps\n";
    Runs runs;
    {
        SweepSpec s = base_spec(200);
        s.values = {"-5", "0", "5", "10"};
        runs.gauss = timed_run("gaussian", s);
    }
    {
        SweepSpec s = base_spec(200);
        s.values = {"0", "10"};
        s.methods = {Method::Clkl};
        s.base.source = SourceModel::Qpsk;
        runs.qpsk = timed_run("qpsk", s);
    }
    {
        SweepSpec s = base_spec(100);
        s.values = {"-10", "0", "10", "20"};
        s.methods = {Method::Clkl};
        runs.noise_conv = timed_run("noise/convergence", s);
    }
    runs.ablation = timed_run("ablation", ablation_spec(base_spec(50)));
    {
        SweepSpec s = runtime_spec(base_spec(20));
        s.values = {"64", "256"};
        s.methods = {Method::Clkl};
        runs.runtime = timed_run("runtime", s);
    }

    std::vector<CrbSummary> crb_by_d;
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"CL-KL NMSE vs SNR", [&] { return nmse_anchors(runs); }},
        {"CL-KL not worse than P-SOMP", [&] { return ordering(runs); }},
        {"P-SOMP NMSE at +10 dB", [&] { return psomp_anchor(runs); }},
        {"bound reference values", [&] { return crb_reference(crb_by_d); }},
        {"frozen noise estimate", [&] { return noise_quality(runs); }},
        {"QPSK robustness", [&] { return qpsk_robustness(runs); }},
        {"ablation directionality", [&] { return ablation(runs); }},
        {"runtime scaling", [&] { return runtime_scaling(runs); }},
        {"convergence statistics", [&] { return convergence(runs); }},
        {"gradient oracles", [] { return gradient_oracles(); }},
        {"monotone descent", [] { return monotone_descent(); }},
        {"manifold invariants", [] { return manifold_invariants(); }},
        {"assignment vs brute force", [] { return hungarian(); }},
        {"identifiability", [&] { return identifiability(crb_by_d); }},
        {"determinism", [] { return determinism(); }},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first
                  << "): " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed\n";
    return failures == 0 ? 0 : 1;
}
