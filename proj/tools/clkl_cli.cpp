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

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct CommonOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> mc;
    bool full = false;
    int workers = 1;
    bool fixed_combiner = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "output CSV path");
    cmd->add_option("--seed", o.seed, "base seed, trial k uses seed + k");
    cmd->add_option("--mc", o.mc, "Monte Carlo trials per point")->check(CLI::PositiveNumber);
    cmd->add_flag("--full", o.full, "publication trial count (400)");
    cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--fixed-combiner", o.fixed_combiner, "draw one combiner per sweep point");
}

// Precedence: built-in default < config file < command line.
clkl::SweepSpec make_spec(const CommonOptions& o, int default_trials) {
    clkl::SweepSpec spec;
    spec.trials = default_trials;
    if (!o.config.empty()) clkl::apply_config(clkl::read_config(o.config), spec);
    if (o.full) spec.trials = 400;
    if (o.mc) spec.trials = *o.mc;
    if (o.seed) spec.seed = *o.seed;
    if (o.workers > 1) spec.workers = o.workers;
    if (o.fixed_combiner) spec.fixed_combiner = true;
    return spec;
}

void emit_csv(const CommonOptions& o, const clkl::SweepResult& res) {
    if (o.out.empty()) return;
    clkl::write_csv(o.out, res);
    std::cout << "wrote " << res.records.size() << " records to " << o.out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"clkl: covariance-domain near-field channel estimation experiments"};
    app.require_subcommand(1);

    CommonOptions sweep_o, abl_o, conv_o, rt_o, crb_o;
    std::string traces_out;

    auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep of one scenario variable");
    add_common(sweep, sweep_o);
    auto* ablation = app.add_subcommand("ablation", "CL-KL ablation arms at SNR -5, +5, +15 dB");
    add_common(ablation, abl_o);
    auto* converge = app.add_subcommand("converge", "power-loop convergence diagnostic");
    add_common(converge, conv_o);
    converge->add_option("--traces", traces_out, "per-iteration objective traces CSV");
    auto* runtime = app.add_subcommand("runtime", "per-trial runtime versus array size (single worker)");
    add_common(runtime, rt_o);
    auto* crb = app.add_subcommand("crb", "compressed-domain CRB versus path count");
    add_common(crb, crb_o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed()) {
            const auto res = clkl::run_sweep(make_spec(sweep_o, 100));
            clkl::print_summary(std::cout, res);
            emit_csv(sweep_o, res);
        } else if (ablation->parsed()) {
            const auto res = clkl::run_sweep(clkl::ablation_spec(make_spec(abl_o, 50)));
            clkl::print_summary(std::cout, res);
            emit_csv(abl_o, res);
        } else if (converge->parsed()) {
            const auto res = clkl::run_sweep(clkl::convergence_spec(make_spec(conv_o, 50)));
            clkl::print_summary(std::cout, res);
            emit_csv(conv_o, res);
            if (!traces_out.empty()) {
                clkl::write_traces(traces_out, res);
                std::cout << "wrote traces to " << traces_out << '\n';
            }
        } else if (runtime->parsed()) {
            if (rt_o.workers > 1) std::cerr << "runtime: timing runs on one worker, --workers ignored\n";
            const auto res = clkl::run_sweep(clkl::runtime_spec(make_spec(rt_o, 50)));
            clkl::print_summary(std::cout, res);
            emit_csv(rt_o, res);
        } else if (crb->parsed()) {
            const clkl::SweepSpec spec = make_spec(crb_o, 50);
            const auto rows = clkl::crb_report(spec.base, std::min(spec.trials, 50), spec.seed);
            clkl::print_crb_report(std::cout, rows);
            if (!crb_o.out.empty()) {
                std::ofstream f(crb_o.out, std::ios::binary);
                if (!f) throw std::runtime_error("cannot open '" + crb_o.out + "' for writing");
                clkl::write_crb_csv(f, rows);
                std::cout << "wrote " << crb_o.out << '\n';
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
