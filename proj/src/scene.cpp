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

#include "clkl/scene.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace clkl {

std::string_view to_string(SourceModel m) { return m == SourceModel::Qpsk ? "qpsk" : "gaussian"; }
std::string_view to_string(TruthModel m) { return m == TruthModel::Fresnel ? "fresnel" : "usw"; }

SourceModel parse_source_model(std::string_view s) {
    if (s == "gaussian") return SourceModel::Gaussian;
    if (s == "qpsk") return SourceModel::Qpsk;
    throw std::invalid_argument("unknown source model '" + std::string(s) + "'");
}

TruthModel parse_truth_model(std::string_view s) {
    if (s == "usw") return TruthModel::Usw;
    if (s == "fresnel") return TruthModel::Fresnel;
    throw std::invalid_argument("unknown truth model '" + std::string(s) + "'");
}

void ScenarioConfig::validate() const {
    if (paths < 1) throw std::invalid_argument("scenario: need at least one path");
    if (rf_chains < 1 || rf_chains > array.elements())
        throw std::invalid_argument("scenario: RF chains must lie in [1, M]");
    if (snapshots < 1) throw std::invalid_argument("scenario: need at least one snapshot");
    if (!(theta_max_deg > theta_min_deg)) throw std::invalid_argument("scenario: empty angle support");
    if (!(range_min_frac > 0.0) || !(range_max_frac > range_min_frac))
        throw std::invalid_argument("scenario: empty range support");
}

std::mt19937_64 SceneRng::stream(Stream id) const {
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(id)};
    return std::mt19937_64(seq);
}

double snr_to_noise(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

std::vector<PathParam> draw_paths(const ScenarioConfig& sc, std::mt19937_64& rng) {
    sc.validate();
    std::uniform_real_distribution<double> angle(deg2rad(sc.theta_min_deg), deg2rad(sc.theta_max_deg));
    std::uniform_real_distribution<double> range(sc.range_min(), sc.range_max());
    std::vector<PathParam> paths(sc.paths);
    for (auto& p : paths) {
        p.theta = angle(rng);
        p.range = range(rng);
        p.power = 1.0 / sc.paths;
    }
    return paths;
}

CMat draw_combiner(int elements, int rf_chains, std::mt19937_64& rng) {
    if (rf_chains > elements) throw std::invalid_argument("draw_combiner: N_RF exceeds M");
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    const double scale = 1.0 / std::sqrt(static_cast<double>(elements));
    CMat w(elements, rf_chains);
    for (Eigen::Index k = 0; k < w.cols(); ++k)
        for (Eigen::Index m = 0; m < w.rows(); ++m) w(m, k) = std::polar(scale, phase(rng));
    return w;
}

CMat draw_sources(SourceModel model, int snapshots, const std::vector<double>& powers, std::mt19937_64& rng) {
    CMat s(static_cast<Eigen::Index>(powers.size()), snapshots);
    for (std::size_t l = 0; l < powers.size(); ++l) {
        if (powers[l] < 0.0) throw std::invalid_argument("draw_sources: negative power");
        const double amp = std::sqrt(powers[l]);
        const auto row = static_cast<Eigen::Index>(l);
        switch (model) {
        case SourceModel::Gaussian: {
            std::normal_distribution<double> g(0.0, std::sqrt(0.5));
            for (int n = 0; n < snapshots; ++n) {
                const double re = g(rng);
                const double im = g(rng);
                s(row, n) = amp * cplx(re, im);
            }
            break;
        }
        case SourceModel::Qpsk: {
            std::uniform_int_distribution<int> sym(0, 3);
            for (int n = 0; n < snapshots; ++n) s(row, n) = std::polar(amp, kPi * (2 * sym(rng) + 1) / 4.0);
            break;
        }
        }
    }
    return s;
}

CMat steering_matrix(const ArrayConfig& cfg, const std::vector<PathParam>& paths, TruthModel model) {
    CMat a(cfg.elements(), static_cast<Eigen::Index>(paths.size()));
    for (std::size_t l = 0; l < paths.size(); ++l) {
        const auto col = static_cast<Eigen::Index>(l);
        a.col(col) = model == TruthModel::Usw ? steering_usw(cfg, paths[l].theta, paths[l].range)
                                              : steering_fresnel(cfg, paths[l].theta, paths[l].range);
    }
    return a;
}

CMat sample_covariance(const CMat& snapshots) {
    CMat r = snapshots * snapshots.adjoint() / static_cast<double>(snapshots.cols());
    return 0.5 * (r + r.adjoint());
}

namespace {

Scene assemble(const ScenarioConfig& sc, const SceneRng& rng, CMat combiner) {
    Scene scene;
    auto path_rng = rng.stream(SceneRng::Stream::Paths);
    scene.paths = draw_paths(sc, path_rng);
    scene.noise_power = snr_to_noise(sc.snr_db);
    scene.combiner = std::move(combiner);

    std::vector<double> powers;
    powers.reserve(scene.paths.size());
    for (const auto& p : scene.paths) powers.push_back(p.power);
    auto src_rng = rng.stream(SceneRng::Stream::Sources);
    scene.sources = draw_sources(sc.source, sc.snapshots, powers, src_rng);

    scene.channel = steering_matrix(sc.array, scene.paths, sc.truth) * scene.sources;

    CMat noise = CMat::Zero(sc.array.elements(), sc.snapshots);
    if (scene.noise_power > 0.0) {
        auto noise_rng = rng.stream(SceneRng::Stream::Noise);
        std::normal_distribution<double> g(0.0, std::sqrt(0.5 * scene.noise_power));
        for (Eigen::Index n = 0; n < noise.cols(); ++n)
            for (Eigen::Index m = 0; m < noise.rows(); ++m) {
                const double re = g(noise_rng);
                const double im = g(noise_rng);
                noise(m, n) = cplx(re, im);
            }
    }
    scene.full = scene.channel + noise;
    scene.compressed = scene.combiner.adjoint() * scene.full;
    scene.covariance = sample_covariance(scene.compressed);
    return scene;
}

}  // namespace

Scene draw_scene(const ScenarioConfig& sc, const SceneRng& rng) {
    sc.validate();
    auto w_rng = rng.stream(SceneRng::Stream::Combiner);
    return assemble(sc, rng, draw_combiner(sc.array.elements(), sc.rf_chains, w_rng));
}

Scene draw_scene(const ScenarioConfig& sc, const SceneRng& rng, const CMat& fixed_combiner) {
    sc.validate();
    if (fixed_combiner.rows() != sc.array.elements() || fixed_combiner.cols() != sc.rf_chains)
        throw std::invalid_argument("draw_scene: combiner shape does not match scenario");
    return assemble(sc, rng, fixed_combiner);
}

CompressedObservation whiten(const CompressedObservation& obs) {
    const CMat gram = obs.combiner.adjoint() * obs.combiner;
    Eigen::SelfAdjointEigenSolver<CMat> eig(0.5 * (gram + gram.adjoint()));
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 1e-12 * eig.eigenvalues().maxCoeff())
        throw std::runtime_error("whiten: combiner Gram matrix is singular");
    const CMat inv_sqrt = eig.operatorInverseSqrt();
    CompressedObservation out;
    out.combiner = obs.combiner * inv_sqrt;
    out.snapshots = inv_sqrt * obs.snapshots;
    out.covariance = sample_covariance(out.snapshots);
    out.whitened = true;
    return out;
}

}  // namespace clkl
