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

#include "clkl/estimator.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

namespace clkl {

namespace {

constexpr double kNoiseFloor = 1e-12;

// Cholesky of the model covariance plus the pieces the objective and the
// gradient share.
class KlFactor {
public:
    KlFactor(const CMat& model) : llt_(model) {
        if (llt_.info() != Eigen::Success) throw std::runtime_error("KL objective: model covariance is not positive definite");
        const auto& l = llt_.matrixLLT();
        logdet_ = 0.0;
        for (Eigen::Index k = 0; k < l.rows(); ++k) {
            const double diag = l(k, k).real();
            if (!(diag > 0.0)) throw std::runtime_error("KL objective: model covariance is not positive definite");
            logdet_ += 2.0 * std::log(diag);
        }
    }

    double fit(const CMat& sample_cov) const { return logdet_ + llt_.solve(sample_cov).trace().real(); }

    /// R^{-1} - R^{-1} R_hat R^{-1}
    CMat gradient_matrix(const CMat& sample_cov) const {
        const Eigen::Index n = sample_cov.rows();
        const CMat rinv = llt_.solve(CMat::Identity(n, n));
        CMat g = rinv - rinv * sample_cov * rinv;
        return 0.5 * (g + g.adjoint());
    }

private:
    Eigen::LLT<CMat> llt_;
    double logdet_ = 0.0;
};

double noise_from_eigenvalues(const CMat& cov, int paths) {
    const Eigen::Index n = cov.rows();
    Eigen::SelfAdjointEigenSolver<CMat> eig(0.5 * (cov + cov.adjoint()), Eigen::EigenvaluesOnly);
    const RVec& ev = eig.eigenvalues();  // ascending
    const Eigen::Index count = n - paths;
    return std::max(ev.head(count).mean(), kNoiseFloor);
}

CMat residual_covariance(const CMat& sample_cov, const RVec& powers, const CMat& atoms) {
    CMat r = sample_cov;
    for (Eigen::Index i = 0; i < powers.size(); ++i)
        if (powers[i] > 0.0) r.noalias() -= powers[i] * atoms.col(i) * atoms.col(i).adjoint();
    return r;
}

// Re(diag(C^H R C)) for every column of C.
RVec quadratic_scores(const CMat& r, const CMat& c) {
    return (c.conjugate().array() * (r * c).array()).colwise().sum().real().transpose();
}

// Scores divided by the squared column norm, so that the compressed gain of an
// atom does not bias the search.
RVec normalized_scores(const CMat& r, const CMat& c) {
    const RVec norms = c.colwise().squaredNorm().transpose();
    RVec s = quadratic_scores(r, c);
    for (Eigen::Index k = 0; k < s.size(); ++k) s[k] = norms[k] > 0.0 ? s[k] / norms[k] : 0.0;
    return s;
}

Eigen::Index argmax_first(const RVec& v) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < v.size(); ++k)
        if (v[k] > v[best]) best = k;
    return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration and grids

ClklConfig ClklConfig::for_scenario(const ScenarioConfig& sc) {
    ClklConfig cfg;
    cfg.inv_range_min = 1.0 / sc.range_max();
    cfg.inv_range_max = 1.0 / sc.range_min();
    return cfg;
}

void ClklConfig::validate() const {
    if (angle_grid < 1 || scan_angles < 1 || scan_inv_ranges < 1) throw std::invalid_argument("clkl: empty grid");
    if (!(inv_range_max > inv_range_min) || !(inv_range_min > 0.0))
        throw std::invalid_argument("clkl: inverse-range bounds must satisfy 0 < u_min < u_max");
    if (!(theta_hi_deg > theta_lo_deg)) throw std::invalid_argument("clkl: empty angle span");
    if (max_iterations < 1 || max_backtracks < 1) throw std::invalid_argument("clkl: iteration limits must be positive");
    if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) throw std::invalid_argument("clkl: Armijo shrink must lie in (0, 1)");
    if (sparsity < 0.0) throw std::invalid_argument("clkl: negative sparsity weight");
    if (std::none_of(starts.begin(), starts.end(), [](bool s) { return s; }))
        throw std::invalid_argument("clkl: at least one warm start must be enabled");
}

RVec cosine_angle_grid(int points, double lo_deg, double hi_deg) {
    RVec grid(points);
    const double c_hi = std::cos(deg2rad(lo_deg));
    const double c_lo = std::cos(deg2rad(hi_deg));
    for (int q = 0; q < points; ++q) {
        const double t = points == 1 ? 0.5 : static_cast<double>(q) / (points - 1);
        grid[q] = std::acos(c_hi + t * (c_lo - c_hi));
    }
    return grid;
}

RVec uniform_grid(int points, double lo, double hi) {
    if (points == 1) return RVec::Constant(1, 0.5 * (lo + hi));
    return RVec::LinSpaced(points, lo, hi);
}

void chirp_atom(const RVec& mbar, double omega, double kappa, Eigen::Ref<CVec> out) {
    const double m0 = mbar[0];
    cplx a = std::polar(1.0, omega * m0 - kappa * m0 * m0);
    cplx step = std::polar(1.0, omega - kappa * (2.0 * m0 + 1.0));
    const cplx step_ratio = std::polar(1.0, -2.0 * kappa);
    for (Eigen::Index m = 0; m < mbar.size(); ++m) {
        out[m] = a;
        a *= step;
        step *= step_ratio;
    }
}

// ---------------------------------------------------------------------------
// dictionary

AngleDictionary::AngleDictionary(const ArrayConfig& array, const CMat& combiner, RVec thetas, RVec inv_ranges)
    : array_(array), combiner_(combiner), thetas_(std::move(thetas)), inv_ranges_(std::move(inv_ranges)) {
    if (combiner_.rows() != array_.elements()) throw std::invalid_argument("AngleDictionary: combiner has wrong row count");
    if (thetas_.size() != inv_ranges_.size()) throw std::invalid_argument("AngleDictionary: grid size mismatch");
    gram_ = combiner_.adjoint() * combiner_;
    CMat full(array_.elements(), thetas_.size());
    for (Eigen::Index i = 0; i < thetas_.size(); ++i)
        chirp_atom(array_.centred(), array_.spatial_frequency(thetas_[i]),
                   array_.chirp_constant(thetas_[i]) * inv_ranges_[i], full.col(i));
    atoms_ = combiner_.adjoint() * full;
}

CVec AngleDictionary::compressed_atom(double theta, double inv_range) const {
    CVec a(array_.elements());
    chirp_atom(array_.centred(), array_.spatial_frequency(theta), array_.chirp_constant(theta) * inv_range, a);
    return combiner_.adjoint() * a;
}

void AngleDictionary::set_atom(Eigen::Index i, double theta, double inv_range) {
    thetas_[i] = theta;
    inv_ranges_[i] = inv_range;
    atoms_.col(i) = compressed_atom(theta, inv_range);
}

void AngleDictionary::set_inv_ranges(const RVec& inv_ranges) {
    if (inv_ranges.size() != thetas_.size()) throw std::invalid_argument("AngleDictionary: grid size mismatch");
    for (Eigen::Index i = 0; i < thetas_.size(); ++i) set_atom(i, thetas_[i], inv_ranges[i]);
}

CMat AngleDictionary::compressed_atoms_over_angles(const RVec& thetas, double inv_range) const {
    CMat full(array_.elements(), thetas.size());
    for (Eigen::Index j = 0; j < thetas.size(); ++j)
        chirp_atom(array_.centred(), array_.spatial_frequency(thetas[j]),
                   array_.chirp_constant(thetas[j]) * inv_range, full.col(j));
    return combiner_.adjoint() * full;
}

CMat AngleDictionary::compressed_atoms_over_inv_ranges(double theta, const RVec& inv_ranges) const {
    const double omega = array_.spatial_frequency(theta);
    const double c = array_.chirp_constant(theta);
    CMat full(array_.elements(), inv_ranges.size());
    for (Eigen::Index j = 0; j < inv_ranges.size(); ++j) chirp_atom(array_.centred(), omega, c * inv_ranges[j], full.col(j));
    return combiner_.adjoint() * full;
}

CVec AngleDictionary::atom_inv_range_derivative(Eigen::Index i) const {
    const RVec& mbar = array_.centred();
    const double c = array_.chirp_constant(thetas_[i]);
    CVec a = steering_chirp(array_, thetas_[i], inv_ranges_[i]);
    const cplx minus_j(0.0, -1.0);
    for (Eigen::Index m = 0; m < a.size(); ++m) a[m] *= minus_j * c * mbar[m] * mbar[m];
    return combiner_.adjoint() * a;
}

// ---------------------------------------------------------------------------
// objective and gradients

double estimate_noise_frozen(const CMat& sample_cov, int paths) {
    const auto n_rf = static_cast<int>(sample_cov.rows());
    if (sample_cov.cols() != sample_cov.rows()) throw std::invalid_argument("estimate_noise_frozen: covariance must be square");
    if (paths < 0) throw std::invalid_argument("estimate_noise_frozen: negative path count");
    if (n_rf <= paths)
        throw IdentifiabilityError("identifiability violated: " + std::to_string(paths) + " paths need more than " +
                                   std::to_string(n_rf) + " RF chains (operational limit d <= floor((N_RF - 1) / 2) = " +
                                   std::to_string(max_identifiable_paths(n_rf)) + ")");
    return noise_from_eigenvalues(sample_cov, paths);
}

CMat model_covariance(const RVec& powers, const AngleDictionary& dict, double noise) {
    if (powers.size() != dict.size()) throw std::invalid_argument("model_covariance: power vector size mismatch");
    CMat r = noise * dict.gram();
    const CMat& atoms = dict.atoms();
    for (Eigen::Index i = 0; i < powers.size(); ++i)
        if (powers[i] != 0.0) r.noalias() += powers[i] * atoms.col(i) * atoms.col(i).adjoint();
    return 0.5 * (r + r.adjoint());
}

double kl_objective(const RVec& powers, const AngleDictionary& dict, double noise, const CMat& sample_cov,
                    double sparsity) {
    const KlFactor f(model_covariance(powers, dict, noise));
    return f.fit(sample_cov) + sparsity * powers.cwiseAbs().sum();
}

RVec power_gradient(const RVec& powers, const AngleDictionary& dict, double noise, const CMat& sample_cov,
                    double sparsity) {
    const KlFactor f(model_covariance(powers, dict, noise));
    return quadratic_scores(f.gradient_matrix(sample_cov), dict.atoms()).array() + sparsity;
}

RVec inv_range_gradient(const RVec& powers, const AngleDictionary& dict, double noise, const CMat& sample_cov) {
    const KlFactor f(model_covariance(powers, dict, noise));
    const CMat g = f.gradient_matrix(sample_cov);
    RVec grad = RVec::Zero(dict.size());
    for (Eigen::Index i = 0; i < dict.size(); ++i) {
        if (powers[i] == 0.0) continue;
        const CVec dd = dict.atom_inv_range_derivative(i);
        grad[i] = 2.0 * powers[i] * dd.dot(g * dict.atoms().col(i)).real();
    }
    return grad;
}

// ---------------------------------------------------------------------------
// power loop

PowerLoopResult power_loop(const AngleDictionary& dict, const CMat& sample_cov, double noise, int paths,
                           const ClklConfig& cfg, const RVec* initial) {
    PowerLoopResult out;
    out.noise = noise;
    out.powers = initial ? RVec(initial->cwiseMax(0.0)) : RVec(RVec::Zero(dict.size()));
    if (out.powers.size() != dict.size()) throw std::invalid_argument("power_loop: initial point has wrong size");

    auto objective = [&](const RVec& p) { return kl_objective(p, dict, out.noise, sample_cov, cfg.sparsity); };

    double current = objective(out.powers);
    out.trace.push_back(current);

    for (int t = 1; t <= cfg.max_iterations; ++t) {
        const RVec grad = power_gradient(out.powers, dict, out.noise, sample_cov, cfg.sparsity);
        double alpha = cfg.armijo_step;
        bool accepted = false;
        RVec trial;
        double trial_value = current;
        for (int k = 0; k < cfg.max_backtracks; ++k, alpha *= cfg.armijo_shrink) {
            trial = (out.powers - alpha * grad).cwiseMax(0.0);
            const double predicted = (out.powers - trial).dot(grad);
            if (!(predicted > 0.0)) break;  // projected step is null: stationary point
            trial_value = objective(trial);
            if (trial_value <= current - cfg.armijo_slope * predicted) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            out.converged = true;
            break;
        }

        out.powers = std::move(trial);
        ++out.iterations;
        const double change = std::abs(trial_value - current) / std::abs(trial_value);
        current = trial_value;
        out.trace.push_back(current);
        if (change < cfg.rel_tolerance) {
            out.converged = true;
            break;
        }

        if (cfg.noise_refresh_interval > 0 && t % cfg.noise_refresh_interval == 0) {
            out.noise = noise_from_eigenvalues(residual_covariance(sample_cov, out.powers, dict.atoms()), paths);
            current = objective(out.powers);
            out.trace.push_back(current);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// multi-start

double ring_inv_range(const ArrayConfig& array, double theta, double beta, double u_min, double u_max) {
    const double z = array.aperture() * array.aperture() / (2.0 * beta * beta * array.wavelength());
    const double s = std::sin(theta);
    const double u = (s == 0.0) ? u_max : 1.0 / (z * s * s);
    return std::clamp(u, u_min, u_max);
}

MultiStartResult multi_start(const ArrayConfig& array, const CMat& combiner, const CMat& sample_cov, double noise,
                             int paths, const ClklConfig& cfg) {
    const RVec thetas = cosine_angle_grid(cfg.angle_grid, cfg.theta_lo_deg, cfg.theta_hi_deg);
    const Eigen::Index q = thetas.size();

    std::array<RVec, 3> inits;
    inits[0].resize(q);
    for (Eigen::Index i = 0; i < q; ++i)
        inits[0][i] = ring_inv_range(array, thetas[i], cfg.ring_beta, cfg.inv_range_min, cfg.inv_range_max);
    inits[1] = RVec::Constant(q, cfg.inv_range_max);
    inits[2] = RVec::Constant(q, cfg.inv_range_min);

    std::optional<MultiStartResult> best;
    double best_objective = std::numeric_limits<double>::infinity();
    std::vector<StartDiagnostics> diags;
    for (int s = 0; s < 3; ++s) {
        if (!cfg.starts[static_cast<std::size_t>(s)]) continue;
        AngleDictionary dict(array, combiner, thetas, inits[static_cast<std::size_t>(s)]);
        PowerLoopResult loop = power_loop(dict, sample_cov, noise, paths, cfg);
        diags.push_back({s + 1, loop.iterations, loop.converged, loop.objective(), loop.trace});
        if (!best || loop.objective() < best_objective) {
            best_objective = loop.objective();
            best = MultiStartResult{std::move(dict), std::move(loop.powers), loop.noise, s + 1, {}};
        }
    }
    best->starts = std::move(diags);
    return std::move(*best);
}

// ---------------------------------------------------------------------------
// post-loop scan

std::vector<Eigen::Index> select_active_set(const RVec& powers, const AngleDictionary& dict, const CMat& sample_cov,
                                            int paths) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(powers.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return powers[a] > powers[b]; });

    std::vector<Eigen::Index> active;
    for (Eigen::Index i : order) {
        if (static_cast<int>(active.size()) == paths || !(powers[i] > 0.0)) break;
        active.push_back(i);
    }
    if (static_cast<int>(active.size()) < paths) {
        RVec kept = RVec::Zero(powers.size());
        for (Eigen::Index i : active) kept[i] = powers[i];
        const RVec score = quadratic_scores(residual_covariance(sample_cov, kept, dict.atoms()), dict.atoms());
        std::vector<Eigen::Index> rest;
        for (Eigen::Index i = 0; i < powers.size(); ++i)
            if (!(kept[i] > 0.0)) rest.push_back(i);
        std::stable_sort(rest.begin(), rest.end(), [&](Eigen::Index a, Eigen::Index b) { return score[a] > score[b]; });
        for (Eigen::Index i : rest) {
            if (static_cast<int>(active.size()) == paths) break;
            active.push_back(i);
        }
    }
    return active;
}

void refit_scan_powers(std::vector<ScannedPath>& active, const CMat& sample_cov) {
    const auto d = static_cast<Eigen::Index>(active.size());
    CMat a(sample_cov.rows(), d);
    for (Eigen::Index j = 0; j < d; ++j) a.col(j) = active[static_cast<std::size_t>(j)].atom;
    const CMat pinv = a.completeOrthogonalDecomposition().pseudoInverse();
    const CMat fit = pinv * sample_cov * pinv.adjoint();
    for (Eigen::Index j = 0; j < d; ++j) active[static_cast<std::size_t>(j)].power = std::max(0.0, fit(j, j).real());
}

std::vector<ScannedPath> post_loop_scan(std::vector<ScannedPath> active, const AngleDictionary& dict,
                                        const CMat& sample_cov, const ClklConfig& cfg) {
    if (active.empty()) return active;
    const RVec fine_thetas = cosine_angle_grid(cfg.scan_angles, cfg.theta_lo_deg, cfg.theta_hi_deg);
    const RVec fine_inv_ranges = uniform_grid(cfg.scan_inv_ranges, cfg.inv_range_min, cfg.inv_range_max);

    for (int pass = 1; pass <= cfg.scan_passes; ++pass) {
        for (std::size_t i = 0; i < active.size(); ++i) {
            if (cfg.scan_refit) refit_scan_powers(active, sample_cov);
            CMat residual = sample_cov;
            for (std::size_t j = 0; j < active.size(); ++j)
                if (j != i) residual.noalias() -= active[j].power * active[j].atom * active[j].atom.adjoint();

            ScannedPath& path = active[i];
            if (pass % 2 == 1) {
                const CMat cand = dict.compressed_atoms_over_angles(fine_thetas, path.inv_range);
                const RVec scores = cfg.scan_normalized ? normalized_scores(residual, cand) : quadratic_scores(residual, cand);
                const Eigen::Index k = argmax_first(scores);
                path.theta = fine_thetas[k];
                path.atom = cand.col(k);
            } else {
                const CMat cand = dict.compressed_atoms_over_inv_ranges(path.theta, fine_inv_ranges);
                const RVec scores =
                    cfg.scan_range_normalized ? normalized_scores(residual, cand) : quadratic_scores(residual, cand);
                const Eigen::Index k = argmax_first(scores);
                path.inv_range = fine_inv_ranges[k];
                path.atom = cand.col(k);
            }
        }
    }
    if (cfg.scan_refit) refit_scan_powers(active, sample_cov);
    return active;
}

// ---------------------------------------------------------------------------
// reconstruction and the full estimator

CMat reconstruct_channel(const ArrayConfig& array, const std::vector<double>& thetas,
                         const std::vector<double>& ranges, const CMat& combiner, const CMat& snapshots,
                         bool* rank_deficient) {
    if (thetas.size() != ranges.size()) throw std::invalid_argument("reconstruct_channel: angle/range count mismatch");
    if (rank_deficient) *rank_deficient = false;
    if (thetas.empty()) return CMat::Zero(array.elements(), snapshots.cols());

    CMat a(array.elements(), static_cast<Eigen::Index>(thetas.size()));
    for (std::size_t l = 0; l < thetas.size(); ++l)
        a.col(static_cast<Eigen::Index>(l)) = steering_fresnel(array, thetas[l], ranges[l]);
    const CMat b = combiner.adjoint() * a;
    const Eigen::CompleteOrthogonalDecomposition<CMat> cod(b);
    if (rank_deficient) *rank_deficient = cod.rank() < b.cols();
    return a * cod.solve(snapshots);
}

const StartDiagnostics* EstimateResult::winner() const {
    for (const auto& s : starts)
        if (s.start == winning_start) return &s;
    return nullptr;
}

EstimateResult clkl_estimate(const ArrayConfig& array, const CompressedObservation& obs, int paths,
                             const ClklConfig& cfg) {
    cfg.validate();
    if (obs.combiner.rows() != array.elements()) throw std::invalid_argument("clkl_estimate: combiner does not match array");

    EstimateResult result;
    result.beyond_identifiability = paths > max_identifiable_paths(obs.rf_chains());
    result.noise_estimate = estimate_noise_frozen(obs.covariance, paths);

    MultiStartResult ms = multi_start(array, obs.combiner, obs.covariance, result.noise_estimate, paths, cfg);
    result.winning_start = ms.winning_start;
    result.starts = std::move(ms.starts);
    result.empty_active_set = !(ms.powers.maxCoeff() > 0.0);

    std::vector<ScannedPath> active;
    for (Eigen::Index i : select_active_set(ms.powers, ms.dictionary, obs.covariance, paths))
        active.push_back({ms.dictionary.thetas()[i], ms.dictionary.inv_ranges()[i], ms.powers[i], ms.dictionary.atoms().col(i)});
    if (cfg.post_loop_scan) active = post_loop_scan(std::move(active), ms.dictionary, obs.covariance, cfg);

    std::vector<double> thetas, ranges;
    for (const auto& p : active) {
        const double u = p.inv_range;
        result.paths.push_back({p.theta, 1.0 / u, p.power, array.chirp_constant(p.theta) * u});
        thetas.push_back(p.theta);
        ranges.push_back(1.0 / u);
    }
    result.channel = reconstruct_channel(array, thetas, ranges, obs.combiner, obs.snapshots, &result.rank_deficient);
    return result;
}

}  // namespace clkl
