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

#include "clkl/psomp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace clkl {

double beam_depth_spacing(const ArrayConfig& array, double theta) {
    const double half = 0.5 * (array.elements() - 1);
    const double c = array.chirp_constant(theta);
    if (!(c > 0.0)) return std::numeric_limits<double>::infinity();
    return kPi / (c * half * half);
}

double ring_coherence(const ArrayConfig& array, double theta, double du) {
    const double dk = array.chirp_constant(theta) * du;
    const RVec& mbar = array.centred();
    cplx acc{0.0, 0.0};
    for (Eigen::Index m = 0; m < mbar.size(); ++m) acc += std::polar(1.0, -dk * mbar[m] * mbar[m]);
    return std::abs(acc) / static_cast<double>(mbar.size());
}

PolarDictionary build_beam_depth_dictionary(const ArrayConfig& array, double u_min, double u_max,
                                            const PolarDictionaryOptions& opt) {
    if (!(u_min >= 0.0) || !(u_max > u_min)) throw std::invalid_argument("polar dictionary: need 0 <= u_min < u_max");
    if (opt.angles < 1) throw std::invalid_argument("polar dictionary: need at least one angle");
    if (!(opt.widen_factor > 1.0)) throw std::invalid_argument("polar dictionary: widen factor must exceed 1");
    const RVec thetas = cosine_angle_grid(opt.angles, opt.theta_lo_deg, opt.theta_hi_deg);

    PolarDictionary dict;
    auto worst = [&](double scale) {
        double w = 0.0;
        for (Eigen::Index i = 0; i < thetas.size(); ++i) {
            const double du = scale * beam_depth_spacing(array, thetas[i]);
            if (std::isfinite(du) && du <= u_max) w = std::max(w, ring_coherence(array, thetas[i], du));
        }
        return w;
    };
    while (worst(dict.spacing_scale) > opt.coherence_limit) dict.spacing_scale *= opt.widen_factor;

    for (Eigen::Index i = 0; i < thetas.size(); ++i) {
        const double du = dict.spacing_scale * beam_depth_spacing(array, thetas[i]);
        dict.atoms.push_back({thetas[i], 0.0});
        int rings = 0;
        if (std::isfinite(du)) {
            for (long k = std::max(1L, static_cast<long>(std::ceil(u_min / du))); k * du <= u_max; ++k) {
                dict.atoms.push_back({thetas[i], static_cast<double>(k) * du});
                ++rings;
            }
        }
        dict.rings_per_angle.push_back(rings);
    }

    dict.steering.resize(array.elements(), dict.size());
    for (Eigen::Index s = 0; s < dict.size(); ++s) {
        const auto& a = dict.atoms[static_cast<std::size_t>(s)];
        dict.steering.col(s) = steering_chirp(array, a.theta, a.inv_range);
    }
    const double m = array.elements();
    for (Eigen::Index s = 1; s < dict.size(); ++s) {
        if (dict.atoms[static_cast<std::size_t>(s)].theta != dict.atoms[static_cast<std::size_t>(s - 1)].theta) continue;
        const double coh = std::abs(dict.steering.col(s - 1).dot(dict.steering.col(s))) / m;
        dict.max_adjacent_coherence = std::max(dict.max_adjacent_coherence, coh);
    }
    return dict;
}

PsompResult psomp_estimate(const ArrayConfig& array, const CompressedObservation& obs, int paths,
                           const PolarDictionary& dict, double range_max, const PsompOptions& opt) {
    const int n_rf = obs.rf_chains();
    if (paths < 1 || paths > n_rf) throw std::invalid_argument("psomp: path count must lie in [1, N_RF]");
    if (dict.steering.rows() != obs.combiner.rows()) throw std::invalid_argument("psomp: dictionary does not match array");
    if (paths > dict.size()) throw std::invalid_argument("psomp: dictionary smaller than path count");

    PsompResult out;
    out.noise_estimate = paths < n_rf ? estimate_noise_frozen(obs.covariance, paths) : 0.0;

    Eigen::SelfAdjointEigenSolver<CMat> eig(0.5 * (obs.covariance + obs.covariance.adjoint()));
    const RVec& ev = eig.eigenvalues();  // ascending
    CMat z(n_rf, paths);
    for (int k = 0; k < paths; ++k) {
        const Eigen::Index col = n_rf - 1 - k;
        z.col(k) = eig.eigenvectors().col(col) * std::sqrt(std::max(ev[col] - out.noise_estimate, 0.0));
    }

    const CMat d = obs.combiner.adjoint() * dict.steering;
    CMat dn = d;
    if (opt.normalize_atoms) {
        for (Eigen::Index s = 0; s < dn.cols(); ++s) {
            const double nrm = dn.col(s).norm();
            if (nrm > 0.0) dn.col(s) /= nrm;
        }
    }

    CMat residual = z;
    CMat coeffs;
    out.residual_norms.push_back(residual.norm());
    std::vector<bool> taken(static_cast<std::size_t>(dict.size()), false);
    for (int t = 0; t < paths; ++t) {
        const RVec score = (dn.adjoint() * residual).rowwise().norm();
        Eigen::Index best = -1;
        for (Eigen::Index s = 0; s < score.size(); ++s)
            if (!taken[static_cast<std::size_t>(s)] && (best < 0 || score[s] > score[best])) best = s;
        taken[static_cast<std::size_t>(best)] = true;
        out.selected.push_back(best);

        CMat phi(n_rf, static_cast<Eigen::Index>(out.selected.size()));
        for (std::size_t j = 0; j < out.selected.size(); ++j) phi.col(static_cast<Eigen::Index>(j)) = d.col(out.selected[j]);
        coeffs = phi.completeOrthogonalDecomposition().solve(z);
        residual = z - phi * coeffs;
        out.residual_norms.push_back(residual.norm());
    }

    std::vector<double> thetas, ranges;
    for (std::size_t j = 0; j < out.selected.size(); ++j) {
        const PolarAtom& a = dict.atoms[static_cast<std::size_t>(out.selected[j])];
        const double r = a.inv_range > 0.0 ? 1.0 / a.inv_range : range_max;
        out.paths.push_back({a.theta, r, coeffs.row(static_cast<Eigen::Index>(j)).squaredNorm(),
                             array.chirp_constant(a.theta) * a.inv_range});
        thetas.push_back(a.theta);
        ranges.push_back(r);
    }
    out.channel = reconstruct_channel(array, thetas, ranges, obs.combiner, obs.snapshots, &out.rank_deficient);
    return out;
}

}  // namespace clkl
