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

#include "clkl/crb.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace clkl {

SteeringDerivatives steering_derivatives(const ArrayConfig& array, double theta, double kappa) {
    const RVec& mbar = array.centred();
    const double omega = array.spatial_frequency(theta);
    SteeringDerivatives out{CVec(mbar.size()), CVec(mbar.size())};
    const cplx j(0.0, 1.0);
    for (Eigen::Index m = 0; m < mbar.size(); ++m) {
        const cplx a = std::polar(1.0, omega * mbar[m] - kappa * mbar[m] * mbar[m]);
        out.d_omega[m] = j * mbar[m] * a;
        out.d_kappa[m] = -j * mbar[m] * mbar[m] * a;
    }
    return out;
}

RVec CovarianceParams::packed() const {
    RVec eta(size());
    eta << omega, kappa, power, noise;
    return eta;
}

CovarianceParams CovarianceParams::unpack(const RVec& eta, int paths) {
    if (eta.size() != 3 * paths + 1) throw std::invalid_argument("CovarianceParams: wrong parameter count");
    CovarianceParams p;
    p.omega = eta.segment(0, paths);
    p.kappa = eta.segment(paths, paths);
    p.power = eta.segment(2 * paths, paths);
    p.noise = eta[3 * paths];
    return p;
}

CovarianceParams CovarianceParams::from_paths(const ArrayConfig& array, const std::vector<PathParam>& paths,
                                              double noise) {
    const auto d = static_cast<Eigen::Index>(paths.size());
    CovarianceParams p;
    p.omega.resize(d);
    p.kappa.resize(d);
    p.power.resize(d);
    for (Eigen::Index l = 0; l < d; ++l) {
        const auto c = curvature_coords(array, paths[static_cast<std::size_t>(l)].theta, paths[static_cast<std::size_t>(l)].range);
        p.omega[l] = c.omega;
        p.kappa[l] = c.kappa;
        p.power[l] = paths[static_cast<std::size_t>(l)].power;
    }
    p.noise = noise;
    return p;
}

namespace {

struct AtomTriple {
    CVec d, d_omega, d_kappa;  // compressed
};

AtomTriple compressed_atom(const ArrayConfig& array, const CMat& w, double omega, double kappa) {
    const RVec& mbar = array.centred();
    CVec a(mbar.size()), da(mbar.size()), dk(mbar.size());
    const cplx j(0.0, 1.0);
    for (Eigen::Index m = 0; m < mbar.size(); ++m) {
        a[m] = std::polar(1.0, omega * mbar[m] - kappa * mbar[m] * mbar[m]);
        da[m] = j * mbar[m] * a[m];
        dk[m] = -j * mbar[m] * mbar[m] * a[m];
    }
    return {w.adjoint() * a, w.adjoint() * da, w.adjoint() * dk};
}

CMat hermitian_rank2(const CVec& x, const CVec& y) { return x * y.adjoint() + y * x.adjoint(); }

}  // namespace

CMat compressed_model_covariance(const ArrayConfig& array, const CMat& combiner, const CovarianceParams& params) {
    CMat r = params.noise * (combiner.adjoint() * combiner);
    for (int l = 0; l < params.paths(); ++l) {
        const CVec d = compressed_atom(array, combiner, params.omega[l], params.kappa[l]).d;
        r.noalias() += params.power[l] * d * d.adjoint();
    }
    return r;
}

std::vector<CMat> covariance_derivatives(const ArrayConfig& array, const CMat& combiner,
                                         const CovarianceParams& params) {
    const int d = params.paths();
    std::vector<CMat> out(static_cast<std::size_t>(3 * d + 1));
    for (int l = 0; l < d; ++l) {
        const AtomTriple t = compressed_atom(array, combiner, params.omega[l], params.kappa[l]);
        out[static_cast<std::size_t>(l)] = params.power[l] * hermitian_rank2(t.d_omega, t.d);
        out[static_cast<std::size_t>(d + l)] = params.power[l] * hermitian_rank2(t.d_kappa, t.d);
        out[static_cast<std::size_t>(2 * d + l)] = t.d * t.d.adjoint();
    }
    out.back() = combiner.adjoint() * combiner;
    return out;
}

FimReport fim(const ArrayConfig& array, const CMat& combiner, const CovarianceParams& params, int snapshots) {
    const CMat r = compressed_model_covariance(array, combiner, params);
    const Eigen::LLT<CMat> llt(0.5 * (r + r.adjoint()));
    if (llt.info() != Eigen::Success) throw std::runtime_error("fim: model covariance is not positive definite");

    const std::vector<CMat> dr = covariance_derivatives(array, combiner, params);
    std::vector<CMat> m;
    m.reserve(dr.size());
    for (const auto& x : dr) m.push_back(llt.solve(x));

    const auto n = static_cast<Eigen::Index>(dr.size());
    FimReport rep;
    rep.fim.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = i; k < n; ++k) {
            const double v = snapshots * m[static_cast<std::size_t>(i)].cwiseProduct(m[static_cast<std::size_t>(k)].transpose()).sum().real();
            rep.fim(i, k) = v;
            rep.fim(k, i) = v;
        }

    const Eigen::JacobiSVD<RMat> svd(rep.fim, Eigen::ComputeFullU | Eigen::ComputeFullV);
    rep.singular_values = svd.singularValues();
    const double smax = rep.singular_values[0];
    const double smin = rep.singular_values[n - 1];
    rep.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    const double tol = kFimRelativeTolerance * smax;
    const int signal = 2 * params.paths();

    RVec inv_s = RVec::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (rep.singular_values[k] > tol) {
            inv_s[k] = 1.0 / rep.singular_values[k];
            continue;
        }
        ++rep.truncated;
        if (svd.matrixV().col(k).head(signal).squaredNorm() > kFimSignalMassLimit) rep.invalid = true;
    }
    rep.pseudo_inverse = svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose();
    return rep;
}

std::vector<PathCrb> propagate_crb(const FimReport& report, const ArrayConfig& array,
                                   const std::vector<PathParam>& paths) {
    const auto d = static_cast<Eigen::Index>(paths.size());
    if (report.pseudo_inverse.rows() != 3 * d + 1) throw std::invalid_argument("propagate_crb: path count mismatch");
    std::vector<PathCrb> out(paths.size());
    for (Eigen::Index l = 0; l < d; ++l) {
        const PathParam& p = paths[static_cast<std::size_t>(l)];
        PathCrb& c = out[static_cast<std::size_t>(l)];
        const double s = std::sin(p.theta);
        const double dw = 2.0 * kPi * array.spacing() * s / array.wavelength();
        if (s == 0.0) {
            c.endfire = true;
            c.sqrt_theta_deg = std::numeric_limits<double>::infinity();
            c.sqrt_range = std::numeric_limits<double>::infinity();
            continue;
        }
        c.sqrt_theta_deg = rad2deg(std::sqrt(std::max(report.pseudo_inverse(l, l), 0.0)) / std::abs(dw));
        const double scale = p.range * p.range / array.chirp_constant(p.theta);
        c.sqrt_range = std::sqrt(std::max(report.pseudo_inverse(d + l, d + l), 0.0)) * scale;
    }
    return out;
}

double nan_median(std::vector<double> values) {
    values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }), values.end());
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double hi = values[mid];
    if (values.size() % 2 == 1) return hi;
    const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

CrbTrial crb_trial(const ArrayConfig& array, const CMat& combiner, const std::vector<PathParam>& paths, double noise,
                   int snapshots) {
    const FimReport rep = fim(array, combiner, CovarianceParams::from_paths(array, paths, noise), snapshots);
    CrbTrial t;
    t.condition = rep.condition;
    t.invalid = rep.invalid;
    if (rep.invalid) {
        t.sqrt_theta_deg = std::numeric_limits<double>::quiet_NaN();
        t.sqrt_range = std::numeric_limits<double>::quiet_NaN();
        return t;
    }
    for (const auto& c : propagate_crb(rep, array, paths)) {
        t.sqrt_theta_deg += c.sqrt_theta_deg;
        t.sqrt_range += c.sqrt_range;
    }
    t.sqrt_theta_deg /= static_cast<double>(paths.size());
    t.sqrt_range /= static_cast<double>(paths.size());
    return t;
}

CrbSummary crb_sweep(const ScenarioConfig& sc, const CrbSweepOptions& opt) {
    sc.validate();
    if (opt.trials < 1) throw std::invalid_argument("crb_sweep: need at least one trial");
    const double noise = snr_to_noise(sc.snr_db);
    CrbSummary s;
    std::vector<double> th, rg, cond;
    for (int k = 0; k < opt.trials; ++k) {
        const SceneRng rng(opt.base_seed + static_cast<std::uint64_t>(k));
        auto path_rng = rng.stream(SceneRng::Stream::Paths);
        const std::vector<PathParam> paths = draw_paths(sc, path_rng);
        CMat w;
        if (opt.identity_combiner) {
            w = CMat::Identity(sc.array.elements(), sc.array.elements());
        } else {
            auto w_rng = rng.stream(SceneRng::Stream::Combiner);
            w = draw_combiner(sc.array.elements(), sc.rf_chains, w_rng);
        }
        const CrbTrial t = crb_trial(sc.array, w, paths, noise, sc.snapshots);
        s.per_trial.push_back(t);
        th.push_back(t.sqrt_theta_deg);
        rg.push_back(t.sqrt_range);
        cond.push_back(t.condition);
        s.invalid_trials += t.invalid ? 1 : 0;
    }
    s.trials = opt.trials;
    s.empty = s.invalid_trials == s.trials;
    s.median_theta_deg = nan_median(th);
    s.median_range = nan_median(rg);
    s.median_condition = nan_median(cond);
    return s;
}

}  // namespace clkl
