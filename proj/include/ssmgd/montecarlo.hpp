#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "ssmgd/bounds.hpp"
#include "ssmgd/chain.hpp"
#include "ssmgd/config.hpp"
#include "ssmgd/descent.hpp"
#include "ssmgd/errors.hpp"
#include "ssmgd/mixing.hpp"
#include "ssmgd/oracle.hpp"

namespace ssmgd {

/// Order-statistic quantile: the smallest sample at or above fraction q of
/// the data. Monotone in q, so median <= (1-delta)-quantile for delta < 1/2.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DomainError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<long>(values.size());
    long idx = static_cast<long>(std::ceil(q * static_cast<double>(n))) - 1;
    idx = std::clamp(idx, 0L, n - 1);
    return values[static_cast<std::size_t>(idx)];
}

/// Median, (1-delta)-quantile and mean of the error series across trials,
/// per checkpoint.
struct QuantileCurve {
    std::vector<long> checkpoints;
    double delta = 0.1;

    std::vector<double> median_total, q_total, mean_total;
    std::vector<double> median_init, q_init, mean_init;
    std::vector<double> median_samp, q_samp, mean_samp;
    std::vector<double> median_samp2, q_samp2, mean_samp2;
};

/// Full Monte Carlo output: the aggregated curves plus the retained
/// per-trial squared sampling errors (trials x checkpoints, row-major).
struct MonteCarloResult {
    QuantileCurve curve;
    std::vector<std::vector<double>> samp2_per_trial;
    double r1_norm = 0.0;
    double max_decomposition_defect = 0.0;
};

/// Empirical fraction of trials meeting a per-checkpoint bound.
struct CoverageReport {
    std::vector<long> checkpoints;
    std::vector<double> fractions;
    Variant variant = Variant::conservative;
    Formula formula = Formula::thm1_phi;
    double delta = 0.1;

    double min_fraction() const {
        double lo = 1.0;
        for (double f : fractions) lo = std::min(lo, f);
        return lo;
    }
};

inline CoverageReport coverage(const std::vector<std::vector<double>>& samp2_per_trial,
                               const std::vector<long>& checkpoints,
                               const std::vector<double>& bounds, double delta,
                               Variant variant = Variant::conservative,
                               Formula formula = Formula::thm1_phi) {
    if (bounds.size() != checkpoints.size()) {
        throw DimensionMismatch("coverage needs one bound per checkpoint");
    }
    for (const auto& row : samp2_per_trial) {
        if (row.size() != checkpoints.size()) {
            throw DimensionMismatch("per-trial rows must match the checkpoint count");
        }
    }
    CoverageReport report;
    report.checkpoints = checkpoints;
    report.variant = variant;
    report.formula = formula;
    report.delta = delta;
    const double n = static_cast<double>(samp2_per_trial.size());
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        long hits = 0;
        for (const auto& row : samp2_per_trial) {
            if (row[c] <= bounds[c]) ++hits;
        }
        report.fractions.push_back(n > 0 ? static_cast<double>(hits) / n : 1.0);
    }
    return report;
}

/// Default acceptance tolerance on fitted slopes around a theoretical
/// exponent, calibrated to the sampling variance of the median-curve fit at
/// a few hundred trials.
inline constexpr double kSlopeTolerance = 0.15;

/// Ordinary least squares of log(value) on log(t) over checkpoints inside
/// [t_lo, t_hi].
struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 1.0;
    long t_lo = 0;
    long t_hi = 0;
};

inline RateFit rate_fit(const std::vector<long>& checkpoints, const std::vector<double>& values,
                        long t_lo, long t_hi) {
    if (checkpoints.size() != values.size()) {
        throw DimensionMismatch("rate fit needs one value per checkpoint");
    }
    std::vector<double> xs, ys;
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        if (checkpoints[c] < t_lo || checkpoints[c] > t_hi) continue;
        if (!(values[c] > 0.0)) {
            throw FitError("rate fit needs strictly positive values in range");
        }
        xs.push_back(std::log(static_cast<double>(checkpoints[c])));
        ys.push_back(std::log(values[c]));
    }
    const auto n = static_cast<double>(xs.size());
    if (xs.size() < 3) throw FitError("rate fit needs at least 3 checkpoints in range");

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        sx += xs[j];
        sy += ys[j];
        sxx += xs[j] * xs[j];
        sxy += xs[j] * ys[j];
    }
    RateFit fit;
    fit.t_lo = t_lo;
    fit.t_hi = t_hi;
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;

    double ss_res = 0.0, ss_tot = 0.0;
    const double mean_y = sy / n;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        const double fitted = fit.intercept + fit.slope * xs[j];
        ss_res += (ys[j] - fitted) * (ys[j] - fitted);
        ss_tot += (ys[j] - mean_y) * (ys[j] - mean_y);
    }
    fit.r_squared = ss_tot < 1e-30 ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

/// Thread cap: SSMGD_THREADS when set, hardware concurrency otherwise.
inline unsigned max_threads() {
    if (const char* env = std::getenv("SSMGD_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed >= 1) return static_cast<unsigned>(parsed);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Fully instantiated experiment: everything monte_carlo needs beyond the
/// declarative config.
struct ResolvedExperiment {
    ChainModel chain;
    GradientFamily family;
    VectorXd wstar;
    VectorXd w1;
    AssumptionCertificate certificate;
    Schedule schedule;
    std::vector<long> checkpoints;
    long trials = 1;
    std::uint64_t base_seed = 1;
    double delta = 0.1;
};

/// Instantiate chain, family, minimizer, certificate and the start point
/// w1 = w* + offset e_1. Start offsets are shared by all trials.
inline ResolvedExperiment resolve_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ChainModel chain = build_chain(cfg);
    GradientFamily family = build_family(cfg, chain);
    const VectorXd& rho = chain.stationary();

    VectorXd wstar = std::visit([&](const auto& fam) { return fam.minimizer(rho); }, family);
    AssumptionCertificate cert =
        std::visit([&](const auto& fam) { return fam.certify(rho); }, family);
    const bool wants_theta1 = cfg.formula == BoundFormula::theta1 ||
                              (cfg.formula == BoundFormula::automatic && cfg.theta == 1.0);
    if (wants_theta1 && !(cert.alpha < 0.5)) {
        throw ConfigError("theta = 1 bound requires alpha < 1/2; got alpha = " +
                          std::to_string(cert.alpha));
    }

    VectorXd w1 = wstar;
    w1(0) += cfg.w1_offset;

    return ResolvedExperiment{std::move(chain),
                              std::move(family),
                              std::move(wstar),
                              std::move(w1),
                              cert,
                              Schedule(cfg.theta, cert.eta),
                              cfg.resolved_checkpoints(),
                              cfg.trials,
                              cfg.seed,
                              cfg.delta};
}

/// Run `trials` independent decomposed trajectories with per-trial seeds
/// mix_seed(base_seed, i) and aggregate. Trials are spread over a work
/// queue; every trial writes only its own slot, and aggregation happens
/// after all workers join, so the execution schedule cannot affect results.
inline MonteCarloResult monte_carlo(const ResolvedExperiment& exp, long horizon) {
    if (exp.trials < 1) throw ConfigError("monte carlo needs at least 1 trial");
    const auto n_trials = static_cast<std::size_t>(exp.trials);
    std::vector<Trajectory> trajectories(n_trials);

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::string error_context;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_trials) return;
            {
                std::lock_guard lock(error_mutex);
                if (first_error) return;
            }
            try {
                const PathSample path =
                    sample_stationary_path(exp.chain, horizon, mix_seed(exp.base_seed, i));
                trajectories[i] = std::visit(
                    [&](const auto& fam) {
                        return run_decomposed(fam, path, exp.schedule, exp.w1, exp.wstar,
                                              exp.checkpoints);
                    },
                    exp.family);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                    error_context = "trial " + std::to_string(i);
                }
            }
        }
    };

    const unsigned n_threads =
        std::min<unsigned>(max_threads(), static_cast<unsigned>(std::max<std::size_t>(n_trials, 1)));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (unsigned w = 0; w < n_threads; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) {
        try {
            std::rethrow_exception(first_error);
        } catch (const NonFinite& e) {
            throw NonFinite(std::string(e.what()) + " in " + error_context, e.step);
        }
    }

    const std::size_t n_cps = exp.checkpoints.size();
    MonteCarloResult result;
    result.curve.checkpoints = exp.checkpoints;
    result.curve.delta = exp.delta;
    result.r1_norm = trajectories.front().r1_norm;
    result.samp2_per_trial.assign(n_trials, std::vector<double>(n_cps));

    for (std::size_t i = 0; i < n_trials; ++i) {
        result.max_decomposition_defect =
            std::max(result.max_decomposition_defect, trajectories[i].max_decomposition_defect);
        for (std::size_t c = 0; c < n_cps; ++c) {
            const double s = trajectories[i].samp_err[c];
            result.samp2_per_trial[i][c] = s * s;
        }
    }

    const double q_level = 1.0 - exp.delta;
    std::vector<double> column(n_trials);
    auto aggregate = [&](auto series_of, std::vector<double>& median, std::vector<double>& upper,
                         std::vector<double>& mean) {
        for (std::size_t c = 0; c < n_cps; ++c) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n_trials; ++i) {
                column[i] = series_of(trajectories[i], c);
                sum += column[i];
            }
            median.push_back(quantile(column, 0.5));
            upper.push_back(quantile(column, q_level));
            mean.push_back(sum / static_cast<double>(n_trials));
        }
    };
    aggregate([](const Trajectory& t, std::size_t c) { return t.total_err[c]; },
              result.curve.median_total, result.curve.q_total, result.curve.mean_total);
    aggregate([](const Trajectory& t, std::size_t c) { return t.init_err[c]; },
              result.curve.median_init, result.curve.q_init, result.curve.mean_init);
    aggregate([](const Trajectory& t, std::size_t c) { return t.samp_err[c]; },
              result.curve.median_samp, result.curve.q_samp, result.curve.mean_samp);
    aggregate([](const Trajectory& t, std::size_t c) {
        return t.samp_err[c] * t.samp_err[c];
    }, result.curve.median_samp2, result.curve.q_samp2, result.curve.mean_samp2);
    return result;
}

/// Theoretical bound values for the experiment's checkpoints. The formula is
/// resolved here; generic consumes exact phi partial sums over the horizon.
inline BoundReport make_bound_report(const ResolvedExperiment& exp, const ExperimentConfig& cfg,
                                     long horizon) {
    BoundFormula formula = cfg.formula;
    if (formula == BoundFormula::automatic) {
        formula = cfg.theta == 1.0 ? BoundFormula::theta1 : BoundFormula::exp_phi;
    }

    BoundParams params;
    params.theta = cfg.theta;
    params.alpha = exp.certificate.alpha;
    params.sigma2 = exp.certificate.sigma2;
    params.eta = exp.certificate.eta;
    params.delta = cfg.delta;

    BoundReport report;
    report.checkpoints = exp.checkpoints;
    report.variant = cfg.variant;

    const double r1 = std::visit([&](const auto& fam) { return fam.norm(exp.w1 - exp.wstar); },
                                 exp.family);
    for (long t : exp.checkpoints) {
        report.init_bounds.push_back(init_bound(t, cfg.theta, params.alpha, r1, cfg.variant));
    }

    switch (formula) {
        case BoundFormula::exp_phi: {
            const MixingProfile profile = compute_mixing_profile(exp.chain, cfg.mixing_horizon);
            params.envelope = fit_exponential_envelope(profile.phi);
            report.formula = Formula::thm1_phi;
            for (long t : exp.checkpoints) {
                report.samp_bounds_sq.push_back(samp_bound_exp_phi(t, params));
            }
            break;
        }
        case BoundFormula::exp_beta: {
            const MixingProfile profile = compute_mixing_profile(exp.chain, cfg.mixing_horizon);
            params.envelope = fit_exponential_envelope(profile.beta);
            report.formula = Formula::thm_beta;
            for (long t : exp.checkpoints) {
                report.samp_bounds_sq.push_back(samp_bound_exp_beta(t, params));
            }
            break;
        }
        case BoundFormula::theta1: {
            const MixingProfile profile = compute_mixing_profile(exp.chain, cfg.mixing_horizon);
            params.envelope = fit_exponential_envelope(profile.phi);
            report.formula = Formula::prop_theta1;
            for (long t : exp.checkpoints) {
                report.samp_bounds_sq.push_back(samp_bound_theta1(t, params));
            }
            break;
        }
        case BoundFormula::generic: {
            const std::vector<double> phi = phi_coefficients(exp.chain, horizon);
            report.formula = Formula::generic_partial_sum;
            for (long t : exp.checkpoints) {
                report.samp_bounds_sq.push_back(samp_bound_generic(
                    t, cfg.theta, params.alpha, params.sigma2, params.eta, cfg.delta,
                    partial_sum(phi, t)));
            }
            break;
        }
        case BoundFormula::automatic:
            throw ConfigError("bound formula failed to resolve");
    }
    return report;
}

} // namespace ssmgd
