#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssmgd/config.hpp"
#include "ssmgd/lemma_audit.hpp"
#include "ssmgd/montecarlo.hpp"

namespace ssmgd {

namespace detail {

/// 17 significant digits: enough to reproduce any double exactly.
inline std::string fmt(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return buffer;
}

inline std::string fmt(long value) { return std::to_string(value); }

class OutputTarget {
public:
    explicit OutputTarget(const std::optional<std::string>& path) {
        if (path) {
            file_.open(*path);
            if (!file_) throw ConfigError("cannot open output file: " + *path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

struct CliOverrides {
    std::optional<double> theta;
    std::optional<long> trials;
    std::optional<std::uint64_t> seed;
    std::optional<double> delta;
    std::optional<std::string> out;
    std::optional<std::string> variant;

    void apply(ExperimentConfig& cfg) const {
        if (theta) cfg.theta = *theta;
        if (trials) cfg.trials = *trials;
        if (seed) cfg.seed = *seed;
        if (delta) cfg.delta = *delta;
        if (out) cfg.out = *out;
        if (variant) cfg.variant = variant_from_string(*variant);
        cfg.validate();
    }
};

inline ExperimentConfig load_config(const std::string& path, const CliOverrides& overrides) {
    ExperimentConfig cfg = ExperimentConfig::from_file(path);
    overrides.apply(cfg);
    return cfg;
}

inline int cmd_chains(const ExperimentConfig& cfg) {
    OutputTarget out(cfg.out);
    out.stream() << build_chain(cfg).to_json().dump() << "\n";
    return 0;
}

inline int cmd_mixing(const ExperimentConfig& cfg) {
    const ChainModel chain = build_chain(cfg);
    const MixingProfile profile = compute_mixing_profile(chain, cfg.mixing_horizon);

    auto fit_or_null = [](auto fitter, const std::vector<double>& seq) -> nlohmann::json {
        try {
            const auto env = fitter(seq);
            if constexpr (requires { env.D; }) {
                return {{"D", env.D}, {"r", env.r}};
            } else {
                return {{"b", env.b}, {"k", env.k}};
            }
        } catch (const FitError&) {
            return nullptr;
        }
    };
    const nlohmann::json header = {
        {"phi_exp", fit_or_null([](const auto& s) { return fit_exponential_envelope(s); }, profile.phi)},
        {"beta_exp", fit_or_null([](const auto& s) { return fit_exponential_envelope(s); }, profile.beta)},
        {"phi_poly", fit_or_null([](const auto& s) { return fit_polynomial_envelope(s); }, profile.phi)},
        {"beta_poly", fit_or_null([](const auto& s) { return fit_polynomial_envelope(s); }, profile.beta)},
    };

    std::optional<ExponentialEnvelope> phi_env, beta_env;
    try {
        phi_env = fit_exponential_envelope(profile.phi);
        beta_env = fit_exponential_envelope(profile.beta);
    } catch (const FitError&) {
    }

    OutputTarget out(cfg.out);
    std::ostream& os = out.stream();
    os << "# " << header.dump() << "\n";
    os << "t,phi,beta,phi_envelope,beta_envelope\n";
    for (long t = 1; t <= profile.horizon; ++t) {
        os << t << ',' << fmt(profile.phi_at(t)) << ',' << fmt(profile.beta_at(t)) << ','
           << (phi_env ? fmt(phi_env->value_at(t)) : "nan") << ','
           << (beta_env ? fmt(beta_env->value_at(t)) : "nan") << "\n";
    }
    return 0;
}

inline int cmd_bounds(const ExperimentConfig& cfg) {
    const ResolvedExperiment exp = resolve_experiment(cfg);
    const BoundReport report = make_bound_report(exp, cfg, cfg.horizon);

    OutputTarget out(cfg.out);
    std::ostream& os = out.stream();
    os << "# " << nlohmann::json{{"certificate", exp.certificate.to_json()}}.dump() << "\n";
    os << "t,init_bound,samp_bound_sq,variant,formula\n";
    for (std::size_t c = 0; c < report.checkpoints.size(); ++c) {
        os << report.checkpoints[c] << ',' << fmt(report.init_bounds[c]) << ','
           << fmt(report.samp_bounds_sq[c]) << ',' << to_string(report.variant) << ','
           << to_string(report.formula) << "\n";
    }
    return 0;
}

inline int cmd_run(const ExperimentConfig& cfg) {
    const ResolvedExperiment exp = resolve_experiment(cfg);
    const PathSample path =
        sample_stationary_path(exp.chain, cfg.horizon, mix_seed(exp.base_seed, 0));
    const Trajectory traj = std::visit(
        [&](const auto& fam) {
            return run_decomposed(fam, path, exp.schedule, exp.w1, exp.wstar, exp.checkpoints);
        },
        exp.family);

    OutputTarget out(cfg.out);
    std::ostream& os = out.stream();
    os << "t,total_err,init_err,samp_err,step_size\n";
    for (std::size_t c = 0; c < traj.checkpoints.size(); ++c) {
        os << traj.checkpoints[c] << ',' << fmt(traj.total_err[c]) << ',' << fmt(traj.init_err[c])
           << ',' << fmt(traj.samp_err[c]) << ',' << fmt(traj.step_sizes[c]) << "\n";
    }
    return 0;
}

inline int cmd_monte_carlo(const ExperimentConfig& cfg) {
    const ResolvedExperiment exp = resolve_experiment(cfg);
    const MonteCarloResult result = monte_carlo(exp, cfg.horizon);
    const BoundReport bounds = make_bound_report(exp, cfg, cfg.horizon);
    const CoverageReport cov = coverage(result.samp2_per_trial, exp.checkpoints,
                                        bounds.samp_bounds_sq, cfg.delta, bounds.variant,
                                        bounds.formula);

    OutputTarget out(cfg.out);
    std::ostream& os = out.stream();
    os << "t,median_err,q_err,mean_err,median_samp2,q_samp2,init_bound,samp_bound,coverage\n";
    const QuantileCurve& curve = result.curve;
    for (std::size_t c = 0; c < curve.checkpoints.size(); ++c) {
        os << curve.checkpoints[c] << ',' << fmt(curve.median_total[c]) << ','
           << fmt(curve.q_total[c]) << ',' << fmt(curve.mean_total[c]) << ','
           << fmt(curve.median_samp2[c]) << ',' << fmt(curve.q_samp2[c]) << ','
           << fmt(bounds.init_bounds[c]) << ',' << fmt(bounds.samp_bounds_sq[c]) << ','
           << fmt(cov.fractions[c]) << "\n";
    }
    return cov.min_fraction() >= 1.0 - cfg.delta ? 0 : 1;
}

inline int cmd_sweep(const ExperimentConfig& cfg) {
    if (cfg.sweep_thetas.empty() && cfg.sweep_ks.empty()) {
        throw ConfigError("sweep needs a sweep.theta or sweep.k grid in the config");
    }
    OutputTarget out(cfg.out);
    std::ostream& os = out.stream();
    os << "kind,value,slope,intercept,r_squared,theoretical,abs_error\n";

    auto emit = [&](const std::string& kind, double value, const ExperimentConfig& point,
                    double theoretical) {
        const ResolvedExperiment exp = resolve_experiment(point);
        const MonteCarloResult result = monte_carlo(exp, point.horizon);
        const RateFit fit = rate_fit(exp.checkpoints, result.curve.median_total, point.fit_lo,
                                     point.resolved_fit_hi());
        os << kind << ',' << fmt(value) << ',' << fmt(fit.slope) << ',' << fmt(fit.intercept)
           << ',' << fmt(fit.r_squared) << ',' << fmt(theoretical) << ','
           << fmt(std::abs(fit.slope - theoretical)) << "\n";
    };

    for (double theta : cfg.sweep_thetas) {
        ExperimentConfig point = cfg;
        point.theta = theta;
        point.validate();
        emit("theta", theta, point, -theta / 2.0);
    }
    for (double k : cfg.sweep_ks) {
        ExperimentConfig point = cfg;
        point.chain_kind = "renewal_tail";
        point.chain_params = {{"k", k}, {"M", cfg.chain_params.value("M", 50L)}};
        point.validate();
        emit("k", k, point, poly_rate_exponent(point.theta, k).exponent);
    }
    return 0;
}

inline int cmd_verify_lemmas(const std::optional<std::string>& out_path) {
    const LemmaAuditReport report = verify_lemmas(LemmaGrid::default_grid());

    OutputTarget out(out_path);
    std::ostream& os = out.stream();
    os << "lemma,variant,theta,alpha,i,t,exact,bound,holds\n";
    for (const AuditRow& row : report.rows) {
        os << row.lemma << ',' << to_string(row.variant) << ',' << fmt(row.theta) << ','
           << fmt(row.alpha) << ',' << row.i << ',' << row.t << ',' << fmt(row.exact) << ','
           << fmt(row.bound) << ',' << (row.holds ? "1" : "0") << "\n";
    }
    return report.conservative_violations() == 0 ? 0 : 1;
}

} // namespace detail

/// Entry point shared by the binary and the tests. args excludes argv[0].
/// Exit codes: 0 success, 1 assertion failure (empirical coverage below
/// 1 - delta, or a conservative-variant audit violation), 2 usage/config
/// error.
inline int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Markov-chain gradient descent laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    detail::CliOverrides overrides;

    auto add_common = [&](CLI::App* cmd, bool config_required) {
        auto* opt = cmd->add_option("--config", config_path, "experiment config (JSON)");
        if (config_required) opt->required();
        cmd->add_option_function<double>(
            "--theta", [&overrides](double v) { overrides.theta = v; }, "override theta");
        cmd->add_option_function<long>(
            "--trials", [&overrides](long v) { overrides.trials = v; }, "override trial count");
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&overrides](std::uint64_t v) { overrides.seed = v; }, "override base seed");
        cmd->add_option_function<double>(
            "--delta", [&overrides](double v) { overrides.delta = v; }, "override delta");
        cmd->add_option_function<std::string>(
            "--out", [&overrides](std::string v) { overrides.out = std::move(v); },
            "write output to this file instead of stdout");
        cmd->add_option_function<std::string>(
            "--variant", [&overrides](std::string v) { overrides.variant = std::move(v); },
            "bound variant: paper or conservative");
    };

    auto* chains = app.add_subcommand("chains", "build a chain and print its JSON document");
    add_common(chains, true);
    auto* mixing = app.add_subcommand("mixing", "exact mixing coefficients and envelopes (CSV)");
    add_common(mixing, true);
    auto* bounds = app.add_subcommand("bounds", "theoretical bound values per checkpoint (CSV)");
    add_common(bounds, true);
    auto* run = app.add_subcommand("run", "one gradient-descent trajectory (CSV)");
    add_common(run, true);
    auto* mc = app.add_subcommand("monte-carlo", "aggregate trials, bounds and coverage (CSV)");
    add_common(mc, true);
    auto* sweep = app.add_subcommand("sweep", "rate fits over theta or k grids (CSV)");
    add_common(sweep, true);
    auto* verify = app.add_subcommand("verify-lemmas", "audit the closed-form inequalities (CSV)");
    add_common(verify, false);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            // --help and friends.
            return app.exit(e);
        }
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (verify->parsed()) {
            return detail::cmd_verify_lemmas(overrides.out);
        }
        ExperimentConfig cfg = detail::load_config(config_path, overrides);
        if (chains->parsed()) return detail::cmd_chains(cfg);
        if (mixing->parsed()) return detail::cmd_mixing(cfg);
        if (bounds->parsed()) return detail::cmd_bounds(cfg);
        if (run->parsed()) return detail::cmd_run(cfg);
        if (mc->parsed()) return detail::cmd_monte_carlo(cfg);
        if (sweep->parsed()) return detail::cmd_sweep(cfg);
        std::cerr << "no subcommand selected\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace ssmgd
