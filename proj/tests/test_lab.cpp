#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ssmgd/config.hpp"
#include "ssmgd/montecarlo.hpp"

using namespace ssmgd;

namespace {

nlohmann::json base_config_json() {
    return nlohmann::json{
        {"chain", {{"kind", "two_state"}, {"params", {{"p", 0.25}, {"q", 0.25}}}}},
        {"family",
         {{"kind", "random_quadratic"},
          {"params", {{"d", 3}, {"kappa", 0.5}, {"eta", 2.0}, {"noise_scale", 1.0}}}}},
        {"theta", 0.75},
        {"horizon", 512},
        {"trials", 32},
        {"delta", 0.1},
        {"seed", 2024},
    };
}

} // namespace

TEST_CASE("order-statistic quantiles") {
    const std::vector<double> values{5.0, 1.0, 4.0, 2.0, 3.0};
    REQUIRE(quantile(values, 0.0) == 1.0);
    REQUIRE(quantile(values, 1.0) == 5.0);
    REQUIRE(quantile(values, 0.5) == 3.0);
    REQUIRE(quantile(values, 0.9) == 5.0);
    REQUIRE(quantile({7.5}, 0.5) == 7.5);
    REQUIRE_THROWS_AS(quantile({}, 0.5), DomainError);

    // Monotone in the level, so median <= (1-delta)-quantile for delta < 1/2.
    double previous = -1.0;
    for (double q : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const double value = quantile(values, q);
        REQUIRE(value >= previous);
        previous = value;
    }
}

TEST_CASE("rate fit recovers exact power laws") {
    std::vector<long> ts;
    std::vector<double> values;
    for (long t = 1; t <= 4096; t *= 2) {
        ts.push_back(t);
        values.push_back(3.0 * std::pow(static_cast<double>(t), -0.4));
    }
    const RateFit fit = rate_fit(ts, values, 1, 4096);
    REQUIRE(fit.slope == Catch::Approx(-0.4).margin(1e-10));
    REQUIRE(fit.intercept == Catch::Approx(std::log(3.0)).margin(1e-10));
    REQUIRE(fit.r_squared == Catch::Approx(1.0).margin(1e-10));

    const RateFit constant = rate_fit(ts, std::vector<double>(ts.size(), 2.0), 1, 4096);
    REQUIRE(constant.slope == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(constant.r_squared == 1.0);

    std::vector<double> with_zero = values;
    with_zero[3] = 0.0;
    REQUIRE_THROWS_AS(rate_fit(ts, with_zero, 1, 4096), FitError);
    REQUIRE_THROWS_AS(rate_fit(ts, values, 2000, 4096), FitError);
}

TEST_CASE("coverage fractions") {
    const std::vector<long> cps{1, 2};
    const std::vector<std::vector<double>> samples{{0.5, 2.0}, {0.7, 0.1}, {0.2, 0.3}};
    const CoverageReport all = coverage(samples, cps, {1.0, 3.0}, 0.1);
    REQUIRE(all.fractions == std::vector<double>{1.0, 1.0});

    const CoverageReport none = coverage(samples, cps, {0.0, 0.0}, 0.1);
    REQUIRE(none.fractions == std::vector<double>{0.0, 0.0});

    const CoverageReport mixed = coverage(samples, cps, {0.6, 0.2}, 0.1);
    REQUIRE(mixed.fractions[0] == Catch::Approx(2.0 / 3.0));
    REQUIRE(mixed.fractions[1] == Catch::Approx(1.0 / 3.0));
    REQUIRE(mixed.min_fraction() == Catch::Approx(1.0 / 3.0));

    REQUIRE_THROWS_AS(coverage(samples, cps, {1.0}, 0.1), DimensionMismatch);
}

TEST_CASE("monte carlo is deterministic in the base seed") {
    const ExperimentConfig cfg = ExperimentConfig::from_json(base_config_json());
    const ResolvedExperiment exp = resolve_experiment(cfg);
    const MonteCarloResult a = monte_carlo(exp, cfg.horizon);
    const MonteCarloResult b = monte_carlo(exp, cfg.horizon);
    REQUIRE(a.samp2_per_trial == b.samp2_per_trial);
    REQUIRE(a.curve.median_total == b.curve.median_total);
    REQUIRE(a.curve.q_samp2 == b.curve.q_samp2);

    nlohmann::json other = base_config_json();
    other["seed"] = 2025;
    const MonteCarloResult c =
        monte_carlo(resolve_experiment(ExperimentConfig::from_json(other)), cfg.horizon);
    REQUIRE(a.samp2_per_trial != c.samp2_per_trial);
}

TEST_CASE("monte carlo on a noiseless family has zero sampling curves") {
    nlohmann::json doc = base_config_json();
    doc["family"]["params"]["noise_scale"] = 0.0;
    doc["trials"] = 8;
    const ExperimentConfig cfg = ExperimentConfig::from_json(doc);
    const MonteCarloResult result = monte_carlo(resolve_experiment(cfg), cfg.horizon);
    for (const auto& row : result.samp2_per_trial) {
        for (double v : row) REQUIRE(v == 0.0);
    }
    for (double v : result.curve.q_samp2) REQUIRE(v == 0.0);
    for (double v : result.curve.median_samp) REQUIRE(v == 0.0);
}

TEST_CASE("single-trial aggregates equal the trial itself") {
    nlohmann::json doc = base_config_json();
    doc["trials"] = 1;
    const ExperimentConfig cfg = ExperimentConfig::from_json(doc);
    const ResolvedExperiment exp = resolve_experiment(cfg);
    const MonteCarloResult result = monte_carlo(exp, cfg.horizon);
    for (std::size_t c = 0; c < result.curve.checkpoints.size(); ++c) {
        REQUIRE(result.curve.median_total[c] == result.curve.q_total[c]);
        REQUIRE(result.curve.median_total[c] == result.curve.mean_total[c]);
        REQUIRE(result.curve.median_samp2[c] == result.samp2_per_trial[0][c]);
    }
}

TEST_CASE("quantile curves are monotone in delta") {
    const ExperimentConfig cfg = ExperimentConfig::from_json(base_config_json());
    ResolvedExperiment exp = resolve_experiment(cfg);
    const MonteCarloResult tight = monte_carlo(exp, cfg.horizon);
    exp.delta = 0.5;
    const MonteCarloResult loose = monte_carlo(exp, cfg.horizon);
    for (std::size_t c = 0; c < tight.curve.checkpoints.size(); ++c) {
        REQUIRE(loose.curve.q_total[c] <= tight.curve.q_total[c]);
        REQUIRE(tight.curve.median_total[c] <= tight.curve.q_total[c]);
    }
}

TEST_CASE("bound report resolves formulas") {
    const ExperimentConfig cfg = ExperimentConfig::from_json(base_config_json());
    const ResolvedExperiment exp = resolve_experiment(cfg);
    const BoundReport auto_report = make_bound_report(exp, cfg, cfg.horizon);
    REQUIRE(auto_report.formula == Formula::thm1_phi);
    REQUIRE(auto_report.checkpoints == exp.checkpoints);
    for (double b : auto_report.samp_bounds_sq) REQUIRE(b > 0.0);
    for (std::size_t c = 1; c < auto_report.init_bounds.size(); ++c) {
        REQUIRE(auto_report.init_bounds[c] <= auto_report.init_bounds[c - 1]);
    }

    ExperimentConfig generic = cfg;
    generic.formula = BoundFormula::generic;
    const BoundReport generic_report = make_bound_report(exp, generic, cfg.horizon);
    REQUIRE(generic_report.formula == Formula::generic_partial_sum);
    // Exact partial sums are below the envelope tail, so the generic bound
    // is at least as tight at every checkpoint (up to fit rounding scaled by
    // the bound prefactor).
    for (std::size_t c = 0; c < generic_report.samp_bounds_sq.size(); ++c) {
        REQUIRE(generic_report.samp_bounds_sq[c] <=
                auto_report.samp_bounds_sq[c] * (1.0 + 1e-13) + 1e-12);
    }

    nlohmann::json theta1 = base_config_json();
    theta1["theta"] = 1.0;
    const ExperimentConfig cfg1 = ExperimentConfig::from_json(theta1);
    const ResolvedExperiment exp1 = resolve_experiment(cfg1);
    REQUIRE(make_bound_report(exp1, cfg1, cfg1.horizon).formula == Formula::prop_theta1);
}

TEST_CASE("config parsing and validation") {
    REQUIRE_THROWS_AS(ExperimentConfig::from_file("/nonexistent/config.json"), ConfigError);

    nlohmann::json missing = base_config_json();
    missing.erase("theta");
    REQUIRE_THROWS_AS(ExperimentConfig::from_json(missing), ConfigError);

    nlohmann::json bad_delta = base_config_json();
    bad_delta["delta"] = 1.5;
    REQUIRE_THROWS_AS(ExperimentConfig::from_json(bad_delta), ConfigError);

    nlohmann::json bad_cps = base_config_json();
    bad_cps["checkpoints"] = {10, 5};
    REQUIRE_THROWS_AS(ExperimentConfig::from_json(bad_cps), ConfigError);

    nlohmann::json bad_chain = base_config_json();
    bad_chain["chain"]["kind"] = "unknown";
    REQUIRE_THROWS_AS(build_chain(ExperimentConfig::from_json(bad_chain)), ConfigError);

    nlohmann::json mismatched = base_config_json();
    mismatched["family"] = {{"kind", "kernel"},
                            {"params", {{"m", 5}, {"bandwidth", 0.3}, {"lambda", 0.1}}}};
    const ExperimentConfig cfg = ExperimentConfig::from_json(mismatched);
    REQUIRE_THROWS_AS(build_family(cfg, build_chain(cfg)), ConfigError);

    // theta = 1 needs alpha < 1/2 for the default bound formula.
    nlohmann::json theta1 = base_config_json();
    theta1["theta"] = 1.0;
    theta1["family"]["params"]["kappa"] = 1.5;
    REQUIRE_THROWS_AS(resolve_experiment(ExperimentConfig::from_json(theta1)), ConfigError);
}

TEST_CASE("SSMGD_THREADS caps the worker count") {
    setenv("SSMGD_THREADS", "3", 1);
    REQUIRE(max_threads() == 3);
    setenv("SSMGD_THREADS", "junk", 1);
    REQUIRE(max_threads() >= 1);
    unsetenv("SSMGD_THREADS");
    REQUIRE(max_threads() >= 1);

    // Thread count must not change the results.
    const ExperimentConfig cfg = ExperimentConfig::from_json(base_config_json());
    const ResolvedExperiment exp = resolve_experiment(cfg);
    setenv("SSMGD_THREADS", "1", 1);
    const MonteCarloResult serial = monte_carlo(exp, cfg.horizon);
    setenv("SSMGD_THREADS", "4", 1);
    const MonteCarloResult parallel = monte_carlo(exp, cfg.horizon);
    unsetenv("SSMGD_THREADS");
    REQUIRE(serial.samp2_per_trial == parallel.samp2_per_trial);
    REQUIRE(serial.curve.q_total == parallel.curve.q_total);
}

TEST_CASE("kernel families run through the harness") {
    nlohmann::json doc = base_config_json();
    doc["chain"] = {{"kind", "cycle_walk"}, {"params", {{"n", 8}, {"h", 0.4}}}};
    doc["family"] = {{"kind", "kernel"},
                     {"params",
                      {{"m", 8}, {"bandwidth", 0.3}, {"lambda", 0.1}, {"label_rule", "sine_noise"}}}};
    doc["trials"] = 8;
    doc["horizon"] = 256;
    const ExperimentConfig cfg = ExperimentConfig::from_json(doc);
    const ResolvedExperiment exp = resolve_experiment(cfg);
    REQUIRE(exp.certificate.kappa == Catch::Approx(0.1).margin(1e-12));
    const MonteCarloResult result = monte_carlo(exp, cfg.horizon);
    REQUIRE(result.max_decomposition_defect <= 1e-8 * std::max(1.0, result.r1_norm));
    for (double v : result.curve.mean_total) REQUIRE(v >= 0.0);
}
