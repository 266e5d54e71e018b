#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssmgd/bounds.hpp"
#include "ssmgd/chain.hpp"
#include "ssmgd/descent.hpp"
#include "ssmgd/errors.hpp"
#include "ssmgd/oracle.hpp"

namespace ssmgd {

/// Which closed-form sampling bound an experiment reports. `automatic`
/// resolves to prop_theta1 at theta = 1 and thm1_phi otherwise.
enum class BoundFormula { automatic, exp_phi, exp_beta, theta1, generic };

inline BoundFormula bound_formula_from_string(const std::string& name) {
    if (name == "auto") return BoundFormula::automatic;
    if (name == "exp-phi") return BoundFormula::exp_phi;
    if (name == "exp-beta") return BoundFormula::exp_beta;
    if (name == "theta1") return BoundFormula::theta1;
    if (name == "generic") return BoundFormula::generic;
    throw ConfigError("unknown bound formula: " + name);
}

/// Declarative experiment description, loadable from JSON. Chain and family
/// parameters are kept as raw JSON blocks and instantiated on demand.
struct ExperimentConfig {
    std::string chain_kind;
    nlohmann::json chain_params;
    std::string family_kind;
    nlohmann::json family_params;

    double theta = 0.75;
    long horizon = 10000;
    long trials = 100;
    double delta = 0.1;
    std::uint64_t seed = 1;
    std::vector<long> checkpoints;      // empty: log-spaced defaults
    Variant variant = Variant::conservative;
    BoundFormula formula = BoundFormula::automatic;
    double w1_offset = 1.0;
    long mixing_horizon = 50;
    long fit_lo = 1000;
    long fit_hi = 0;                    // 0: horizon
    std::optional<std::string> out;
    std::vector<double> sweep_thetas;
    std::vector<double> sweep_ks;

    void validate() const {
        if (trials < 1) throw ConfigError("trials must be at least 1");
        if (horizon < 1) throw ConfigError("horizon must be at least 1");
        if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
        if (!(theta > 0.5 && theta <= 1.0)) throw ConfigError("theta must lie in (1/2, 1]");
        if (mixing_horizon < 1) throw ConfigError("mixing_horizon must be at least 1");
        long previous = 0;
        for (long t : checkpoints) {
            if (t <= previous || t > horizon) {
                throw ConfigError("checkpoints must be sorted, positive and within the horizon");
            }
            previous = t;
        }
    }

    std::vector<long> resolved_checkpoints() const {
        return checkpoints.empty() ? default_checkpoints(horizon) : checkpoints;
    }

    long resolved_fit_hi() const { return fit_hi > 0 ? fit_hi : horizon; }

    static ExperimentConfig from_json(const nlohmann::json& doc);
    static ExperimentConfig from_file(const std::string& path);
};

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
    ExperimentConfig cfg;
    try {
        const auto& chain = doc.at("chain");
        cfg.chain_kind = chain.at("kind").get<std::string>();
        cfg.chain_params = chain.value("params", nlohmann::json::object());
        const auto& family = doc.at("family");
        cfg.family_kind = family.at("kind").get<std::string>();
        cfg.family_params = family.value("params", nlohmann::json::object());

        cfg.theta = doc.at("theta").get<double>();
        cfg.horizon = doc.at("horizon").get<long>();
        cfg.trials = doc.at("trials").get<long>();
        cfg.delta = doc.at("delta").get<double>();
        cfg.seed = doc.at("seed").get<std::uint64_t>();

        if (doc.contains("checkpoints")) {
            cfg.checkpoints = doc.at("checkpoints").get<std::vector<long>>();
        }
        if (doc.contains("variant")) {
            cfg.variant = variant_from_string(doc.at("variant").get<std::string>());
        }
        if (doc.contains("formula")) {
            cfg.formula = bound_formula_from_string(doc.at("formula").get<std::string>());
        }
        cfg.w1_offset = doc.value("w1_offset", 1.0);
        cfg.mixing_horizon = doc.value("mixing_horizon", 50L);
        if (doc.contains("fit_range")) {
            const auto range = doc.at("fit_range").get<std::vector<long>>();
            if (range.size() != 2) throw ConfigError("fit_range must be [t_lo, t_hi]");
            cfg.fit_lo = range[0];
            cfg.fit_hi = range[1];
        }
        if (doc.contains("out")) cfg.out = doc.at("out").get<std::string>();
        if (doc.contains("sweep")) {
            const auto& sweep = doc.at("sweep");
            if (sweep.contains("theta")) cfg.sweep_thetas = sweep.at("theta").get<std::vector<double>>();
            if (sweep.contains("k")) cfg.sweep_ks = sweep.at("k").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(doc);
}

/// Instantiate the chain named by the config.
inline ChainModel build_chain(const ExperimentConfig& cfg) {
    const nlohmann::json& p = cfg.chain_params;
    try {
        if (cfg.chain_kind == "two_state") {
            return build_two_state(p.at("p").get<double>(), p.at("q").get<double>());
        }
        if (cfg.chain_kind == "cycle_walk") {
            return build_cycle_walk(p.at("n").get<Eigen::Index>(), p.at("h").get<double>());
        }
        if (cfg.chain_kind == "renewal_tail") {
            return build_renewal_tail(p.at("k").get<double>(), p.at("M").get<Eigen::Index>());
        }
        if (cfg.chain_kind == "iid") {
            const auto weights = p.at("rho").get<std::vector<double>>();
            return build_iid(Eigen::Map<const VectorXd>(weights.data(),
                                                        static_cast<Eigen::Index>(weights.size())));
        }
        if (cfg.chain_kind == "matrix") {
            const auto rows = p.at("transition").get<std::vector<std::vector<double>>>();
            const auto n = static_cast<Eigen::Index>(rows.size());
            MatrixXd transition(n, n);
            for (Eigen::Index i = 0; i < n; ++i) {
                if (static_cast<Eigen::Index>(rows[i].size()) != n) {
                    throw ConfigError("transition matrix must be square");
                }
                for (Eigen::Index j = 0; j < n; ++j) transition(i, j) = rows[i][j];
            }
            return ChainModel::from_transition(std::move(transition));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad chain params: " + std::string(e.what()));
    }
    throw ConfigError("unknown chain kind: " + cfg.chain_kind);
}

/// Instantiate the gradient family; n_states must agree with the chain.
inline GradientFamily build_family(const ExperimentConfig& cfg, const ChainModel& chain) {
    const nlohmann::json& p = cfg.family_params;
    try {
        if (cfg.family_kind == "random_quadratic") {
            return build_random_quadratic(p.at("d").get<Eigen::Index>(), chain.n_states(),
                                          p.at("kappa").get<double>(), p.at("eta").get<double>(),
                                          p.value("noise_scale", 1.0),
                                          mix_seed(cfg.seed, 0x5eedfa111ULL));
        }
        if (cfg.family_kind == "kernel") {
            const auto m = p.at("m").get<Eigen::Index>();
            if (m != chain.n_states()) {
                throw ConfigError("kernel grid size must equal the chain's state count");
            }
            return build_kernel_family(m, p.at("bandwidth").get<double>(),
                                       p.at("lambda").get<double>(),
                                       label_rule_from_string(p.value("label_rule", "sine_noise")),
                                       mix_seed(cfg.seed, 0x5eedfa222ULL));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad family params: " + std::string(e.what()));
    }
    throw ConfigError("unknown family kind: " + cfg.family_kind);
}

} // namespace ssmgd
