#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ssmgd/errors.hpp"
#include "ssmgd/rng.hpp"

namespace ssmgd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace detail {

inline void check_stochastic(const MatrixXd& transition, double row_tol) {
    if (transition.rows() != transition.cols() || transition.rows() < 1) {
        throw NonStochastic("transition matrix must be square and non-empty");
    }
    for (Eigen::Index i = 0; i < transition.rows(); ++i) {
        if (transition.row(i).minCoeff() < -1e-15) {
            throw NonStochastic("negative transition probability in row " + std::to_string(i));
        }
        if (std::abs(transition.row(i).sum() - 1.0) > row_tol) {
            throw NonStochastic("row " + std::to_string(i) + " does not sum to 1");
        }
    }
}

inline std::uint64_t fingerprint_doubles(std::uint64_t h, const double* data, std::size_t n) {
    // FNV-1a over the raw bit patterns.
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &data[i], sizeof bits);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffULL;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

} // namespace detail

/// Solve rho = rho * P for a row-stochastic P. Direct least-squares solve of
/// the (P^T - I) system with a normalization row; power iteration takes over
/// for large chains. Throws NoUniqueStationary when the fixed point is not
/// unique (reducible chain) or the solve does not meet the residual target.
inline VectorXd stationary_distribution(const MatrixXd& transition) {
    detail::check_stochastic(transition, 1e-9);
    const Eigen::Index n = transition.rows();

    VectorXd rho;
    if (n <= 1000) {
        MatrixXd shifted = transition.transpose() - MatrixXd::Identity(n, n);
        if (n > 1) {
            Eigen::FullPivLU<MatrixXd> lu(shifted);
            lu.setThreshold(1e-9);
            if (lu.rank() < n - 1) {
                throw NoUniqueStationary("transition matrix has multiple stationary distributions");
            }
        }
        MatrixXd system(n + 1, n);
        system.topRows(n) = shifted;
        system.row(n).setOnes();
        VectorXd rhs = VectorXd::Zero(n + 1);
        rhs(n) = 1.0;
        rho = system.colPivHouseholderQr().solve(rhs);
    } else {
        rho = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
        for (int iter = 0; iter < 1000000; ++iter) {
            VectorXd next = transition.transpose() * rho;
            next /= next.sum();
            const double change = (next - rho).lpNorm<1>();
            rho = std::move(next);
            if (change < 1e-14) break;
        }
    }

    rho = rho.cwiseMax(0.0);
    rho /= rho.sum();
    if ((transition.transpose() * rho - rho).lpNorm<1>() > 1e-10) {
        throw NoUniqueStationary("stationary solve did not converge to the residual target");
    }
    return rho;
}

/// Finite-state Markov chain at stationarity: row-stochastic transition
/// matrix plus its invariant distribution. Immutable after construction and
/// safe to share across concurrent trials.
class ChainModel {
public:
    static ChainModel from_transition(MatrixXd transition) {
        VectorXd rho = stationary_distribution(transition);
        return ChainModel(std::move(transition), std::move(rho));
    }

    /// For constructors that know the stationary distribution in closed form.
    static ChainModel from_parts(MatrixXd transition, VectorXd stationary) {
        return ChainModel(std::move(transition), std::move(stationary));
    }

    Eigen::Index n_states() const { return transition_.rows(); }
    const MatrixXd& transition() const { return transition_; }
    const VectorXd& stationary() const { return stationary_; }
    std::uint64_t fingerprint() const { return fingerprint_; }

    /// Cumulative transition probabilities of one row (for sampling).
    std::span<const double> row_cdf(Eigen::Index state) const {
        return {row_cdf_.data() + state * n_states(), static_cast<std::size_t>(n_states())};
    }
    std::span<const double> stationary_cdf() const {
        return {stationary_cdf_.data(), static_cast<std::size_t>(n_states())};
    }

    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < n_states(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < n_states(); ++j) row.push_back(transition_(i, j));
            rows.push_back(std::move(row));
        }
        nlohmann::json stat = nlohmann::json::array();
        for (Eigen::Index i = 0; i < n_states(); ++i) stat.push_back(stationary_(i));
        return {{"n_states", n_states()}, {"transition", std::move(rows)}, {"stationary", std::move(stat)}};
    }

    static ChainModel from_json(const nlohmann::json& doc) {
        const auto n = doc.at("n_states").get<Eigen::Index>();
        const auto& rows = doc.at("transition");
        const auto& stat = doc.at("stationary");
        if (static_cast<Eigen::Index>(rows.size()) != n || static_cast<Eigen::Index>(stat.size()) != n) {
            throw DomainError("chain document is inconsistent with n_states");
        }
        MatrixXd transition(n, n);
        VectorXd stationary(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (static_cast<Eigen::Index>(rows[i].size()) != n) {
                throw DomainError("ragged transition matrix in chain document");
            }
            for (Eigen::Index j = 0; j < n; ++j) transition(i, j) = rows[i][j].get<double>();
            stationary(i) = stat[i].get<double>();
        }
        return from_parts(std::move(transition), std::move(stationary));
    }

private:
    ChainModel(MatrixXd transition, VectorXd stationary)
        : transition_(std::move(transition)), stationary_(std::move(stationary)) {
        detail::check_stochastic(transition_, 1e-12);
        const Eigen::Index n = transition_.rows();
        if (stationary_.size() != n) {
            throw DomainError("stationary distribution size does not match the transition matrix");
        }
        if (stationary_.minCoeff() < -1e-15 || std::abs(stationary_.sum() - 1.0) > 1e-12) {
            throw DomainError("stationary vector is not a probability distribution");
        }
        if ((transition_.transpose() * stationary_ - stationary_).lpNorm<1>() > 1e-10) {
            throw DomainError("stationary vector is not left-fixed by the transition matrix");
        }

        row_cdf_.resize(static_cast<std::size_t>(n) * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double acc = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                acc += transition_(i, j);
                row_cdf_[i * n + j] = acc;
            }
            row_cdf_[i * n + n - 1] = 1.0;
        }
        stationary_cdf_.resize(n);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            acc += stationary_(i);
            stationary_cdf_[i] = acc;
        }
        stationary_cdf_[n - 1] = 1.0;

        std::uint64_t h = 0xcbf29ce484222325ULL;
        h = detail::fingerprint_doubles(h, transition_.data(), static_cast<std::size_t>(n) * n);
        h = detail::fingerprint_doubles(h, stationary_.data(), static_cast<std::size_t>(n));
        fingerprint_ = h;
    }

    MatrixXd transition_;
    VectorXd stationary_;
    std::vector<double> row_cdf_;
    std::vector<double> stationary_cdf_;
    std::uint64_t fingerprint_ = 0;
};

/// Two-state chain [[1-p, p], [q, 1-q]]; mixes geometrically with factor
/// |1 - p - q| and has stationary distribution (q, p) / (p + q).
inline ChainModel build_two_state(double p, double q) {
    if (!(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0)) {
        throw DomainError("two-state chain needs p, q in (0,1)");
    }
    MatrixXd transition(2, 2);
    transition << 1.0 - p, p, q, 1.0 - q;
    VectorXd stationary(2);
    stationary << q / (p + q), p / (p + q);
    return ChainModel::from_parts(std::move(transition), std::move(stationary));
}

/// Lazy random walk on an n-cycle: hold with probability h, step to either
/// neighbour with (1-h)/2 each. Doubly stochastic, so stationary is uniform;
/// h and n tune the mixing rate.
inline ChainModel build_cycle_walk(Eigen::Index n, double h) {
    if (n < 3) throw DomainError("cycle walk needs at least 3 states");
    if (!(h > 0.0 && h < 1.0)) throw DomainError("cycle walk needs holding probability in (0,1)");
    MatrixXd transition = MatrixXd::Zero(n, n);
    const double move = (1.0 - h) / 2.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        transition(i, i) = h;
        transition(i, (i + 1) % n) += move;
        transition(i, (i + n - 1) % n) += move;
    }
    return ChainModel::from_parts(std::move(transition), VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

/// Truncated renewal chain on {0..M-1}: states above 0 step down
/// deterministically, state 0 jumps to j with probability proportional to
/// (j+1)^-(k+2). Heavy regeneration tails make the dependence decay
/// polynomially over the pre-truncation horizon.
inline ChainModel build_renewal_tail(double k, Eigen::Index m) {
    if (!(k > 0.0)) throw DomainError("renewal chain needs tail exponent k > 0");
    if (m < 2) throw DomainError("renewal chain needs at least 2 states");
    MatrixXd transition = MatrixXd::Zero(m, m);
    VectorXd weights(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        weights(j) = std::pow(static_cast<double>(j + 1), -(k + 2.0));
    }
    transition.row(0) = (weights / weights.sum()).transpose();
    for (Eigen::Index i = 1; i < m; ++i) transition(i, i - 1) = 1.0;
    return ChainModel::from_transition(std::move(transition));
}

/// Degenerate chain with independent draws: every row equals rho, so all
/// mixing coefficients vanish identically.
inline ChainModel build_iid(VectorXd rho) {
    if (rho.size() < 1 || rho.minCoeff() < 0.0 || std::abs(rho.sum() - 1.0) > 1e-12) {
        throw DomainError("iid chain needs a valid probability distribution");
    }
    MatrixXd transition(rho.size(), rho.size());
    for (Eigen::Index i = 0; i < rho.size(); ++i) transition.row(i) = rho.transpose();
    return ChainModel::from_parts(std::move(transition), std::move(rho));
}

/// One sampled path of state indices; regeneration with the same seed
/// reproduces the identical sequence.
struct PathSample {
    std::vector<std::int32_t> states;
    std::uint64_t seed = 0;
    std::uint64_t chain_fingerprint = 0;

    Eigen::Index length() const { return static_cast<Eigen::Index>(states.size()); }
};

/// Draw z_1 from the stationary distribution and advance with the row CDFs.
inline PathSample sample_stationary_path(const ChainModel& chain, Eigen::Index horizon,
                                         std::uint64_t seed) {
    if (horizon < 1) throw DomainError("path horizon must be at least 1");
    PathSample path;
    path.seed = seed;
    path.chain_fingerprint = chain.fingerprint();
    path.states.resize(horizon);

    Rng gen(seed);
    auto state = static_cast<std::int32_t>(sample_cdf(chain.stationary_cdf(), uniform01(gen)));
    path.states[0] = state;
    for (Eigen::Index t = 1; t < horizon; ++t) {
        state = static_cast<std::int32_t>(sample_cdf(chain.row_cdf(state), uniform01(gen)));
        path.states[t] = state;
    }
    return path;
}

} // namespace ssmgd
