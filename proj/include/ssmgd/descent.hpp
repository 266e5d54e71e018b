#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ssmgd/chain.hpp"
#include "ssmgd/errors.hpp"

namespace ssmgd {

/// Decaying step sizes gamma_t = 1 / (eta t^theta) with theta in (1/2, 1].
struct Schedule {
    double theta = 0.75;
    double eta = 1.0;

    Schedule(double theta_, double eta_) : theta(theta_), eta(eta_) {
        if (!(theta > 0.5 && theta <= 1.0)) {
            throw DomainError("schedule exponent theta must lie in (1/2, 1]");
        }
        if (!(eta > 0.0)) throw DomainError("schedule needs eta > 0");
    }

    /// Test hook: skips validation (eta = inf yields the zero-step variant).
    static Schedule unchecked(double theta_, double eta_) {
        Schedule s;
        s.theta = theta_;
        s.eta = eta_;
        return s;
    }

    double step(long t) const { return 1.0 / (eta * std::pow(static_cast<double>(t), theta)); }

private:
    Schedule() = default;
};

inline double step_size(double theta, double eta, long t) {
    if (t < 1) throw DomainError("step size is defined for t >= 1");
    return Schedule(theta, eta).step(t);
}

/// Per-checkpoint record of one gradient-descent run. All norms are taken in
/// the family's own metric. total_err = |w_t - w*|, init_err = |u_t| for the
/// deterministic contraction of w_1 - w*, samp_err = |v_t| for the
/// accumulated noise, with w_t - w* = u_t + v_t holding exactly up to
/// floating-point drift (tracked in max_decomposition_defect).
struct Trajectory {
    std::vector<long> checkpoints;
    std::vector<double> total_err;
    std::vector<double> init_err;
    std::vector<double> samp_err;
    std::vector<double> step_sizes;
    double r1_norm = 0.0;
    double max_decomposition_defect = 0.0;
};

namespace detail {

inline void check_checkpoints(std::span<const long> checkpoints, Eigen::Index horizon) {
    if (checkpoints.empty()) throw DomainError("at least one checkpoint is required");
    long previous = 0;
    for (long t : checkpoints) {
        if (t <= previous) throw DomainError("checkpoints must be strictly increasing");
        if (t < 1 || t > horizon) throw DomainError("checkpoint outside [1, horizon]");
        previous = t;
    }
}

/// Shared recursion. Maintains the iterate w and the initial-error part
///   u_{t+1} = (I - gamma_t A(z_t)) u_t,        u_1 = w_1 - w*.
/// With track_noise the sampling part is recursed independently,
///   v_{t+1} = (I - gamma_t A(z_t)) v_t - gamma_t (A(z_t) w* + B(z_t)),
/// and the defect |(w - w*) - (u + v)| is recorded; otherwise the sampling
/// error is read off the exact identity v = (w - w*) - u.
template <class Family>
Trajectory iterate(const Family& family, const PathSample& path, const Schedule& schedule,
                   const VectorXd& w1, const VectorXd& wstar, std::span<const long> checkpoints,
                   bool track_noise) {
    if (w1.size() != family.dim() || wstar.size() != family.dim()) {
        throw DimensionMismatch("start point does not match the family dimension");
    }
    check_checkpoints(checkpoints, path.length());
    for (std::int32_t z : path.states) {
        if (z < 0 || z >= family.n_states()) {
            throw DimensionMismatch("path state outside the family's state set");
        }
    }

    // Noise-at-optimum vectors Y_z = A(z) w* + B(z), hoisted out of the loop.
    std::vector<VectorXd> noise;
    if (track_noise) {
        noise.reserve(family.n_states());
        for (Eigen::Index z = 0; z < family.n_states(); ++z) {
            noise.push_back(family.gradient(z, wstar));
        }
    }

    Trajectory out;
    out.r1_norm = family.norm(w1 - wstar);

    VectorXd w = w1;
    VectorXd u = w1 - wstar;
    VectorXd v = VectorXd::Zero(family.dim());

    const long last = checkpoints.back();
    std::size_t next_cp = 0;
    for (long t = 1; t <= last; ++t) {
        if (t == checkpoints[next_cp]) {
            const VectorXd residual = w - wstar;
            out.checkpoints.push_back(t);
            out.total_err.push_back(family.norm(residual));
            out.init_err.push_back(family.norm(u));
            if (track_noise) {
                out.samp_err.push_back(family.norm(v));
                out.max_decomposition_defect =
                    std::max(out.max_decomposition_defect, family.norm(residual - u - v));
            } else {
                out.samp_err.push_back(family.norm(residual - u));
            }
            out.step_sizes.push_back(schedule.step(t));
            ++next_cp;
            if (next_cp == checkpoints.size()) break;
        }

        const Eigen::Index z = path.states[static_cast<std::size_t>(t - 1)];
        const double gamma = schedule.step(t);
        w -= gamma * family.gradient(z, w);
        u -= gamma * family.linear_apply(z, u);
        if (track_noise) {
            v -= gamma * family.linear_apply(z, v) + gamma * noise[static_cast<std::size_t>(z)];
        }

        if ((t & 1023) == 0 && !std::isfinite(w.squaredNorm())) {
            throw NonFinite("iterate overflowed", t);
        }
    }
    if (!std::isfinite(out.total_err.back())) {
        throw NonFinite("iterate overflowed", last);
    }
    return out;
}

} // namespace detail

/// Run w_{t+1} = w_t - gamma_t grad_{z_t}(w_t) along the sampled path,
/// recording errors at the given checkpoints. The sampling error is derived
/// from the identity v_t = (w_t - w*) - u_t.
template <class Family>
Trajectory run(const Family& family, const PathSample& path, const Schedule& schedule,
               const VectorXd& w1, const VectorXd& wstar, std::span<const long> checkpoints) {
    return detail::iterate(family, path, schedule, w1, wstar, checkpoints, false);
}

/// Same run, but the sampling error is maintained by its own recursion and
/// the decomposition identity w_t - w* = u_t + v_t is checked explicitly.
template <class Family>
Trajectory run_decomposed(const Family& family, const PathSample& path, const Schedule& schedule,
                          const VectorXd& w1, const VectorXd& wstar,
                          std::span<const long> checkpoints) {
    return detail::iterate(family, path, schedule, w1, wstar, checkpoints, true);
}

/// Log-spaced default checkpoints: powers of two up to the horizon, plus the
/// endpoints. Keeps log-log rate fits well conditioned.
inline std::vector<long> default_checkpoints(long horizon) {
    if (horizon < 1) throw DomainError("horizon must be at least 1");
    std::vector<long> cps;
    for (long t = 1; t <= horizon && t > 0; t *= 2) cps.push_back(t);
    if (cps.back() != horizon) cps.push_back(horizon);
    return cps;
}

} // namespace ssmgd
