#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "ssmgd/chain.hpp"
#include "ssmgd/errors.hpp"

namespace ssmgd {

/// Values below this are indistinguishable from zero in a total-variation
/// difference of doubles and are treated as exact zeros by the fitters.
inline constexpr double kMixingZero = 1e-14;

/// Total variation distance between two distributions on the same finite
/// set: sup_B |mu(B) - nu(B)| = half the l1 distance.
inline double tv_distance(const VectorXd& mu, const VectorXd& nu) {
    if (mu.size() != nu.size()) throw DomainError("tv_distance: distributions have different lengths");
    auto check = [](const VectorXd& v) {
        if (v.size() < 1 || v.minCoeff() < -1e-12 || std::abs(v.sum() - 1.0) > 1e-9) {
            throw DomainError("tv_distance: argument is not a probability distribution");
        }
    };
    check(mu);
    check(nu);
    return 0.5 * (mu - nu).lpNorm<1>();
}

/// Exact phi_t and beta_t sequences of a finite chain, indexed t = 1..horizon
/// (stored 0-based: phi[t-1] is phi_t).
struct MixingProfile {
    std::vector<double> phi;
    std::vector<double> beta;
    Eigen::Index horizon = 0;

    double phi_at(Eigen::Index t) const { return at(phi, t); }
    double beta_at(Eigen::Index t) const { return at(beta, t); }

private:
    double at(const std::vector<double>& seq, Eigen::Index t) const {
        if (t < 1 || t > horizon) throw IndexError("mixing profile index out of range");
        return seq[static_cast<std::size_t>(t - 1)];
    }
};

/// Compute both coefficient sequences by iterated transition-matrix powers:
///   phi_t  = max over states z with rho(z) > 0 of TV(P^t(z,.), rho)
///   beta_t = sum_z rho(z) TV(P^t(z,.), rho)
/// Rows of the running power are renormalized whenever drift exceeds 1e-13
/// so rounding never contaminates TV values near machine epsilon.
inline MixingProfile compute_mixing_profile(const ChainModel& chain, Eigen::Index horizon) {
    if (horizon < 1) throw DomainError("mixing horizon must be at least 1");
    const Eigen::Index n = chain.n_states();
    const VectorXd& rho = chain.stationary();

    MixingProfile profile;
    profile.horizon = horizon;
    profile.phi.resize(horizon);
    profile.beta.resize(horizon);

    MatrixXd power = chain.transition();
    for (Eigen::Index t = 1; t <= horizon; ++t) {
        double phi = 0.0;
        double beta = 0.0;
        for (Eigen::Index z = 0; z < n; ++z) {
            const double tv = 0.5 * (power.row(z).transpose() - rho).lpNorm<1>();
            if (rho(z) > kMixingZero) phi = std::max(phi, tv);
            beta += rho(z) * tv;
        }
        profile.phi[t - 1] = phi;
        profile.beta[t - 1] = beta;

        if (t < horizon) {
            power = power * chain.transition();
            for (Eigen::Index z = 0; z < n; ++z) {
                const double sum = power.row(z).sum();
                if (std::abs(sum - 1.0) > 1e-13) power.row(z) /= sum;
            }
        }
    }
    return profile;
}

inline std::vector<double> phi_coefficients(const ChainModel& chain, Eigen::Index horizon) {
    return compute_mixing_profile(chain, horizon).phi;
}

inline std::vector<double> beta_coefficients(const ChainModel& chain, Eigen::Index horizon) {
    return compute_mixing_profile(chain, horizon).beta;
}

/// Geometric majorant seq[t] <= D r^t. D == 0 marks an identically zero
/// sequence (independent sampling).
struct ExponentialEnvelope {
    double D = 0.0;
    double r = 0.5;

    bool all_zero() const { return D == 0.0; }

    double value_at(Eigen::Index t) const { return D * std::pow(r, static_cast<double>(t)); }

    /// Largest violation seq[t] - D r^t over the sequence (<= 0 when valid).
    double max_violation(const std::vector<double>& seq) const {
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < seq.size(); ++i) {
            worst = std::max(worst, seq[i] - value_at(static_cast<Eigen::Index>(i + 1)));
        }
        return worst;
    }
};

/// Polynomial majorant seq[t] <= b t^-k, same zero-marker convention.
struct PolynomialEnvelope {
    double b = 0.0;
    double k = 1.0;

    bool all_zero() const { return b == 0.0; }

    double value_at(Eigen::Index t) const { return b * std::pow(static_cast<double>(t), -k); }

    double max_violation(const std::vector<double>& seq) const {
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < seq.size(); ++i) {
            worst = std::max(worst, seq[i] - value_at(static_cast<Eigen::Index>(i + 1)));
        }
        return worst;
    }
};

namespace detail {

/// Least squares of log(seq[t]) against predictor(t) over entries above the
/// zero threshold. Returns {slope, intercept, count}.
template <class Predictor>
inline std::tuple<double, double, int> log_least_squares(const std::vector<double>& seq,
                                                         Predictor&& predictor) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (seq[i] < 0.0) throw DomainError("envelope fit needs a nonnegative sequence");
        if (seq[i] <= kMixingZero) continue;
        const double x = predictor(static_cast<Eigen::Index>(i + 1));
        const double y = std::log(seq[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    if (count == 0) return {0.0, 0.0, 0};
    const double denom = count * sxx - sx * sx;
    if (count < 2 || std::abs(denom) < 1e-30) {
        throw FitError("envelope fit needs at least 2 strictly positive entries");
    }
    const double slope = (count * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / count;
    return {slope, intercept, count};
}

} // namespace detail

/// Fit seq[t] <= D r^t: log-linear least squares on positive entries, then
/// inflate D until the envelope majorizes every fitted point. An all-zero
/// sequence returns the D = 0 marker; a sequence with no decaying geometric
/// majorant (fitted r >= 1) raises FitError.
inline ExponentialEnvelope fit_exponential_envelope(const std::vector<double>& seq) {
    auto [slope, intercept, count] =
        detail::log_least_squares(seq, [](Eigen::Index t) { return static_cast<double>(t); });
    if (count == 0) return ExponentialEnvelope{0.0, 0.5};
    if (slope >= 0.0) throw FitError("sequence admits no geometric envelope with r < 1");

    ExponentialEnvelope env{std::exp(intercept), std::exp(slope)};
    double inflate = 1.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (seq[i] <= kMixingZero) continue;
        inflate = std::max(inflate, seq[i] / env.value_at(static_cast<Eigen::Index>(i + 1)));
    }
    env.D *= inflate;
    return env;
}

/// Fit seq[t] <= b t^-k by regressing log(seq[t]) on log t, inflating b the
/// same way. FitError when the fitted exponent is not positive.
inline PolynomialEnvelope fit_polynomial_envelope(const std::vector<double>& seq) {
    auto [slope, intercept, count] = detail::log_least_squares(
        seq, [](Eigen::Index t) { return std::log(static_cast<double>(t)); });
    if (count == 0) return PolynomialEnvelope{0.0, 1.0};
    if (slope >= 0.0) throw FitError("sequence admits no decaying polynomial envelope");

    PolynomialEnvelope env{std::exp(intercept), -slope};
    double inflate = 1.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (seq[i] <= kMixingZero) continue;
        inflate = std::max(inflate, seq[i] / env.value_at(static_cast<Eigen::Index>(i + 1)));
    }
    env.b *= inflate;
    return env;
}

/// sum_{t>=1} D r^t = D r / (1 - r); the tail mass of a geometric envelope.
inline double geometric_tail_sum(double D, double r) {
    if (D < 0.0) throw DomainError("geometric tail sum needs D >= 0");
    if (!(r >= 0.0 && r < 1.0)) throw DomainError("geometric tail sum needs r in [0,1)");
    return D * r / (1.0 - r);
}

/// sum_{i=1}^{t} seq[i] with 1-based t.
inline double partial_sum(const std::vector<double>& seq, Eigen::Index t) {
    if (t < 1 || t > static_cast<Eigen::Index>(seq.size())) {
        throw IndexError("partial sum index out of range");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < t; ++i) total += seq[static_cast<std::size_t>(i)];
    return total;
}

} // namespace ssmgd
