#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ssmgd/errors.hpp"
#include "ssmgd/mixing.hpp"

namespace ssmgd {

/// The step-size product bound and the derived initial-error bound exist in
/// two variants: `paper` keeps the factor 2*alpha in the exponent, while
/// `conservative` uses alpha, which is the form that verifies numerically on
/// the full audit grid. Sampling-error bounds are identical across variants.
enum class Variant { paper, conservative };

inline std::string to_string(Variant v) {
    return v == Variant::paper ? "paper" : "conservative";
}

inline Variant variant_from_string(const std::string& name) {
    if (name == "paper") return Variant::paper;
    if (name == "conservative") return Variant::conservative;
    throw DomainError("unknown bound variant: " + name);
}

namespace detail {

inline void check_theta_open(double theta) {
    if (!(theta > 0.5 && theta < 1.0)) {
        throw DomainError("theta must lie strictly inside (1/2, 1)");
    }
}

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
}

} // namespace detail

/// C_theta = 8 + 2/(2 theta - 1) * (theta / (e (2 - 2^theta)))^(theta/(1-theta)),
/// the constant of the step-size sum bound. Diverges at both ends of (1/2, 1).
inline double c_theta(double theta) {
    detail::check_theta_open(theta);
    const double base = theta / (std::exp(1.0) * (2.0 - std::pow(2.0, theta)));
    return 8.0 + 2.0 / (2.0 * theta - 1.0) * std::pow(base, theta / (1.0 - theta));
}

/// Exact weighted sum psi(t) = sum_{i=1}^{t} i^{-2 theta}
/// prod_{k=i+1}^{t} (1 - alpha/k^theta)^2, evaluated in O(t) with a running
/// product accumulated from the tail.
inline double psi_exact(long t, double alpha, double theta) {
    if (t < 1) throw DomainError("psi is defined for t >= 1");
    detail::check_alpha(alpha);
    if (!(theta > 0.5 && theta <= 1.0)) throw DomainError("psi needs theta in (1/2, 1]");

    double total = 0.0;
    double prod = 1.0; // prod over k = i+1 .. t while scanning i downward
    for (long i = t; i >= 1; --i) {
        const double term = std::pow(static_cast<double>(i), -2.0 * theta);
        total += term * prod * prod;
        prod *= 1.0 - alpha / std::pow(static_cast<double>(i), theta);
    }
    return total;
}

/// Closed-form majorant of psi_exact. For theta < 1 this is
/// C_theta (1/alpha)^(theta/(1-theta)) (t+1)^-theta; theta = 1 dispatches on
/// the four alpha ranges (0,1/2), {1/2}, (1/2,1), {1}.
inline double psi_bound(long t, double alpha, double theta) {
    if (t < 1) throw DomainError("psi bound is defined for t >= 1");
    detail::check_alpha(alpha);
    const double tp1 = static_cast<double>(t + 1);
    if (theta == 1.0) {
        if (alpha < 0.5) return 4.0 / (1.0 - 2.0 * alpha) * std::pow(tp1, -2.0 * alpha);
        if (alpha == 0.5) return 4.0 / tp1 * std::log(tp1);
        if (alpha < 1.0) return 6.0 / (2.0 * alpha - 1.0) / tp1;
        return 6.0 / tp1;
    }
    detail::check_theta_open(theta);
    return c_theta(theta) * std::pow(1.0 / alpha, theta / (1.0 - theta)) * std::pow(tp1, -theta);
}

/// prod_{k=i+1}^{t} (1 - alpha / k^theta); the empty product (i = t) is 1.
inline double product_exact(long i, long t, double alpha, double theta) {
    if (i < 0 || i > t) throw DomainError("product needs 0 <= i <= t");
    detail::check_alpha(alpha);
    if (!(theta > 0.0 && theta <= 1.0)) throw DomainError("product needs theta in (0, 1]");
    double prod = 1.0;
    for (long k = i + 1; k <= t; ++k) {
        prod *= 1.0 - alpha / std::pow(static_cast<double>(k), theta);
    }
    return prod;
}

/// Closed-form majorant of product_exact. theta = 1 gives
/// ((i+1)/(t+1))^alpha for both variants; theta < 1 gives
/// exp(f * alpha/(1-theta) * ((i+1)^(1-theta) - (t+1)^(1-theta))) with
/// f = 2 for the paper variant and f = 1 for the conservative one.
inline double product_bound(long i, long t, double alpha, double theta, Variant variant) {
    if (i < 0 || i > t) throw DomainError("product bound needs 0 <= i <= t");
    detail::check_alpha(alpha);
    if (theta == 1.0) {
        return std::pow(static_cast<double>(i + 1) / static_cast<double>(t + 1), alpha);
    }
    if (!(theta > 0.0 && theta < 1.0)) throw DomainError("product bound needs theta in (0, 1]");
    const double factor = variant == Variant::paper ? 2.0 : 1.0;
    const double gap = std::pow(static_cast<double>(i + 1), 1.0 - theta) -
                       std::pow(static_cast<double>(t + 1), 1.0 - theta);
    return std::exp(factor * alpha / (1.0 - theta) * gap);
}

/// Exact sum_{i=1}^{t} (1/i^2) ((i+1)/(t+1))^alpha.
inline double weighted_sum_exact(long t, double alpha) {
    if (t < 1) throw DomainError("weighted sum is defined for t >= 1");
    detail::check_alpha(alpha);
    double total = 0.0;
    for (long i = 1; i <= t; ++i) {
        const double di = static_cast<double>(i);
        total += std::pow(static_cast<double>(i + 1) / static_cast<double>(t + 1), alpha) / (di * di);
    }
    return total;
}

/// Closed-form majorant of the weighted sum: 6/(1-alpha) (t+1)^-alpha for
/// alpha < 1 and 6 ln(t+1)/(t+1) at alpha = 1.
inline double weighted_sum_bound(long t, double alpha) {
    if (t < 1) throw DomainError("weighted sum bound is defined for t >= 1");
    detail::check_alpha(alpha);
    const double tp1 = static_cast<double>(t + 1);
    if (alpha == 1.0) return 6.0 * std::log(tp1) / tp1;
    return 6.0 / (1.0 - alpha) * std::pow(tp1, -alpha);
}

/// Deterministic bound on the initial error |u_t|. theta = 1 gives
/// (1/t)^alpha r1; theta < 1 gives exp(f alpha/(1-theta) (1 - t^(1-theta))) r1
/// with the same variant factors as product_bound.
inline double init_bound(long t, double theta, double alpha, double r1_norm, Variant variant) {
    if (t < 1) throw DomainError("init bound is defined for t >= 1");
    detail::check_alpha(alpha);
    if (r1_norm < 0.0) throw DomainError("r1_norm must be nonnegative");
    if (theta == 1.0) return std::pow(1.0 / static_cast<double>(t), alpha) * r1_norm;
    detail::check_theta_open(theta);
    const double factor = variant == Variant::paper ? 2.0 : 1.0;
    return std::exp(factor * alpha / (1.0 - theta) *
                    (1.0 - std::pow(static_cast<double>(t), 1.0 - theta))) *
           r1_norm;
}

/// Inputs shared by the closed-form sampling-error bounds. The envelope is
/// geometric (phi or beta, depending on which bound consumes it).
struct BoundParams {
    double theta = 0.75;
    double alpha = 0.5;
    double sigma2 = 1.0;
    double eta = 1.0;
    double delta = 0.1;
    ExponentialEnvelope envelope;
};

namespace detail {

inline void check_bound_params(const BoundParams& p) {
    check_alpha(p.alpha);
    if (p.sigma2 < 0.0) throw DomainError("sigma2 must be nonnegative");
    if (!(p.eta > 0.0)) throw DomainError("eta must be positive");
    if (!(p.delta > 0.0 && p.delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
    if (p.envelope.D < 0.0 || !(p.envelope.r >= 0.0 && p.envelope.r < 1.0)) {
        throw DomainError("envelope needs D >= 0 and r in [0, 1)");
    }
}

inline double samp_bound_exp(long t, const BoundParams& p, double tail_factor) {
    if (t < 1) throw DomainError("sampling bound is defined for t >= 1");
    check_bound_params(p);
    check_theta_open(p.theta);
    const double iid_part = p.sigma2 * c_theta(p.theta) / (p.delta * p.eta * p.eta) *
                            std::pow(1.0 / p.alpha, p.theta / (1.0 - p.theta)) *
                            std::pow(static_cast<double>(t), -p.theta);
    return iid_part * tail_factor;
}

} // namespace detail

/// High-probability bound on E_samp^2 under an exponential phi envelope:
/// (sigma^2 C_theta / (delta eta^2)) (1/alpha)^(theta/(1-theta)) t^-theta
/// (1 + 4 D r / (1 - r)). D = 0 reduces exactly to the independent-sample
/// form.
inline double samp_bound_exp_phi(long t, const BoundParams& p) {
    const double tail = p.envelope.D * p.envelope.r / (1.0 - p.envelope.r);
    return detail::samp_bound_exp(t, p, 1.0 + 4.0 * tail);
}

/// Identical shape driven by a beta envelope (D1, r1).
inline double samp_bound_exp_beta(long t, const BoundParams& p) {
    return samp_bound_exp_phi(t, p);
}

/// theta = 1 bound, valid for alpha in (0, 1/2):
/// (4 sigma^2 / (delta eta^2)) (1/(1-2 alpha)) t^-alpha (1 + 6 D r/(1-r)).
inline double samp_bound_theta1(long t, const BoundParams& p) {
    if (t < 1) throw DomainError("sampling bound is defined for t >= 1");
    detail::check_bound_params(p);
    if (!(p.alpha < 0.5)) {
        throw DomainError("theta = 1 sampling bound requires alpha in (0, 1/2)");
    }
    const double tail = p.envelope.D * p.envelope.r / (1.0 - p.envelope.r);
    return 4.0 * p.sigma2 / (p.delta * p.eta * p.eta) / (1.0 - 2.0 * p.alpha) *
           std::pow(static_cast<double>(t), -p.alpha) * (1.0 + 6.0 * tail);
}

/// Generic bound taking the exact partial sum S_t = sum_{i<=t} phi_i in
/// place of a fitted envelope; keeps the cross-term factor 4 on S_t.
inline double samp_bound_generic(long t, double theta, double alpha, double sigma2, double eta,
                                 double delta, double partial_sum_phi) {
    if (partial_sum_phi < 0.0) throw DomainError("partial sum must be nonnegative");
    BoundParams p;
    p.theta = theta;
    p.alpha = alpha;
    p.sigma2 = sigma2;
    p.eta = eta;
    p.delta = delta;
    return detail::samp_bound_exp(t, p, 1.0 + 4.0 * partial_sum_phi);
}

/// Total-error rate exponent under a polynomial mixing envelope b t^-k:
/// k < 1 gives (1-k-theta)/2, k >= 1 gives -theta/2 with a logarithmic
/// factor exactly at k = 1.
struct PolyRate {
    double exponent = 0.0;
    bool log_factor = false;
};

inline PolyRate poly_rate_exponent(double theta, double k) {
    detail::check_theta_open(theta);
    if (!(k > 0.0)) throw DomainError("polynomial rate needs k > 0");
    if (k < 1.0) return {(1.0 - k - theta) / 2.0, false};
    if (k == 1.0) return {-theta / 2.0, true};
    return {-theta / 2.0, false};
}

/// Identifies which closed form produced a bound row.
enum class Formula { thm1_phi, thm_beta, prop_theta1, generic_partial_sum, poly_rate };

inline std::string to_string(Formula f) {
    switch (f) {
        case Formula::thm1_phi: return "thm1-phi";
        case Formula::thm_beta: return "thm-beta";
        case Formula::prop_theta1: return "prop-theta1";
        case Formula::generic_partial_sum: return "generic-partial-sum";
        case Formula::poly_rate: return "poly-rate";
    }
    throw DomainError("unknown formula id");
}

/// Per-checkpoint theoretical bound values.
struct BoundReport {
    std::vector<long> checkpoints;
    std::vector<double> init_bounds;
    std::vector<double> samp_bounds_sq;
    Variant variant = Variant::conservative;
    Formula formula = Formula::thm1_phi;
};

} // namespace ssmgd
