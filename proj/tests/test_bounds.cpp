#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "ssmgd/bounds.hpp"
#include "ssmgd/chain.hpp"
#include "ssmgd/lemma_audit.hpp"

using namespace ssmgd;

TEST_CASE("c_theta closed form") {
    // Frozen against an extended-precision evaluation of the closed form.
    REQUIRE(c_theta(0.75) == Catch::Approx(10.607536848559405).epsilon(1e-12));
    REQUIRE(c_theta(0.55) == Catch::Approx(14.081305524893888).epsilon(1e-12));
    REQUIRE(c_theta(0.95) == Catch::Approx(6.8997499758594650e13).epsilon(1e-10));
    REQUIRE(c_theta(0.55) > 8.0);
    REQUIRE(c_theta(0.501) > c_theta(0.55));
    REQUIRE(c_theta(0.999) > c_theta(0.95));
    REQUIRE_THROWS_AS(c_theta(0.5), DomainError);
    REQUIRE_THROWS_AS(c_theta(1.0), DomainError);
    REQUIRE_THROWS_AS(c_theta(1.25), DomainError);
}

TEST_CASE("psi_exact by direct summation") {
    REQUIRE(psi_exact(1, 1.0, 0.75) == 1.0);
    REQUIRE(psi_exact(1, 0.3, 1.0) == 1.0);
    REQUIRE(psi_exact(2, 1.0, 0.75) == Catch::Approx(0.51789966618382646).epsilon(1e-13));
    REQUIRE(psi_exact(2, 1.0, 1.0) == Catch::Approx(0.5).epsilon(1e-14));
    REQUIRE_THROWS_AS(psi_exact(0, 1.0, 0.75), DomainError);
    REQUIRE_THROWS_AS(psi_exact(2, 0.0, 0.75), DomainError);
    REQUIRE_THROWS_AS(psi_exact(2, 1.0, 0.4), DomainError);
}

TEST_CASE("psi_bound branches") {
    REQUIRE(psi_bound(1, 1.0, 1.0) == Catch::Approx(3.0).epsilon(1e-14));
    REQUIRE(psi_bound(2, 1.0, 0.75) == Catch::Approx(4.6534345292750037).epsilon(1e-12));
    REQUIRE(psi_bound(1, 0.5, 1.0) == Catch::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
    REQUIRE(psi_bound(3, 0.25, 1.0) == Catch::Approx(8.0 * std::pow(4.0, -0.5)).epsilon(1e-14));
    REQUIRE(psi_bound(3, 0.75, 1.0) == Catch::Approx(12.0 / 4.0).epsilon(1e-14));
    REQUIRE_THROWS_AS(psi_bound(1, 0.0, 1.0), DomainError);
}

TEST_CASE("product_exact telescopes at theta = 1") {
    REQUIRE(product_exact(1, 9, 1.0, 1.0) == Catch::Approx(1.0 / 9.0).epsilon(1e-13));
    REQUIRE(product_exact(7, 7, 0.5, 0.75) == 1.0);
    REQUIRE_THROWS_AS(product_exact(5, 4, 0.5, 0.75), DomainError);
    REQUIRE_THROWS_AS(product_exact(-1, 4, 0.5, 0.75), DomainError);
}

TEST_CASE("product_bound variants") {
    REQUIRE(product_bound(1, 9, 1.0, 1.0, Variant::paper) == Catch::Approx(0.2).epsilon(1e-14));
    REQUIRE(product_bound(1, 9, 1.0, 1.0, Variant::conservative) ==
            Catch::Approx(0.2).epsilon(1e-14));

    // The recorded counterexample: the paper-form bound drops below the
    // exact product, the conservative form stays above it.
    const double exact = product_exact(1, 2, 0.1, 0.75);
    const double paper = product_bound(1, 2, 0.1, 0.75, Variant::paper);
    const double conservative = product_bound(1, 2, 0.1, 0.75, Variant::conservative);
    REQUIRE(exact == Catch::Approx(0.94053964424986395).epsilon(1e-13));
    REQUIRE(paper == Catch::Approx(0.90348703540111560).epsilon(1e-13));
    REQUIRE(conservative == Catch::Approx(0.95051935035595967).epsilon(1e-13));
    REQUIRE(paper < exact);
    REQUIRE(conservative >= exact);
}

TEST_CASE("weighted sum and its bound") {
    REQUIRE(weighted_sum_exact(1, 1.0) == Catch::Approx(1.0).epsilon(1e-14));
    REQUIRE(weighted_sum_exact(1, 0.37) == Catch::Approx(1.0).epsilon(1e-14));
    REQUIRE(weighted_sum_exact(3, 0.5) == Catch::Approx(1.0347242432437683).epsilon(1e-13));

    REQUIRE(weighted_sum_bound(3, 0.5) == Catch::Approx(6.0).epsilon(1e-14));
    REQUIRE(weighted_sum_bound(1, 1.0) == Catch::Approx(3.0 * std::log(2.0)).epsilon(1e-14));
    REQUIRE(weighted_sum_bound(3, 0.5) >= weighted_sum_exact(3, 0.5));
    REQUIRE(weighted_sum_bound(1, 1.0) >= weighted_sum_exact(1, 1.0));
}

TEST_CASE("initial error bound") {
    REQUIRE(init_bound(1, 0.75, 0.5, 2.5, Variant::paper) == 2.5);
    REQUIRE(init_bound(1, 0.75, 0.5, 2.5, Variant::conservative) == 2.5);
    REQUIRE(init_bound(16, 0.75, 0.5, 1.0, Variant::paper) ==
            Catch::Approx(std::exp(-4.0)).epsilon(1e-14));
    REQUIRE(init_bound(16, 0.75, 0.5, 1.0, Variant::conservative) ==
            Catch::Approx(std::exp(-2.0)).epsilon(1e-14));
    REQUIRE(init_bound(16, 1.0, 0.25, 2.0, Variant::paper) == Catch::Approx(1.0).epsilon(1e-14));
    REQUIRE(init_bound(16, 1.0, 0.25, 2.0, Variant::conservative) ==
            Catch::Approx(1.0).epsilon(1e-14));
    REQUIRE_THROWS_AS(init_bound(0, 0.75, 0.5, 1.0, Variant::paper), DomainError);
}

TEST_CASE("sampling bound under an exponential phi envelope") {
    BoundParams p;
    p.theta = 0.75;
    p.alpha = 0.5;
    p.sigma2 = 1.0;
    p.eta = 1.0;
    p.delta = 0.1;
    p.envelope = ExponentialEnvelope{0.0, 0.5};
    REQUIRE(samp_bound_exp_phi(100, p) == Catch::Approx(26.835181444489839).epsilon(1e-12));

    p.envelope = ExponentialEnvelope{0.5, 0.5};
    REQUIRE(samp_bound_exp_phi(100, p) == Catch::Approx(80.505544333469518).epsilon(1e-12));
    REQUIRE(samp_bound_exp_beta(100, p) == samp_bound_exp_phi(100, p));

    // D = 0 reduces bit-exactly to the independent-sample closed form.
    p.envelope = ExponentialEnvelope{0.0, 0.5};
    const double iid = p.sigma2 * c_theta(p.theta) / (p.delta * p.eta * p.eta) *
                       std::pow(1.0 / p.alpha, p.theta / (1.0 - p.theta)) *
                       std::pow(100.0, -p.theta);
    REQUIRE(samp_bound_exp_phi(100, p) == iid);

    REQUIRE_THROWS_AS(samp_bound_exp_phi(0, p), DomainError);
    p.theta = 1.0;
    REQUIRE_THROWS_AS(samp_bound_exp_phi(100, p), DomainError);
}

TEST_CASE("sampling bound at theta = 1") {
    BoundParams p;
    p.theta = 1.0;
    p.alpha = 0.25;
    p.sigma2 = 1.0;
    p.eta = 1.0;
    p.delta = 0.1;
    p.envelope = ExponentialEnvelope{0.0, 0.5};
    REQUIRE(samp_bound_theta1(16, p) == Catch::Approx(40.0).epsilon(1e-13));

    p.envelope = ExponentialEnvelope{0.5, 0.5};
    REQUIRE(samp_bound_theta1(16, p) == Catch::Approx(160.0).epsilon(1e-13));

    p.alpha = 0.5;
    REQUIRE_THROWS_AS(samp_bound_theta1(16, p), DomainError);
}

TEST_CASE("beta envelope bound matches the phi bound on the symmetric chain") {
    // beta_t = phi_t exactly for the symmetric two-state chain, so the two
    // fitted envelopes and the resulting bounds coincide.
    const ChainModel chain = build_two_state(0.25, 0.25);
    const MixingProfile profile = compute_mixing_profile(chain, 40);
    BoundParams phi_params;
    phi_params.theta = 0.75;
    phi_params.alpha = 0.25;
    phi_params.sigma2 = 2.0;
    phi_params.eta = 2.0;
    phi_params.delta = 0.1;
    phi_params.envelope = fit_exponential_envelope(profile.phi);
    BoundParams beta_params = phi_params;
    beta_params.envelope = fit_exponential_envelope(profile.beta);
    for (long t : {1L, 10L, 100L, 1000L}) {
        REQUIRE(samp_bound_exp_beta(t, beta_params) <= samp_bound_exp_phi(t, phi_params));
        REQUIRE(samp_bound_exp_beta(t, beta_params) == samp_bound_exp_phi(t, phi_params));
    }
}

TEST_CASE("generic partial-sum bound") {
    BoundParams p;
    p.theta = 0.75;
    p.alpha = 0.5;
    p.sigma2 = 1.0;
    p.eta = 1.0;
    p.delta = 0.1;

    const double with_zero = samp_bound_generic(100, 0.75, 0.5, 1.0, 1.0, 0.1, 0.0);
    p.envelope = ExponentialEnvelope{0.0, 0.5};
    REQUIRE(with_zero == samp_bound_exp_phi(100, p));

    // S_t = D r / (1 - r) makes the generic and envelope forms coincide.
    p.envelope = ExponentialEnvelope{0.5, 0.5};
    const double tail = geometric_tail_sum(0.5, 0.5);
    REQUIRE(samp_bound_generic(100, 0.75, 0.5, 1.0, 1.0, 0.1, tail) ==
            Catch::Approx(samp_bound_exp_phi(100, p)).epsilon(1e-14));
    REQUIRE_THROWS_AS(samp_bound_generic(100, 0.75, 0.5, 1.0, 1.0, 0.1, -1.0), DomainError);
}

TEST_CASE("sampling bounds are monotone in their inputs") {
    BoundParams base;
    base.theta = 0.75;
    base.alpha = 0.5;
    base.sigma2 = 2.0;
    base.eta = 1.5;
    base.delta = 0.1;
    base.envelope = ExponentialEnvelope{0.4, 0.6};

    double previous = std::numeric_limits<double>::infinity();
    for (long t : {1L, 2L, 5L, 17L, 100L, 5000L}) {
        const double value = samp_bound_exp_phi(t, base);
        REQUIRE(value <= previous);
        REQUIRE(value >= 0.0);
        previous = value;
    }

    BoundParams larger_d = base;
    larger_d.envelope.D = 0.8;
    REQUIRE(samp_bound_exp_phi(10, larger_d) >= samp_bound_exp_phi(10, base));

    BoundParams larger_sigma = base;
    larger_sigma.sigma2 = 3.0;
    REQUIRE(samp_bound_exp_phi(10, larger_sigma) >= samp_bound_exp_phi(10, base));

    BoundParams smaller_delta = base;
    smaller_delta.delta = 0.05;
    REQUIRE(samp_bound_exp_phi(10, smaller_delta) >= samp_bound_exp_phi(10, base));

    REQUIRE(samp_bound_generic(10, 0.75, 0.5, 1.0, 1.0, 0.1, 2.0) >=
            samp_bound_generic(10, 0.75, 0.5, 1.0, 1.0, 0.1, 1.0));
}

TEST_CASE("polynomial decay rate table") {
    const PolyRate slow = poly_rate_exponent(0.75, 0.5);
    REQUIRE(slow.exponent == -0.125);
    REQUIRE_FALSE(slow.log_factor);

    const PolyRate boundary = poly_rate_exponent(0.75, 1.0);
    REQUIRE(boundary.exponent == -0.375);
    REQUIRE(boundary.log_factor);

    const PolyRate fast = poly_rate_exponent(0.75, 2.0);
    REQUIRE(fast.exponent == -0.375);
    REQUIRE_FALSE(fast.log_factor);

    REQUIRE_THROWS_AS(poly_rate_exponent(0.75, 0.0), DomainError);
    REQUIRE_THROWS_AS(poly_rate_exponent(1.0, 2.0), DomainError);
}

TEST_CASE("lemma audit holds in the conservative variants on the default grid") {
    const LemmaAuditReport report = verify_lemmas(LemmaGrid::default_grid());
    REQUIRE(report.conservative_violations() == 0);
    REQUIRE(report.violations(kLemmaPsi, Variant::conservative) == 0);
    REQUIRE(report.violations(kLemmaWeightedSum, Variant::conservative) == 0);
    REQUIRE(report.violations(kLemmaProduct, Variant::conservative) == 0);

    REQUIRE(report.violations(kLemmaProduct, Variant::paper) > 0);
    REQUIRE(report.contains_violation(kLemmaProduct, Variant::paper, 0.75, 0.1, 1, 2));
}
