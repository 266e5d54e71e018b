#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "ssmgd/bounds.hpp"
#include "ssmgd/errors.hpp"

namespace ssmgd {

/// Evaluation grid for the closed-form inequality audits.
struct LemmaGrid {
    std::vector<double> thetas;
    std::vector<double> alphas;
    std::vector<long> ts;
    std::vector<long> is;
    double slack = 1e-12;

    static LemmaGrid default_grid() {
        LemmaGrid g;
        g.thetas = {0.55, 0.65, 0.75, 0.85, 0.95, 1.0};
        g.alphas = {0.1, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 1.0};
        g.ts = {1, 2, 5, 10, 100, 1000, 10000};
        g.is = {0, 1, 2, 5, 10, 100, 1000};
        return g;
    }
};

/// One exact-vs-bound comparison. For the psi and weighted-sum audits the
/// column i is unused and reported as -1.
struct AuditRow {
    std::string lemma;
    Variant variant = Variant::conservative;
    double theta = 0.0;
    double alpha = 0.0;
    long i = -1;
    long t = 0;
    double exact = 0.0;
    double bound = 0.0;
    bool holds = true;
};

struct LemmaAuditReport {
    std::vector<AuditRow> rows;

    long violations(const std::string& lemma, Variant variant) const {
        long count = 0;
        for (const AuditRow& row : rows) {
            if (!row.holds && row.lemma == lemma && row.variant == variant) ++count;
        }
        return count;
    }

    long conservative_violations() const {
        long count = 0;
        for (const AuditRow& row : rows) {
            if (!row.holds && row.variant == Variant::conservative) ++count;
        }
        return count;
    }

    double max_violation_magnitude() const {
        double worst = 0.0;
        for (const AuditRow& row : rows) {
            if (!row.holds) worst = std::max(worst, row.exact - row.bound);
        }
        return worst;
    }

    bool contains_violation(const std::string& lemma, Variant variant, double theta, double alpha,
                            long i, long t) const {
        for (const AuditRow& row : rows) {
            if (!row.holds && row.lemma == lemma && row.variant == variant && row.theta == theta &&
                row.alpha == alpha && row.i == i && row.t == t) {
                return true;
            }
        }
        return false;
    }
};

inline constexpr const char* kLemmaProduct = "product-bound";
inline constexpr const char* kLemmaPsi = "psi-bound";
inline constexpr const char* kLemmaWeightedSum = "weighted-sum-bound";

/// Evaluate every exact/bound pair over the grid. The step-size product
/// bound is audited in both variants (the paper form fails on part of the
/// grid; only the conservative form is asserted by callers). The psi and
/// weighted-sum bounds have a single form, tagged conservative.
inline LemmaAuditReport verify_lemmas(const LemmaGrid& grid) {
    LemmaAuditReport report;
    auto push = [&](std::string lemma, Variant variant, double theta, double alpha, long i, long t,
                    double exact, double bound) {
        report.rows.push_back(AuditRow{std::move(lemma), variant, theta, alpha, i, t, exact, bound,
                                       exact <= bound + grid.slack});
    };

    for (double theta : grid.thetas) {
        for (double alpha : grid.alphas) {
            for (long t : grid.ts) {
                push(kLemmaPsi, Variant::conservative, theta, alpha, -1, t,
                     psi_exact(t, alpha, theta), psi_bound(t, alpha, theta));
                for (long i : grid.is) {
                    if (i >= t) continue;
                    const double exact = product_exact(i, t, alpha, theta);
                    push(kLemmaProduct, Variant::conservative, theta, alpha, i, t, exact,
                         product_bound(i, t, alpha, theta, Variant::conservative));
                    push(kLemmaProduct, Variant::paper, theta, alpha, i, t, exact,
                         product_bound(i, t, alpha, theta, Variant::paper));
                }
            }
        }
    }
    for (double alpha : grid.alphas) {
        for (long t : grid.ts) {
            push(kLemmaWeightedSum, Variant::conservative, 1.0, alpha, -1, t,
                 weighted_sum_exact(t, alpha), weighted_sum_bound(t, alpha));
        }
    }
    return report;
}

} // namespace ssmgd
