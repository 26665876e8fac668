/*=============================================================================
 * Closed-form lower bound on the statistical dimension of the TV descent
 * cone at a gradient-sparse signal:
 *
 *   Psi_t = s1+ + s1-(1 + 4t^2) + s2 phi1(t,t) + s4 phi2(2t)
 *           + s3(1 + t^2) + (2 - s3) phi2(t),         s4 = n - 2 - s1 - s2,
 *
 *   m_hat = inf_{t >= 0} Psi_t,
 *
 * where phi1(a,b) = E(|g + a| - b)_+^2 and phi2(z) = E(|g| - z)_+^2 for a
 * standard normal g. Also carries the wavelet-based comparison bounds and
 * the failure-probability floor attached to m_hat.
 *===========================================================================*/
#pragma once

#include <optional>
#include <vector>

#include "json.hpp"
#include "tvphase/pattern.hpp"

namespace tvphase {

/// E(|g| - z)_+^2 = 2[(1 + z^2) Q(z) - z pdf(z)], z >= 0.
double phi2(double z);

/// E(|g + a| - b)_+^2 for a, b >= 0 (two one-sided Gaussian tails).
double phi1(double a, double b);

/* Per-term contributions of Psi_t. */
struct PsiTerms {
    double consecutive_same = 0.0;     // s1+
    double consecutive_opposite = 0.0; // s1- (1 + 4t^2)
    double individual = 0.0;           // s2 phi1(t, t)
    double interior_null = 0.0;        // s4 phi2(2t)
    double tail_end = 0.0;             // s3 (1 + t^2)
    double endpoint_null = 0.0;        // (2 - s3) phi2(t)

    double total() const
    {
        return consecutive_same + consecutive_opposite + individual + interior_null + tail_end
            + endpoint_null;
    }
};

PsiTerms psi_terms(double t, const VariationPattern& p);
double psi(double t, const VariationPattern& p);

/* Limits of each term as t -> infinity; finite only when s1- = s3 = 0. */
PsiTerms psi_limit_terms(const VariationPattern& p);

struct BoundResult {
    double m_hat = 0.0;
    std::optional<double> t_star; // empty: infimum is the t -> infinity limit
    PsiTerms terms;               // breakdown at t_star (or the limit)

    bool at_infinity() const { return !t_star.has_value(); }
};

struct MinimizeOptions {
    double t_hi = 20.0;    // initial bracket [0, t_hi], doubled while needed
    double t_tol = 1e-8;   // golden-section width in t
};

BoundResult minimize_psi(const VariationPattern& p, const MinimizeOptions& opts = {});

double cai_lower(double n, double s);
double cai_upper(double n, double s);

/* Reported value of the lower comparison bound: negative values clamp to 0. */
struct ClampedValue {
    double value = 0.0;
    bool clamped = false;
};
ClampedValue clamp_nonnegative(double v);

/* max(0, 1 - 4 exp(-(m_hat - m)^2 / (16 m_hat))): guaranteed probability that
 * TV minimization fails with m <= m_hat measurements. */
double failure_probability_bound(double m, double m_hat);

nlohmann::json to_json(const PsiTerms& terms);
nlohmann::json to_json(const BoundResult& r);
BoundResult bound_result_from_json(const nlohmann::json& j);

} // namespace tvphase

namespace tvphase {

/* Eight n = 100, |S| = 10 configurations that probe how each variation count
 * moves m_hat (same-sign runs, alternating runs, tails, isolated jumps). */
std::vector<VariationPattern> benchmark_patterns();

} // namespace tvphase
