/*=============================================================================
 * Gradient-sparse signals and their variation patterns.
 *
 * Conventions: a signal x has length n >= 3 and gradient d in R^{n-1} with
 *      d_i = x_{i+1} - x_i,   i = 1..n-1 (1-based).
 * All index sets below hold these 1-based gradient positions. Interior
 * positions are i = 2..n-1, i.e. those for which both i and i-1 are gradient
 * positions; every interior position falls in exactly one of S1+, S1-, S2,
 * S2', S4. The two tail positions 1 and n-1 are tracked separately (s3).
 *===========================================================================*/
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tvphase/seed.hpp"

namespace tvphase {

class GradientSparseSignal {
public:
    explicit GradientSparseSignal(std::vector<double> values);

    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    const std::vector<double>& vector() const { return values_; }

private:
    std::vector<double> values_;
};

/* Counts (s1+, s1-, s2, s3) of a length-n signal. */
struct VariationPattern {
    std::size_t n = 0;
    std::size_t s1_plus = 0;
    std::size_t s1_minus = 0;
    std::size_t s2 = 0;
    std::size_t s3 = 0;

    std::size_t s1() const { return s1_plus + s1_minus; }
    /// |S4|, the interior positions with neither neighbour in the support.
    /// Only meaningful once validate_counts() has passed.
    std::size_t s4() const { return n - 2 - s1() - s2; }
    /// Number of runs of consecutive support positions.
    std::size_t runs() const { return (s2 + s3) / 2; }
    /// Gradient sparsity |S|.
    std::size_t support_size() const { return s1() + runs(); }

    bool operator==(const VariationPattern&) const = default;
};

/* Basic count invariants: n >= 3, s3 <= 2, s1 + s2 <= n - 2.
 * Throws ParameterError. */
void validate_counts(const VariationPattern& p);

/* Throws InfeasibleError naming the violated constraint when no support/sign
 * layout on {1..n-1} classifies to p (after validate_counts). */
void validate_realizable(const VariationPattern& p);

bool is_realizable(const VariationPattern& p);

struct SupportClassification {
    std::size_t n = 0;
    std::vector<std::size_t> support; // S, ascending
    std::vector<int> signs;           // sgn(d_i) for i in support, same order
    std::vector<std::size_t> s1_plus;
    std::vector<std::size_t> s1_minus;
    std::vector<std::size_t> s2;       // i in S, i-1 not in S
    std::vector<std::size_t> s2_prime; // i not in S, i-1 in S
    std::vector<std::size_t> s4;       // neither i nor i-1 in S
    bool first_in_support = false;     // 1 in S
    bool last_in_support = false;      // n-1 in S

    VariationPattern pattern() const;
};

/// Forward differences d_i = x_{i+1} - x_i. Throws DimensionError if the input
/// has fewer than 3 entries.
std::vector<double> gradient(std::span<const double> x);

/* Classifies a sign vector over gradient positions: signs[i-1] in {-1,0,+1} is
 * sgn(d_i), zero meaning i is off the support. signs.size() == n - 1. */
SupportClassification classify_signs(std::span<const int> signs);

/* Classifies x. Gradient entries with |d_i| <= zero_tol count as zero. */
SupportClassification classify(const GradientSparseSignal& x, double zero_tol = 0.0);

/* Piecewise-constant signal whose breakpoints are a uniformly drawn size-s
 * subset of {1..n-1}; levels are i.i.d. standard normal with no two adjacent
 * levels equal. Throws ParameterError if s > n - 1. */
GradientSparseSignal generate_random_support_signal(std::size_t n, std::size_t s, Rng& rng);

/* Signal whose classification is exactly p. Jump magnitudes are uniform on
 * [0.5, 1.5]; run placement spreads the spare room evenly so that runs are at
 * least two positions apart whenever n allows it. */
GradientSparseSignal generate_pattern_signal(const VariationPattern& p, Rng& rng);

/* Sign vector (length n-1) that generate_pattern_signal would realize, without
 * the amplitudes. */
std::vector<int> layout_pattern_signs(const VariationPattern& p, Rng& rng);

// serialization
nlohmann::json to_json(const VariationPattern& p);
VariationPattern pattern_from_json(const nlohmann::json& j);

void write_signal_csv(const std::string& path, std::span<const double> x);
GradientSparseSignal read_signal_csv(const std::string& path);

} // namespace tvphase
