#include "tvphase/pattern.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "tvphase/csv.hpp"
#include "tvphase/error.hpp"

namespace tvphase {

GradientSparseSignal::GradientSparseSignal(std::vector<double> values)
    : values_(std::move(values))
{
    if (values_.size() < 3) {
        throw DimensionError("signal length must be at least 3, got " + std::to_string(values_.size()));
    }
}

void validate_counts(const VariationPattern& p)
{
    if (p.n < 3) { throw ParameterError("pattern: n must be at least 3"); }
    if (p.s3 > 2) { throw ParameterError("pattern: s3 must be at most 2"); }
    if (p.s1() + p.s2 > p.n - 2) {
        throw ParameterError("pattern: s1_plus + s1_minus + s2 must not exceed n - 2");
    }
}

void validate_realizable(const VariationPattern& p)
{
    validate_counts(p);
    // every run contributes two boundaries, minus the ones that sit on a tail
    if ((p.s2 + p.s3) % 2 != 0) {
        throw InfeasibleError("pattern: s2 + s3 must be even (each run has two ends)");
    }
    const std::size_t runs = p.runs();
    if (runs == 0 && p.s1() > 0) {
        throw InfeasibleError("pattern: consecutive variations need at least one run (s2 + s3 > 0)");
    }
    if (runs == 1 && p.s3 == 2 && p.s1() != p.n - 2) {
        throw InfeasibleError("pattern: a single run touching both tails must cover all n - 1 "
                              "positions, so s1 must equal n - 2");
    }
}

bool is_realizable(const VariationPattern& p)
{
    try {
        validate_realizable(p);
        return true;
    } catch (const std::invalid_argument&) {
        return false;
    }
}

VariationPattern SupportClassification::pattern() const
{
    VariationPattern p;
    p.n = n;
    p.s1_plus = s1_plus.size();
    p.s1_minus = s1_minus.size();
    p.s2 = s2.size() + s2_prime.size();
    p.s3 = (first_in_support ? 1 : 0) + (last_in_support ? 1 : 0);
    return p;
}

std::vector<double> gradient(std::span<const double> x)
{
    if (x.size() < 3) {
        throw DimensionError("gradient: signal length must be at least 3, got " + std::to_string(x.size()));
    }
    std::vector<double> d(x.size() - 1);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) { d[i] = x[i + 1] - x[i]; }
    return d;
}

SupportClassification classify_signs(std::span<const int> signs)
{
    if (signs.size() < 2) {
        throw DimensionError("classify: need at least 2 gradient entries (n >= 3)");
    }
    SupportClassification c;
    c.n = signs.size() + 1;
    auto sgn = [&](std::size_t i) { return signs[i - 1]; }; // 1-based
    for (std::size_t i = 1; i < c.n; ++i) {
        if (sgn(i) != 0) {
            c.support.push_back(i);
            c.signs.push_back(sgn(i) > 0 ? 1 : -1);
        }
    }
    for (std::size_t i = 2; i <= c.n - 1; ++i) {
        const bool cur = sgn(i) != 0;
        const bool prev = sgn(i - 1) != 0;
        if (cur && prev) {
            (sgn(i) * sgn(i - 1) > 0 ? c.s1_plus : c.s1_minus).push_back(i);
        } else if (cur) {
            c.s2.push_back(i);
        } else if (prev) {
            c.s2_prime.push_back(i);
        } else {
            c.s4.push_back(i);
        }
    }
    c.first_in_support = sgn(1) != 0;
    c.last_in_support = sgn(c.n - 1) != 0;
    return c;
}

SupportClassification classify(const GradientSparseSignal& x, double zero_tol)
{
    const auto d = gradient(x.values());
    std::vector<int> signs(d.size());
    std::transform(d.begin(), d.end(), signs.begin(), [zero_tol](double v) {
        if (std::abs(v) <= zero_tol) { return 0; }
        return v > 0 ? 1 : -1;
    });
    return classify_signs(signs);
}

namespace {

std::vector<double> levels_without_ties(std::size_t count, Rng& rng)
{
    std::normal_distribution<double> normal;
    std::vector<double> levels(count);
    for (auto& v : levels) { v = normal(rng); }
    for (std::size_t k = 1; k < count; ++k) {
        while (levels[k] == levels[k - 1]) { levels[k] = normal(rng); }
    }
    return levels;
}

} // namespace

GradientSparseSignal generate_random_support_signal(std::size_t n, std::size_t s, Rng& rng)
{
    if (n < 3) { throw DimensionError("signal length must be at least 3"); }
    if (s > n - 1) {
        throw ParameterError("random support: s = " + std::to_string(s) + " exceeds n - 1 = "
            + std::to_string(n - 1));
    }
    std::vector<std::size_t> positions(n - 1);
    std::iota(positions.begin(), positions.end(), std::size_t{1});
    std::vector<std::size_t> support;
    support.reserve(s);
    std::sample(positions.begin(), positions.end(), std::back_inserter(support), s, rng);

    const auto levels = levels_without_ties(s + 1, rng);
    std::vector<double> x(n);
    std::size_t segment = 0;
    for (std::size_t j = 0; j < n; ++j) {
        // x_{i+1} starts a new level when i is a breakpoint
        if (j > 0 && segment < s && support[segment] == j) { ++segment; }
        x[j] = levels[segment];
    }
    return GradientSparseSignal(std::move(x));
}

std::vector<int> layout_pattern_signs(const VariationPattern& p, Rng& rng)
{
    validate_realizable(p);
    std::vector<int> signs(p.n - 1, 0);
    const std::size_t runs = p.runs();
    if (runs == 0) { return signs; }

    std::bernoulli_distribution coin(0.5);
    // which tails are covered by a run
    bool left = p.s3 >= 1;
    bool right = p.s3 == 2;
    if (p.s3 == 1 && coin(rng)) { std::swap(left, right); }

    // run lengths add up to s1 + runs, spread evenly
    const std::size_t total = p.s1() + runs;
    std::vector<std::size_t> lengths(runs, total / runs);
    for (std::size_t k = 0; k < total % runs; ++k) { ++lengths[k]; }

    // gaps: runs - 1 separators plus a margin on each uncovered tail, each at
    // least one position wide; the spare room is shared out evenly
    const bool full = runs == 1 && p.s3 == 2;
    std::vector<std::size_t> gaps;
    if (!full) {
        const std::size_t slots = (runs - 1) + (left ? 0 : 1) + (right ? 0 : 1);
        const std::size_t spare = (p.n - 1) - total - slots;
        gaps.assign(slots, 1 + spare / slots);
        for (std::size_t k = 0; k < spare % slots; ++k) { ++gaps[k]; }
    }

    // consecutive pair types, shuffled: +1 same sign, -1 sign change
    std::vector<int> pair_type(p.s1_plus, 1);
    pair_type.insert(pair_type.end(), p.s1_minus, -1);
    std::shuffle(pair_type.begin(), pair_type.end(), rng);

    std::size_t pos = 0; // 0-based gradient position
    std::size_t gap_k = 0;
    std::size_t pair_k = 0;
    if (!left && !full) { pos += gaps[gap_k++]; }
    for (std::size_t r = 0; r < runs; ++r) {
        int sign = coin(rng) ? 1 : -1;
        for (std::size_t k = 0; k < lengths[r]; ++k) {
            if (k > 0) { sign *= pair_type[pair_k++]; }
            signs[pos++] = sign;
        }
        if (r + 1 < runs) { pos += gaps[gap_k++]; }
    }
    return signs;
}

GradientSparseSignal generate_pattern_signal(const VariationPattern& p, Rng& rng)
{
    const auto signs = layout_pattern_signs(p, rng);
    std::uniform_real_distribution<double> magnitude(0.5, 1.5);
    std::normal_distribution<double> normal;
    std::vector<double> x(p.n);
    x[0] = normal(rng);
    for (std::size_t i = 0; i + 1 < p.n; ++i) {
        x[i + 1] = x[i] + (signs[i] == 0 ? 0.0 : signs[i] * magnitude(rng));
    }
    return GradientSparseSignal(std::move(x));
}

nlohmann::json to_json(const VariationPattern& p)
{
    return {{"n", p.n}, {"s1_plus", p.s1_plus}, {"s1_minus", p.s1_minus}, {"s2", p.s2}, {"s3", p.s3}};
}

VariationPattern pattern_from_json(const nlohmann::json& j)
{
    try {
        VariationPattern p;
        p.n = j.at("n").get<std::size_t>();
        p.s1_plus = j.value("s1_plus", std::size_t{0});
        p.s1_minus = j.value("s1_minus", std::size_t{0});
        p.s2 = j.value("s2", std::size_t{0});
        p.s3 = j.value("s3", std::size_t{0});
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("pattern json: ") + e.what());
    }
}

void write_signal_csv(const std::string& path, std::span<const double> x)
{
    csv::Table rows;
    rows.reserve(x.size());
    for (double v : x) { rows.push_back({v}); }
    csv::write_numeric_file(path, {"x"}, rows);
}

GradientSparseSignal read_signal_csv(const std::string& path)
{
    const auto table = csv::read_numeric_file(path);
    std::vector<double> x;
    x.reserve(table.size());
    for (const auto& row : table) {
        if (row.size() != 1) { throw FormatError(path + ": signal csv must have one column"); }
        x.push_back(row[0]);
    }
    return GradientSparseSignal(std::move(x));
}

} // namespace tvphase
