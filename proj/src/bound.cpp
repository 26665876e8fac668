#include "tvphase/bound.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "tvphase/error.hpp"
#include "tvphase/gaussian.hpp"

namespace tvphase {

namespace {

// E(g - c)_+^2 for standard normal g, any real c.
double upper_second_moment(double c)
{
    return (1.0 + c * c) * normal_q(c) - c * normal_pdf(c);
}

} // namespace

double phi2(double z)
{
    if (!(z >= 0.0)) { throw ParameterError("phi2: argument must be nonnegative"); }
    return 2.0 * upper_second_moment(z);
}

double phi1(double a, double b)
{
    if (!(a >= 0.0) || !(b >= 0.0)) { throw ParameterError("phi1: arguments must be nonnegative"); }
    // (|g + a| - b)_+ splits into the tails g > b - a and -g > b + a
    return upper_second_moment(b - a) + upper_second_moment(b + a);
}

PsiTerms psi_terms(double t, const VariationPattern& p)
{
    validate_counts(p);
    if (!(t >= 0.0)) { throw ParameterError("psi: t must be nonnegative"); }
    const double t2 = t * t;
    PsiTerms terms;
    terms.consecutive_same = static_cast<double>(p.s1_plus);
    terms.consecutive_opposite = static_cast<double>(p.s1_minus) * (1.0 + 4.0 * t2);
    terms.individual = static_cast<double>(p.s2) * phi1(t, t);
    terms.interior_null = static_cast<double>(p.s4()) * phi2(2.0 * t);
    terms.tail_end = static_cast<double>(p.s3) * (1.0 + t2);
    terms.endpoint_null = static_cast<double>(2 - p.s3) * phi2(t);
    return terms;
}

double psi(double t, const VariationPattern& p) { return psi_terms(t, p).total(); }

PsiTerms psi_limit_terms(const VariationPattern& p)
{
    validate_counts(p);
    constexpr double inf = std::numeric_limits<double>::infinity();
    PsiTerms terms;
    terms.consecutive_same = static_cast<double>(p.s1_plus);
    terms.consecutive_opposite = p.s1_minus > 0 ? inf : 0.0;
    terms.individual = 0.5 * static_cast<double>(p.s2); // phi1(t,t) -> 1/2
    terms.tail_end = p.s3 > 0 ? inf : 0.0;
    return terms;
}

BoundResult minimize_psi(const VariationPattern& p, const MinimizeOptions& opts)
{
    validate_counts(p);
    auto f = [&](double t) { return psi(t, p); };

    // Psi is convex in t; expand the bracket until the right end is uphill
    double hi = opts.t_hi;
    const bool grows = p.s1_minus > 0 || p.s3 > 0;
    if (grows) {
        while (f(hi) < f(0.5 * hi) && hi < 1e6) { hi *= 2.0; }
    }

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > opts.t_tol) {
        if (fc <= fd) {
            b = d; d = c; fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    double t_best = 0.5 * (a + b);
    double f_best = f(t_best);
    for (double t : {0.0, hi}) {
        double v = f(t);
        if (v < f_best) { f_best = v; t_best = t; }
    }

    BoundResult result;
    if (!grows) {
        const PsiTerms limit = psi_limit_terms(p);
        if (limit.total() <= f_best) {
            result.m_hat = limit.total();
            result.terms = limit;
            return result;
        }
    }
    result.m_hat = f_best;
    result.t_star = t_best;
    result.terms = psi_terms(t_best, p);
    return result;
}

double cai_lower(double n, double s)
{
    return 9.0 * std::sqrt(s * n) / (50.0 * std::numbers::pi) - 12.0 / (5.0 * std::numbers::pi);
}

double cai_upper(double n, double s)
{
    const double c = 2.0 * std::sqrt(5.0) + std::sqrt(10.0);
    return std::sqrt(32.0) * c * c * std::sqrt(n * s) * std::log(2.0 * n) + 1.0;
}

ClampedValue clamp_nonnegative(double v)
{
    if (v < 0.0) { return {0.0, true}; }
    return {v, false};
}

double failure_probability_bound(double m, double m_hat)
{
    if (!(m_hat > 0.0)) { throw ParameterError("failure bound: m_hat must be positive"); }
    if (!(m >= 0.0)) { throw ParameterError("failure bound: m must be nonnegative"); }
    if (m > m_hat) { throw ParameterError("failure bound: no guarantee for m > m_hat"); }
    const double gap = m_hat - m;
    return std::max(0.0, 1.0 - 4.0 * std::exp(-gap * gap / (16.0 * m_hat)));
}

nlohmann::json to_json(const PsiTerms& terms)
{
    // infinite limits only occur in terms that are zero-weighted at a finite
    // optimum, so they never reach a serialized BoundResult
    return {
        {"consecutive_same", terms.consecutive_same},
        {"consecutive_opposite", terms.consecutive_opposite},
        {"individual", terms.individual},
        {"interior_null", terms.interior_null},
        {"tail_end", terms.tail_end},
        {"endpoint_null", terms.endpoint_null},
    };
}

nlohmann::json to_json(const BoundResult& r)
{
    nlohmann::json j;
    j["m_hat"] = r.m_hat;
    if (r.t_star) {
        j["t_star"] = *r.t_star;
    } else {
        j["t_star"] = "infinity";
    }
    j["terms"] = to_json(r.terms);
    return j;
}

BoundResult bound_result_from_json(const nlohmann::json& j)
{
    try {
        BoundResult r;
        r.m_hat = j.at("m_hat").get<double>();
        const auto& t = j.at("t_star");
        if (t.is_string()) {
            if (t.get<std::string>() != "infinity") { throw FormatError("bound json: bad t_star"); }
        } else {
            r.t_star = t.get<double>();
        }
        const auto& terms = j.at("terms");
        r.terms.consecutive_same = terms.at("consecutive_same").get<double>();
        r.terms.consecutive_opposite = terms.at("consecutive_opposite").get<double>();
        r.terms.individual = terms.at("individual").get<double>();
        r.terms.interior_null = terms.at("interior_null").get<double>();
        r.terms.tail_end = terms.at("tail_end").get<double>();
        r.terms.endpoint_null = terms.at("endpoint_null").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bound json: ") + e.what());
    }
}

} // namespace tvphase

namespace tvphase {

std::vector<VariationPattern> benchmark_patterns()
{
    return {
        {100, 9, 0, 2, 0},
        {100, 0, 9, 2, 0},
        {100, 0, 8, 2, 2},
        {100, 0, 9, 1, 1},
        {100, 9, 0, 1, 1},
        {100, 0, 0, 20, 0},
        {100, 0, 1, 17, 1},
        {100, 4, 5, 2, 0},
    };
}

} // namespace tvphase
