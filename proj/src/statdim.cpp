#include "tvphase/statdim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tvphase/error.hpp"

namespace tvphase {

SubdiffSpec SubdiffSpec::from_classification(const SupportClassification& c)
{
    SubdiffSpec spec;
    spec.n = c.n;
    spec.support = c.support;
    spec.signs = c.signs;
    return spec;
}

SubdiffSpec SubdiffSpec::from_signal(const GradientSparseSignal& x)
{
    return from_classification(classify(x));
}

std::vector<int> SubdiffSpec::sign_vector() const
{
    std::vector<int> v(n - 1, 0);
    for (std::size_t k = 0; k < support.size(); ++k) { v[support[k] - 1] = signs[k]; }
    return v;
}

void SubdiffSpec::validate() const
{
    if (n < 3) { throw DimensionError("subdifferential: n must be at least 3"); }
    if (support.size() != signs.size()) {
        throw DimensionError("subdifferential: support and sign lists differ in length");
    }
    for (std::size_t k = 0; k < support.size(); ++k) {
        if (support[k] < 1 || support[k] > n - 1) {
            throw ParameterError("subdifferential: support index outside 1..n-1");
        }
        if (k > 0 && support[k] <= support[k - 1]) {
            throw ParameterError("subdifferential: support must be strictly ascending");
        }
        if (signs[k] != 1 && signs[k] != -1) {
            throw ParameterError("subdifferential: signs must be +1 or -1");
        }
    }
}

/* Direct 1-D TV denoising (Condat's scan). Maintains, for the segment that
 * starts at k0, the range [vmin, vmax] of admissible constant values together
 * with the dual slacks umin / umax; a segment is emitted as soon as one of the
 * bounds becomes infeasible, and the scan restarts just after it. */
void tv_denoise_1d(std::span<const double> input, double lambda, std::span<double> output)
{
    const std::ptrdiff_t width = static_cast<std::ptrdiff_t>(input.size());
    if (width == 0) { return; }
    if (lambda <= 0.0) {
        std::copy(input.begin(), input.end(), output.begin());
        return;
    }
    std::ptrdiff_t k = 0, k0 = 0, kplus = 0, kminus = 0;
    double umin = lambda, umax = -lambda;
    double vmin = input[0] - lambda, vmax = input[0] + lambda;
    const double twolambda = 2.0 * lambda;
    const double minlambda = -lambda;
    for (;;) {
        while (k == width - 1) {
            if (umin < 0.0) {
                do { output[k0++] = vmin; } while (k0 <= kminus);
                k = kminus = k0;
                vmin = input[k];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if (umax > 0.0) {
                do { output[k0++] = vmax; } while (k0 <= kplus);
                k = kplus = k0;
                vmax = input[k];
                umax = minlambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / static_cast<double>(k - k0 + 1);
                do { output[k0++] = vmin; } while (k0 <= k);
                return;
            }
        }
        umin += input[k + 1] - vmin;
        if (umin < minlambda) {
            do { output[k0++] = vmin; } while (k0 <= kminus);
            k = kminus = kplus = k0;
            vmin = input[k];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }
        umax += input[k + 1] - vmax;
        if (umax > lambda) {
            do { output[k0++] = vmax; } while (k0 <= kplus);
            k = kminus = kplus = k0;
            vmax = input[k];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }
        ++k;
        if (umin >= lambda) {
            kminus = k;
            vmin += (umin - lambda) / static_cast<double>(kminus - k0 + 1);
            umin = lambda;
        }
        if (umax <= minlambda) {
            kplus = k;
            vmax += (umax + lambda) / static_cast<double>(kplus - k0 + 1);
            umax = minlambda;
        }
    }
}

namespace {

void check_inputs(std::span<const double> g, double t, const SubdiffSpec& spec)
{
    if (g.size() != spec.n) {
        throw DimensionError("project_distance: g has length " + std::to_string(g.size())
            + ", expected " + std::to_string(spec.n));
    }
    if (!(t >= 0.0)) { throw ParameterError("project_distance: t must be nonnegative"); }
}

// g - t D_S' sgn(d_S): the residual with only the fixed coordinates applied.
// Node j (0-based) sees edge j-1 with weight +1 and edge j with weight -1.
std::vector<double> fixed_residual(std::span<const double> g, double t, const std::vector<int>& sv)
{
    std::vector<double> h(g.begin(), g.end());
    for (std::size_t e = 0; e < sv.size(); ++e) {
        if (sv[e] == 0) { continue; }
        h[e] += t * sv[e];
        h[e + 1] -= t * sv[e];
    }
    return h;
}

DistanceSample project_exact(std::span<const double> g, double t, const SubdiffSpec& spec)
{
    const auto sv = spec.sign_vector();
    const auto h = fixed_residual(g, t, sv);
    std::vector<double> x(h.size());
    // nodes [begin, end) form a segment when no fixed edge joins them
    std::size_t begin = 0;
    for (std::size_t node = 0; node < spec.n; ++node) {
        const bool cut = node + 1 == spec.n || sv[node] != 0;
        if (!cut) { continue; }
        const std::size_t len = node + 1 - begin;
        tv_denoise_1d(std::span<const double>(h).subspan(begin, len), t,
            std::span<double>(x).subspan(begin, len));
        begin = node + 1;
    }
    DistanceSample out;
    out.t = t;
    out.dist_sq = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
    out.iterations = 1;
    return out;
}

DistanceSample project_coordinate_descent(std::span<const double> g, double t,
    const SubdiffSpec& spec, const ProjectionOptions& opts)
{
    const auto sv = spec.sign_vector();
    std::vector<double> r = fixed_residual(g, t, sv); // residual g - t D' z, z_free = 0
    std::vector<double> z(sv.size(), 0.0);
    std::vector<std::size_t> free;
    for (std::size_t e = 0; e < sv.size(); ++e) {
        if (sv[e] == 0) { free.push_back(e); }
    }
    auto objective = [&] { return std::inner_product(r.begin(), r.end(), r.begin(), 0.0); };

    DistanceSample out;
    out.t = t;
    // projected gradient of the objective in z, relative to t
    auto kkt_residual = [&] {
        double kkt = 0.0;
        for (std::size_t e : free) {
            const double grad = 2.0 * (r[e] - r[e + 1]);
            double pg = grad;
            if (z[e] >= 1.0) { pg = std::max(grad, 0.0); }
            if (z[e] <= -1.0) { pg = std::min(grad, 0.0); }
            kkt = std::max(kkt, std::abs(pg));
        }
        return kkt;
    };

    double f = objective();
    std::size_t sweep = 0;
    out.converged = free.empty();
    while (sweep < opts.cd_max_sweeps && !free.empty()) {
        ++sweep;
        for (std::size_t e : free) {
            // remove edge e, minimize (rho_e + t w)^2 + (rho_{e+1} - t w)^2 over |w| <= 1
            const double rho_a = r[e] - t * z[e];
            const double rho_b = r[e + 1] + t * z[e];
            const double w = std::clamp((rho_b - rho_a) / (2.0 * t), -1.0, 1.0);
            z[e] = w;
            r[e] = rho_a + t * w;
            r[e + 1] = rho_b - t * w;
        }
        const double f_new = objective();
        const double decrease = f - f_new;
        f = f_new;
        if (decrease <= opts.cd_tol && kkt_residual() <= opts.kkt_tol) {
            out.converged = true;
            break;
        }
    }
    out.iterations = sweep;
    out.dist_sq = f;
    return out;
}

} // namespace

DistanceSample project_distance(std::span<const double> g, double t, const SubdiffSpec& spec,
    const ProjectionOptions& opts)
{
    check_inputs(g, t, spec);
    if (t == 0.0) {
        DistanceSample out;
        out.dist_sq = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
        return out;
    }
    if (opts.method == ProjectionMethod::CoordinateDescent) {
        return project_coordinate_descent(g, t, spec, opts);
    }
    return project_exact(g, t, spec);
}

double clamped_lower_bound(std::span<const double> g, double t, const SubdiffSpec& spec)
{
    check_inputs(g, t, spec);
    const auto sv = spec.sign_vector();
    const std::size_t n = spec.n;
    auto pos_sq = [](double v) { return v > 0.0 ? v * v : 0.0; };
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        // node j: residual g_j - t (z_{j-1} - z_j), edges outside 0..n-2 absent
        const bool has_left = j > 0;
        const bool has_right = j + 1 < n;
        const bool left_fixed = has_left && sv[j - 1] != 0;
        const bool right_fixed = has_right && sv[j] != 0;
        double base = g[j];
        if (left_fixed) { base -= t * sv[j - 1]; }
        if (right_fixed) { base += t * sv[j]; }
        const int free_edges = (has_left && !left_fixed ? 1 : 0) + (has_right && !right_fixed ? 1 : 0);
        total += free_edges == 0 ? base * base : pos_sq(std::abs(base) - free_edges * t);
    }
    return total;
}

TMinimum minimize_over_t(std::span<const double> g, const SubdiffSpec& spec,
    const ProjectionOptions& popts, const TSearchOptions& topts)
{
    bool converged = true;
    auto f = [&](double t) {
        DistanceSample s = project_distance(g, t, spec, popts);
        converged = converged && s.converged;
        return s.dist_sq;
    };
    double hi = topts.t_hi;
    while (f(hi) < f(0.5 * hi) && hi < 1e6) { hi *= 2.0; }

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > topts.t_tol) {
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
    TMinimum best{0.5 * (a + b), f(0.5 * (a + b)), true};
    const double f0 = f(0.0);
    if (f0 < best.dist_sq) { best = {0.0, f0, true}; }
    best.converged = converged;
    return best;
}

std::vector<double> gaussian_sample(std::size_t n, std::uint64_t seed, std::size_t k)
{
    Rng rng = make_rng(derive_seed(seed, {0x5a11e5ULL, k}));
    std::normal_distribution<double> normal;
    std::vector<double> g(n);
    for (auto& v : g) { v = normal(rng); }
    return g;
}

namespace {

McEstimate summarize(const std::vector<double>& values, const std::vector<char>& ok)
{
    McEstimate est;
    double sum = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (ok[k]) { sum += values[k]; ++est.samples; } else { ++est.flagged; }
    }
    if (est.samples == 0) { return est; }
    est.mean = sum / static_cast<double>(est.samples);
    double ss = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (ok[k]) { ss += (values[k] - est.mean) * (values[k] - est.mean); }
    }
    if (est.samples > 1) {
        const double var = ss / static_cast<double>(est.samples - 1);
        est.std_error = std::sqrt(var / static_cast<double>(est.samples));
    }
    est.half_width = 1.96 * est.std_error;
    return est;
}

} // namespace

McEstimate estimate_statdim(const SubdiffSpec& spec, std::size_t trials, std::uint64_t seed,
    const EstimatorOptions& opts)
{
    spec.validate();
    std::vector<double> values(trials, 0.0);
    std::vector<char> ok(trials, 1);
    parallel_for(trials, opts.threads, [&](std::size_t k) {
        const auto g = gaussian_sample(spec.n, seed, k);
        const TMinimum best = minimize_over_t(g, spec, opts.projection, opts.t_search);
        values[k] = best.dist_sq;
        ok[k] = best.converged ? 1 : 0;
    });
    return summarize(values, ok);
}

McEstimate mean_distance(const SubdiffSpec& spec, double t, std::size_t trials, std::uint64_t seed,
    const EstimatorOptions& opts)
{
    spec.validate();
    std::vector<double> values(trials, 0.0);
    std::vector<char> ok(trials, 1);
    parallel_for(trials, opts.threads, [&](std::size_t k) {
        const auto g = gaussian_sample(spec.n, seed, k);
        const DistanceSample s = project_distance(g, t, spec, opts.projection);
        values[k] = s.dist_sq;
        ok[k] = s.converged ? 1 : 0;
    });
    return summarize(values, ok);
}

BuEstimate estimate_Bu(const SubdiffSpec& spec, std::span<const double> t_grid, std::size_t trials,
    std::uint64_t seed, const EstimatorOptions& opts)
{
    spec.validate();
    if (t_grid.empty()) { throw ParameterError("estimate_Bu: empty t grid"); }
    for (double t : t_grid) {
        if (!(t >= 0.0)) { throw ParameterError("estimate_Bu: grid values must be nonnegative"); }
    }

    std::vector<std::vector<double>> samples(trials);
    parallel_for(trials, opts.threads, [&](std::size_t k) { samples[k] = gaussian_sample(spec.n, seed, k); });

    auto mean_at = [&](double t) {
        std::vector<double> values(trials, 0.0);
        std::vector<char> ok(trials, 1);
        parallel_for(trials, opts.threads, [&](std::size_t k) {
            const DistanceSample s = project_distance(samples[k], t, spec, opts.projection);
            values[k] = s.dist_sq;
            ok[k] = s.converged ? 1 : 0;
        });
        return summarize(values, ok);
    };

    BuEstimate out;
    std::size_t best = 0;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        out.curve.push_back({t_grid[i], mean_at(t_grid[i])});
        if (out.curve[i].estimate.mean < out.curve[best].estimate.mean) { best = i; }
    }
    out.t_best = t_grid[best];
    out.at_best = out.curve[best].estimate;

    if (opts.refine && t_grid.size() > 1 && trials > 0) {
        // the sample mean is convex in t, so its minimum lies between the grid
        // neighbours of the best grid point
        std::vector<double> sorted(t_grid.begin(), t_grid.end());
        std::sort(sorted.begin(), sorted.end());
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), out.t_best);
        double a = it == sorted.begin() ? *it : *(it - 1);
        double b = it + 1 == sorted.end() ? *it : *(it + 1);
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double c = b - inv_phi * (b - a);
        double d = a + inv_phi * (b - a);
        McEstimate ec = mean_at(c), ed = mean_at(d);
        while (b - a > opts.t_search.t_tol * std::max(1.0, b) && b - a > 1e-6) {
            if (ec.mean <= ed.mean) {
                b = d; d = c; ed = ec;
                c = b - inv_phi * (b - a);
                ec = mean_at(c);
            } else {
                a = c; c = d; ec = ed;
                d = a + inv_phi * (b - a);
                ed = mean_at(d);
            }
        }
        const McEstimate& refined = ec.mean <= ed.mean ? ec : ed;
        if (refined.mean < out.at_best.mean) {
            out.at_best = refined;
            out.t_best = ec.mean <= ed.mean ? c : d;
        }
    }
    return out;
}

} // namespace tvphase
