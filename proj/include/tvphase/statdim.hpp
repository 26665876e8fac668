/*=============================================================================
 * Monte Carlo estimates of the statistical dimension of the TV descent cone
 *
 *   delta = E inf_{t>=0} dist^2(g, t dTV(x)),    B_u = inf_{t>=0} E dist^2(g, t dTV(x)),
 *
 * where dTV(x) = D' { z : z_i = sgn(d_i) on S, |z_i| <= 1 off S } and g is
 * standard normal in R^n.
 *
 * The inner distance is a box-constrained QP in the free z coordinates with
 * tridiagonal Hessian t^2 D_F D_F'. Fixing the support coordinates cuts the
 * chain into independent segments; on each, Moreau's identity turns the
 * distance into the squared norm of a 1-D TV-denoising solution, which is
 * computed exactly by a direct taut-string type scan. Cyclic coordinate
 * descent with clamped updates is kept as an alternative route.
 *===========================================================================*/
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tvphase/parallel.hpp"
#include "tvphase/pattern.hpp"

namespace tvphase {

struct SubdiffSpec {
    std::size_t n = 0;
    std::vector<std::size_t> support; // 1-based gradient positions, ascending
    std::vector<int> signs;           // +-1 per support position

    static SubdiffSpec from_classification(const SupportClassification& c);
    static SubdiffSpec from_signal(const GradientSparseSignal& x);

    /// sgn(d) over all n-1 positions, zero off the support.
    std::vector<int> sign_vector() const;
    /// Throws DimensionError / ParameterError on malformed specs.
    void validate() const;
};

enum class ProjectionMethod { Exact, CoordinateDescent };

struct ProjectionOptions {
    ProjectionMethod method = ProjectionMethod::Exact;
    double cd_tol = 1e-12;          // stop when a sweep decreases the objective less than this
    std::size_t cd_max_sweeps = 200000;
    double kkt_tol = 1e-8;          // final projected-gradient check for coordinate descent
};

struct DistanceSample {
    double t = 0.0;
    double dist_sq = 0.0;
    std::size_t iterations = 0; // sweeps for coordinate descent, 1 for the exact route
    bool converged = true;
};

/* dist^2(g, t dTV(x)). Throws DimensionError if g.size() != spec.n and
 * ParameterError if t < 0. */
DistanceSample project_distance(std::span<const double> g, double t, const SubdiffSpec& spec,
    const ProjectionOptions& opts = {});

/* Sum of the per-coordinate minima obtained by minimizing each squared
 * residual separately over its own box coordinates; a lower bound on
 * project_distance(g, t, spec). */
double clamped_lower_bound(std::span<const double> g, double t, const SubdiffSpec& spec);

/* 1-D total-variation denoising: argmin_x 1/2||x - input||^2 + lambda sum|x_{i+1} - x_i|. */
void tv_denoise_1d(std::span<const double> input, double lambda, std::span<double> output);

struct TMinimum {
    double t = 0.0;
    double dist_sq = 0.0;
    bool converged = true;
};

struct TSearchOptions {
    double t_hi = 20.0;  // initial bracket, doubled while the right end is still downhill
    double t_tol = 1e-8;
};

/* inf_{t >= 0} dist^2(g, t dTV(x)) by golden section (the map is convex in t). */
TMinimum minimize_over_t(std::span<const double> g, const SubdiffSpec& spec,
    const ProjectionOptions& popts = {}, const TSearchOptions& topts = {});

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    double half_width = 0.0; // 95% normal-approximation half-width
    std::size_t samples = 0; // samples that entered the mean
    std::size_t flagged = 0; // samples excluded for non-convergence
};

struct EstimatorOptions {
    ProjectionOptions projection;
    TSearchOptions t_search;
    unsigned threads = default_threads();
    bool refine = true; // B_u: golden-section refinement around the best grid point
};

/* Standard normal sample number k of the stream `seed`. Both estimators draw
 * from this, so for a common seed they use common random numbers. */
std::vector<double> gaussian_sample(std::size_t n, std::uint64_t seed, std::size_t k);

McEstimate estimate_statdim(const SubdiffSpec& spec, std::size_t trials, std::uint64_t seed,
    const EstimatorOptions& opts = {});

struct CurvePoint {
    double t = 0.0;
    McEstimate estimate;
};

struct BuEstimate {
    std::vector<CurvePoint> curve; // one point per grid t, in grid order
    double t_best = 0.0;
    McEstimate at_best;            // B_u estimate: the mean at t_best
};

/* Throws ParameterError on an empty grid or a negative grid value. */
BuEstimate estimate_Bu(const SubdiffSpec& spec, std::span<const double> t_grid, std::size_t trials,
    std::uint64_t seed, const EstimatorOptions& opts = {});

/* Per-t Monte Carlo mean of dist^2 without any minimization. */
McEstimate mean_distance(const SubdiffSpec& spec, double t, std::size_t trials, std::uint64_t seed,
    const EstimatorOptions& opts = {});

} // namespace tvphase
