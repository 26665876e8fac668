/*=============================================================================
 * Phase-transition Monte Carlo: for each (s, m) cell, draw a gradient-sparse
 * signal, measure it with a fresh i.i.d. Gaussian matrix, solve the TV
 * program and count exact recoveries. Every trial seed is derived from
 * (master seed, s, m, trial), so results do not depend on scheduling.
 *===========================================================================*/
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tvphase/parallel.hpp"
#include "tvphase/pattern.hpp"
#include "tvphase/tvsolve.hpp"

namespace tvphase {

struct TrialOutcome {
    bool success = false;
    bool flagged = false; // solver did not certify optimality
    double m_hat = 0.0;
    VariationPattern pattern;
    SolveStatus status = SolveStatus::MaxIter;
};

/* One recovery trial on a random-support signal. Throws ParameterError unless
 * 1 <= m <= n and s <= n - 1. */
TrialOutcome run_trial(std::size_t n, std::size_t s, std::size_t m, std::uint64_t trial_seed,
    const TvSolverOptions& solver = {});

/* Same, but the signal realizes the given pattern. */
TrialOutcome run_pattern_trial(const VariationPattern& p, std::size_t m, std::uint64_t trial_seed,
    const TvSolverOptions& solver = {});

struct PhaseCell {
    std::size_t n = 0;
    std::size_t s = 0;
    std::size_t m = 0;
    std::size_t trials = 0;
    std::size_t successes = 0;
    std::size_t flagged = 0;
    double mean_m_hat = 0.0;     // over the cell's realized signals
    double mean_cai_lower = 0.0; // clamped at 0
    double wall_ms = 0.0;

    double rate() const { return trials == 0 ? 0.0 : static_cast<double>(successes) / trials; }
};

struct PhaseGridConfig {
    std::size_t n = 100;
    std::vector<std::size_t> s_values;
    std::vector<std::size_t> m_values;
    std::size_t trials_per_cell = 50;
    std::size_t bound_draws = 300; // signal draws per s for the mean bound curve
    std::uint64_t master_seed = 1;
    unsigned threads = default_threads();
    TvSolverOptions solver;

    /// Throws ParameterError on out-of-range entries.
    void validate() const;
};

/* Per-s mean of m_hat (and of the comparison bounds) over independent draws. */
struct BoundCurvePoint {
    std::size_t s = 0;
    double mean_m_hat = 0.0;
    double std_m_hat = 0.0;
    double cai_lower = 0.0; // clamped at 0
    double cai_upper = 0.0;
};

struct PhaseGridResult {
    std::vector<PhaseCell> cells; // s-major, m-minor, in config order
    std::vector<BoundCurvePoint> bounds;
};

/* Called after each finished cell; used to persist partial results. */
using CellSink = std::function<void(const PhaseCell&)>;

/* `done` lists cells already computed by an interrupted run; they are kept
 * as-is and not recomputed. */
PhaseGridResult run_grid(const PhaseGridConfig& cfg, const CellSink& sink = {},
    const std::vector<PhaseCell>& done = {});

BoundCurvePoint bound_curve_point(std::size_t n, std::size_t s, std::size_t draws,
    std::uint64_t master_seed, unsigned threads = default_threads());

struct PatternExperimentConfig {
    VariationPattern pattern;
    std::vector<std::size_t> m_values;
    std::size_t trials = 25;
    std::uint64_t seed = 1;
    unsigned threads = default_threads();
    TvSolverOptions solver;
};

/* Cells with s = |S| of the pattern; empty when trials == 0. */
std::vector<PhaseCell> pattern_experiment(const PatternExperimentConfig& cfg,
    const CellSink& sink = {});

/* Pool-adjacent-violators fit of success rates (weighted by trials) that is
 * nondecreasing in m. Input cells must share s and be sorted by m. */
std::vector<double> isotonic_rates(const std::vector<PhaseCell>& cells);

struct CrossingEstimate {
    std::optional<double> m;  // smallest m with smoothed rate >= 0.5
    double std_dev = 0.0;     // binomial spread mapped through the local slope
};

/* Cells must share s and be sorted by m. */
CrossingEstimate crossing_point(const std::vector<PhaseCell>& cells);

/// Cells of `all` with the given s, sorted by m.
std::vector<PhaseCell> cells_for_s(const std::vector<PhaseCell>& all, std::size_t s);

// persistence
std::vector<std::string> phase_csv_header();
std::vector<double> phase_csv_row(const PhaseCell& c);
PhaseCell phase_cell_from_row(const std::vector<double>& row);
std::vector<PhaseCell> read_phase_csv(const std::string& path);

nlohmann::json to_json(const PhaseGridConfig& cfg);

} // namespace tvphase
