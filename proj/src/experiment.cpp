#include "tvphase/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "tvphase/bound.hpp"
#include "tvphase/csv.hpp"
#include "tvphase/error.hpp"

namespace tvphase {

namespace {

constexpr std::uint64_t kBoundStream = 0xb0b0d5ULL;

TrialOutcome measure_and_solve(const GradientSparseSignal& x, std::size_t m, Rng& rng,
    const TvSolverOptions& solver)
{
    const std::size_t n = x.size();
    std::normal_distribution<double> normal;
    TvProblem problem;
    problem.A.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    // row-major fill so the draw order is independent of Eigen's storage order
    for (Eigen::Index i = 0; i < problem.A.rows(); ++i) {
        for (Eigen::Index j = 0; j < problem.A.cols(); ++j) { problem.A(i, j) = normal(rng); }
    }
    const Eigen::Map<const Eigen::VectorXd> xv(x.values().data(), static_cast<Eigen::Index>(n));
    problem.y = problem.A * xv;

    const TvSolution sol = solve_tv(problem, solver);
    TrialOutcome out;
    out.status = sol.status;
    out.flagged = sol.status != SolveStatus::Optimal;
    out.success = !out.flagged
        && check_recovery(x.values(), std::span<const double>(sol.x_hat.data(), n));
    out.pattern = classify(x).pattern();
    out.m_hat = minimize_psi(out.pattern).m_hat;
    return out;
}

void check_m(std::size_t n, std::size_t m)
{
    if (m < 1 || m > n) {
        throw ParameterError("trial: m = " + std::to_string(m) + " outside 1..n (n = " + std::to_string(n) + ")");
    }
}

template <typename TrialFn>
PhaseCell run_cell(std::size_t n, std::size_t s, std::size_t m, std::size_t trials, unsigned threads,
    TrialFn&& trial)
{
    const auto start = std::chrono::steady_clock::now();
    std::vector<TrialOutcome> outcomes(trials);
    parallel_for(trials, threads, [&](std::size_t k) { outcomes[k] = trial(k); });

    PhaseCell cell;
    cell.n = n;
    cell.s = s;
    cell.m = m;
    cell.trials = trials;
    double m_hat_sum = 0.0;
    for (const auto& o : outcomes) {
        cell.successes += o.success ? 1 : 0;
        cell.flagged += o.flagged ? 1 : 0;
        m_hat_sum += o.m_hat;
    }
    cell.mean_m_hat = trials ? m_hat_sum / static_cast<double>(trials) : 0.0;
    cell.mean_cai_lower = clamp_nonnegative(cai_lower(static_cast<double>(n), static_cast<double>(s))).value;
    cell.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return cell;
}

} // namespace

TrialOutcome run_trial(std::size_t n, std::size_t s, std::size_t m, std::uint64_t trial_seed,
    const TvSolverOptions& solver)
{
    check_m(n, m);
    Rng rng = make_rng(trial_seed);
    const auto x = generate_random_support_signal(n, s, rng);
    return measure_and_solve(x, m, rng, solver);
}

TrialOutcome run_pattern_trial(const VariationPattern& p, std::size_t m, std::uint64_t trial_seed,
    const TvSolverOptions& solver)
{
    check_m(p.n, m);
    Rng rng = make_rng(trial_seed);
    const auto x = generate_pattern_signal(p, rng);
    return measure_and_solve(x, m, rng, solver);
}

void PhaseGridConfig::validate() const
{
    if (n < 3) { throw ParameterError("phase grid: n must be at least 3"); }
    if (trials_per_cell < 1) { throw ParameterError("phase grid: trials must be at least 1"); }
    for (std::size_t s : s_values) {
        if (s > n - 1) { throw ParameterError("phase grid: s = " + std::to_string(s) + " exceeds n - 1"); }
    }
    for (std::size_t m : m_values) {
        if (m < 1 || m > n) { throw ParameterError("phase grid: m = " + std::to_string(m) + " outside 1..n"); }
    }
}

BoundCurvePoint bound_curve_point(std::size_t n, std::size_t s, std::size_t draws,
    std::uint64_t master_seed, unsigned threads)
{
    std::vector<double> m_hat(draws, 0.0);
    parallel_for(draws, threads, [&](std::size_t k) {
        Rng rng = make_rng(derive_seed(master_seed, {kBoundStream, s, k}));
        const auto x = generate_random_support_signal(n, s, rng);
        m_hat[k] = minimize_psi(classify(x).pattern()).m_hat;
    });
    BoundCurvePoint pt;
    pt.s = s;
    if (draws > 0) {
        double sum = 0.0;
        for (double v : m_hat) { sum += v; }
        pt.mean_m_hat = sum / static_cast<double>(draws);
        double ss = 0.0;
        for (double v : m_hat) { ss += (v - pt.mean_m_hat) * (v - pt.mean_m_hat); }
        pt.std_m_hat = draws > 1 ? std::sqrt(ss / static_cast<double>(draws - 1)) : 0.0;
    }
    pt.cai_lower = clamp_nonnegative(cai_lower(static_cast<double>(n), static_cast<double>(s))).value;
    pt.cai_upper = cai_upper(static_cast<double>(n), static_cast<double>(s));
    return pt;
}

PhaseGridResult run_grid(const PhaseGridConfig& cfg, const CellSink& sink,
    const std::vector<PhaseCell>& done)
{
    cfg.validate();
    PhaseGridResult result;
    for (std::size_t s : cfg.s_values) {
        result.bounds.push_back(bound_curve_point(cfg.n, s, cfg.bound_draws, cfg.master_seed, cfg.threads));
        for (std::size_t m : cfg.m_values) {
            auto prior = std::find_if(done.begin(), done.end(), [&](const PhaseCell& c) {
                return c.n == cfg.n && c.s == s && c.m == m && c.trials == cfg.trials_per_cell;
            });
            if (prior != done.end()) {
                result.cells.push_back(*prior);
                continue;
            }
            PhaseCell cell = run_cell(cfg.n, s, m, cfg.trials_per_cell, cfg.threads, [&](std::size_t k) {
                return run_trial(cfg.n, s, m, derive_seed(cfg.master_seed, {s, m, k}), cfg.solver);
            });
            if (sink) { sink(cell); }
            result.cells.push_back(cell);
        }
    }
    return result;
}

std::vector<PhaseCell> pattern_experiment(const PatternExperimentConfig& cfg, const CellSink& sink)
{
    validate_realizable(cfg.pattern);
    std::vector<PhaseCell> cells;
    if (cfg.trials == 0) { return cells; }
    for (std::size_t m : cfg.m_values) { check_m(cfg.pattern.n, m); }
    const std::size_t s = cfg.pattern.support_size();
    for (std::size_t m : cfg.m_values) {
        PhaseCell cell = run_cell(cfg.pattern.n, s, m, cfg.trials, cfg.threads, [&](std::size_t k) {
            return run_pattern_trial(cfg.pattern, m, derive_seed(cfg.seed, {m, k}), cfg.solver);
        });
        if (sink) { sink(cell); }
        cells.push_back(cell);
    }
    return cells;
}

std::vector<double> isotonic_rates(const std::vector<PhaseCell>& cells)
{
    struct Block {
        double value;
        double weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    for (const auto& c : cells) {
        blocks.push_back({c.rate(), static_cast<double>(std::max<std::size_t>(c.trials, 1)), 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].value > blocks.back().value) {
            Block top = blocks.back();
            blocks.pop_back();
            Block& prev = blocks.back();
            const double w = prev.weight + top.weight;
            prev.value = (prev.value * prev.weight + top.value * top.weight) / w;
            prev.weight = w;
            prev.count += top.count;
        }
    }
    std::vector<double> fitted;
    fitted.reserve(cells.size());
    for (const auto& b : blocks) { fitted.insert(fitted.end(), b.count, b.value); }
    return fitted;
}

CrossingEstimate crossing_point(const std::vector<PhaseCell>& cells)
{
    CrossingEstimate est;
    const auto fitted = isotonic_rates(cells);
    for (std::size_t i = 0; i < fitted.size(); ++i) {
        if (fitted[i] < 0.5) { continue; }
        est.m = static_cast<double>(cells[i].m);
        if (i == 0) {
            est.std_dev = cells.size() > 1 ? static_cast<double>(cells[1].m - cells[0].m) : 0.0;
            return est;
        }
        const double dm = static_cast<double>(cells[i].m - cells[i - 1].m);
        const double slope = (fitted[i] - fitted[i - 1]) / dm;
        const double trials = static_cast<double>(std::max<std::size_t>(cells[i].trials, 1));
        const double rate_sd = std::sqrt(0.25 / trials);
        if (slope <= 0.0) {
            est.std_dev = dm;
        } else {
            const double spread = rate_sd / slope;
            est.std_dev = std::sqrt(spread * spread + dm * dm / 12.0);
        }
        return est;
    }
    return est;
}

std::vector<PhaseCell> cells_for_s(const std::vector<PhaseCell>& all, std::size_t s)
{
    std::vector<PhaseCell> out;
    std::copy_if(all.begin(), all.end(), std::back_inserter(out), [s](const PhaseCell& c) { return c.s == s; });
    std::sort(out.begin(), out.end(), [](const PhaseCell& a, const PhaseCell& b) { return a.m < b.m; });
    return out;
}

std::vector<std::string> phase_csv_header()
{
    return {"n", "s", "m", "trials", "successes", "flagged", "mean_m_hat", "mean_cai_lower", "wall_ms"};
}

std::vector<double> phase_csv_row(const PhaseCell& c)
{
    return {static_cast<double>(c.n), static_cast<double>(c.s), static_cast<double>(c.m),
        static_cast<double>(c.trials), static_cast<double>(c.successes), static_cast<double>(c.flagged),
        c.mean_m_hat, c.mean_cai_lower, c.wall_ms};
}

PhaseCell phase_cell_from_row(const std::vector<double>& row)
{
    if (row.size() != 9) { throw FormatError("phase csv: expected 9 columns"); }
    auto count = [](double v) { return static_cast<std::size_t>(std::llround(v)); };
    PhaseCell c;
    c.n = count(row[0]);
    c.s = count(row[1]);
    c.m = count(row[2]);
    c.trials = count(row[3]);
    c.successes = count(row[4]);
    c.flagged = count(row[5]);
    c.mean_m_hat = row[6];
    c.mean_cai_lower = row[7];
    c.wall_ms = row[8];
    return c;
}

std::vector<PhaseCell> read_phase_csv(const std::string& path)
{
    std::vector<PhaseCell> cells;
    for (const auto& row : csv::read_numeric_file(path)) { cells.push_back(phase_cell_from_row(row)); }
    return cells;
}

nlohmann::json to_json(const PhaseGridConfig& cfg)
{
    return {
        {"n", cfg.n},
        {"s_values", cfg.s_values},
        {"m_values", cfg.m_values},
        {"trials_per_cell", cfg.trials_per_cell},
        {"bound_draws", cfg.bound_draws},
        {"master_seed", cfg.master_seed},
        {"solver", {{"feas_tol", cfg.solver.feas_tol}, {"gap_tol", cfg.solver.gap_tol},
                       {"max_iter", cfg.solver.max_iter}}},
    };
}

} // namespace tvphase
