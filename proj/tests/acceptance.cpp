// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "tvphase/bound.hpp"
#include "tvphase/experiment.hpp"
#include "tvphase/parallel.hpp"
#include "tvphase/pattern.hpp"
#include "tvphase/statdim.hpp"
#include "tvphase/tvsolve.hpp"

using namespace tvphase;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index m, Eigen::Index n, Rng& rng)
{
    std::normal_distribution<double> normal;
    Eigen::MatrixXd A(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) { A(i, j) = normal(rng); }
    }
    return A;
}

Outcome table1()
{
    const double expected[] = {10.0, 32.04, 31.74, 32.584, 12.33, 10.0, 16.53, 25.54};
    const auto start = std::chrono::steady_clock::now();
    const auto rows = benchmark_patterns();
    double worst = 0.0;
    std::string values;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const double m_hat = minimize_psi(rows[k]).m_hat;
        worst = std::max(worst, std::abs(m_hat - expected[k]));
        values += fmt("%s%.3f", k ? " " : "", m_hat);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {rows.size() == 8 && worst <= 0.05 && secs < 1.0,
        fmt("m_hat = {%s}, max |err| = %.4f, %.3f s", values.c_str(), worst, secs)};
}

Outcome psi_at_zero()
{
    Rng rng = make_rng(derive_seed(2, {0}));
    std::uniform_int_distribution<std::size_t> pick_n(10, 1000);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = pick_n(rng);
        const std::size_t s = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        const auto p = classify(generate_random_support_signal(n, s, rng)).pattern();
        worst = std::max(worst, std::abs(psi(0.0, p) - static_cast<double>(n)));
    }
    return {worst <= 1e-9, fmt("100 patterns, max |psi(0) - n| = %.2e", worst)};
}

Outcome quadrature_agreement()
{
    const auto start = std::chrono::steady_clock::now();
    double worst1 = 0.0, worst2 = 0.0;
    for (int k = 0; k < 50; ++k) {
        const double t = 10.0 * k / 49.0;
        worst1 = std::max(worst1, std::abs(phi1(t, t) - oracle::phi1_quadrature(t, t)));
        worst2 = std::max(worst2, std::abs(phi2(t) - oracle::phi2_quadrature(t)));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst1 <= 1e-8 && worst2 <= 1e-8 && secs < 5.0,
        fmt("50 points on [0, 10], max err phi1 %.2e, phi2 %.2e, %.3f s", worst1, worst2, secs)};
}

Outcome projection_oracle()
{
    Rng rng = make_rng(derive_seed(4, {0}));
    std::uniform_int_distribution<std::size_t> pick_n(3, 5);
    std::uniform_int_distribution<int> tri(-1, 1);
    std::uniform_real_distribution<double> pick_t(0.0, 3.0);
    std::normal_distribution<double> normal;
    struct Instance {
        std::vector<double> g;
        double t;
        std::vector<int> signs;
    };
    std::vector<Instance> instances(200);
    for (auto& inst : instances) {
        const std::size_t n = pick_n(rng);
        inst.signs.resize(n - 1);
        for (int& s : inst.signs) { s = tri(rng); }
        inst.g.resize(n);
        for (double& v : inst.g) { v = normal(rng); }
        inst.t = pick_t(rng);
    }
    std::vector<double> err(instances.size());
    parallel_for(instances.size(), default_threads(), [&](std::size_t k) {
        const auto& inst = instances[k];
        const auto spec = SubdiffSpec::from_classification(classify_signs(inst.signs));
        err[k] = std::abs(project_distance(inst.g, inst.t, spec).dist_sq
            - oracle::projection_grid_oracle(inst.g, inst.t, inst.signs));
    });
    const double worst = *std::max_element(err.begin(), err.end());
    return {worst <= 1e-4, fmt("200 instances n <= 5, max |exact - grid| = %.2e", worst)};
}

Outcome expectation_lower_bound()
{
    const auto rows = benchmark_patterns();
    bool pass = true;
    double worst_margin = 1e300;
    for (std::size_t row : {1u, 2u, 7u}) {
        Rng rng = make_rng(derive_seed(5, {row}));
        const auto spec = SubdiffSpec::from_signal(generate_pattern_signal(rows[row], rng));
        for (double t : {0.25, 0.5, 1.0, 2.0}) {
            const auto mean = mean_distance(spec, t, 1000, derive_seed(5, {row, 1}));
            const double margin = (mean.mean - psi(t, rows[row])) / mean.std_error;
            worst_margin = std::min(worst_margin, margin);
            pass = pass && margin >= -3.0;
        }
    }
    return {pass, fmt("rows 2, 3, 8 at t in {0.25, 0.5, 1, 2}: min (mean - psi)/se = %.2f", worst_margin)};
}

Outcome statdim_ordering()
{
    const auto rows = benchmark_patterns();
    std::vector<double> grid;
    for (int k = 1; k <= 200; ++k) { grid.push_back(0.05 * k); }
    bool pass = true;
    std::string detail;
    for (std::size_t row : {0u, 1u, 5u}) {
        Rng rng = make_rng(derive_seed(6, {row}));
        const auto spec = SubdiffSpec::from_signal(generate_pattern_signal(rows[row], rng));
        const std::uint64_t seed = derive_seed(6, {row, 1});
        const auto delta = estimate_statdim(spec, 1000, seed);
        const auto bu = estimate_Bu(spec, grid, 1000, seed);
        const double m_hat = minimize_psi(rows[row]).m_hat;
        const double sigma = std::max(delta.std_error, bu.at_best.std_error);
        const bool ok = delta.mean >= m_hat - 3.0 * delta.std_error && delta.mean <= bu.at_best.mean + 3.0 * sigma;
        pass = pass && ok;
        detail += fmt("%srow %zu: m_hat %.2f, delta %.2f +- %.2f, B_u %.2f", detail.empty() ? "" : "; ", row + 1,
            m_hat, delta.mean, delta.std_error, bu.at_best.mean);
    }
    return {pass, detail};
}

Outcome phase_transition()
{
    const auto start = std::chrono::steady_clock::now();
    PhaseGridConfig cfg;
    cfg.n = 100;
    cfg.s_values = {4, 10, 20};
    for (std::size_t m = 5; m <= 100; m += 5) { cfg.m_values.push_back(m); }
    cfg.trials_per_cell = 25;
    cfg.bound_draws = 300;
    cfg.master_seed = 7;
    const auto result = run_grid(cfg);

    bool iso = true, floor = true, crossing = true;
    std::string detail;
    for (std::size_t idx = 0; idx < cfg.s_values.size(); ++idx) {
        const std::size_t s = cfg.s_values[idx];
        const auto cells = cells_for_s(result.cells, s);
        const double mean_m_hat = result.bounds[idx].mean_m_hat;

        // (a) no decrease between any two cells beyond three binomial standard errors of a difference
        double worst_drop = 0.0;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            for (std::size_t j = i + 1; j < cells.size(); ++j) {
                const double pi = cells[i].rate(), pj = cells[j].rate();
                const double p = std::clamp(0.5 * (pi + pj), 1.0 / 25.0, 1.0 - 1.0 / 25.0);
                const double se = std::sqrt(2.0 * p * (1.0 - p) / 25.0);
                worst_drop = std::max(worst_drop, (pi - pj) / se);
            }
        }
        iso = iso && worst_drop <= 3.0;

        // (b) far below the bound, recovery is rare
        double worst_low = 0.0;
        for (const auto& c : cells) {
            if (static_cast<double>(c.m) <= mean_m_hat - 4.0 * std::sqrt(mean_m_hat)) {
                worst_low = std::max(worst_low, c.rate());
            }
        }
        floor = floor && worst_low <= 0.10;

        // (c) the empirical crossing is not below the bound
        const auto cross = crossing_point(cells);
        const bool ok = cross.m && *cross.m >= mean_m_hat - 2.0 * cross.std_dev;
        crossing = crossing && ok;
        detail += fmt("%ss=%zu: mean m_hat %.1f, crossing %.1f +- %.1f, max drop %.1f se, low-m rate %.2f",
            detail.empty() ? "" : "; ", s, mean_m_hat, cross.m ? *cross.m : -1.0, cross.std_dev, worst_drop, worst_low);
    }
    std::size_t flagged = 0;
    for (const auto& c : result.cells) { flagged += c.flagged; }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    detail += fmt("; (a) %s (b) %s (c) %s; %zu flagged; %.1f s", iso ? "ok" : "FAIL", floor ? "ok" : "FAIL",
        crossing ? "ok" : "FAIL", flagged, secs);
    return {iso && floor && crossing, detail};
}

Outcome opposite_sign_impact()
{
    PatternExperimentConfig plus;
    plus.pattern = {100, 9, 0, 2, 0};
    for (std::size_t m = 5; m <= 60; m += 5) { plus.m_values.push_back(m); }
    plus.trials = 25;
    plus.seed = 8;
    PatternExperimentConfig minus = plus;
    minus.pattern = {100, 0, 9, 2, 0};
    const auto a = crossing_point(pattern_experiment(plus));
    const auto b = crossing_point(pattern_experiment(minus));
    const bool pass = a.m && b.m && *b.m > *a.m;
    return {pass, fmt("crossing s1+ heavy %.1f +- %.1f, s1- heavy %.1f +- %.1f", a.m ? *a.m : -1.0, a.std_dev,
                      b.m ? *b.m : -1.0, b.std_dev)};
}

Outcome solver_certification()
{
    Rng rng = make_rng(derive_seed(9, {0}));
    std::uniform_int_distribution<int> pick_n(8, 64);
    std::size_t optimal = 0;
    double worst_feas = 0.0, worst_gap = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const int n = pick_n(rng);
        const int m = std::uniform_int_distribution<int>(std::max(1, n / 4), n)(rng);
        const auto x = generate_random_support_signal(static_cast<std::size_t>(n),
            std::uniform_int_distribution<std::size_t>(0, static_cast<std::size_t>(n) / 4)(rng), rng);
        const auto A = gaussian_matrix(m, n, rng);
        const Eigen::VectorXd y = A * Eigen::Map<const Eigen::VectorXd>(x.values().data(), n);
        const auto sol = solve_tv({A, y});
        const double feas = sol.feas_residual / (1.0 + y.norm());
        worst_feas = std::max(worst_feas, feas);
        worst_gap = std::max(worst_gap, sol.gap);
        if (sol.status == SolveStatus::Optimal && feas <= 1e-9 && sol.gap <= 1e-9) { ++optimal; }
    }
    double worst_oracle = 0.0;
    std::uniform_int_distribution<int> small_n(3, 8);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = small_n(rng);
        const int m = std::uniform_int_distribution<int>(1, std::min(6, n))(rng);
        const auto x = generate_random_support_signal(static_cast<std::size_t>(n),
            std::uniform_int_distribution<std::size_t>(0, static_cast<std::size_t>(n - 1))(rng), rng);
        const auto A = gaussian_matrix(m, n, rng);
        const Eigen::VectorXd y = A * Eigen::Map<const Eigen::VectorXd>(x.values().data(), n);
        const auto sol = solve_tv({A, y});
        worst_oracle = std::max(worst_oracle, std::abs(sol.objective - oracle::tv_lp_vertex_oracle(A, y)));
    }
    return {optimal == 100 && worst_oracle <= 1e-7,
        fmt("%zu/100 certified (max rel feas %.1e, max gap %.1e); n <= 8 oracle max |diff| %.1e", optimal, worst_feas,
            worst_gap, worst_oracle)};
}

} // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "Table I reproduction", table1},
        {2, "Psi_0 = n", psi_at_zero},
        {3, "closed form vs quadrature", quadrature_agreement},
        {4, "projection vs grid oracle", projection_oracle},
        {5, "expectation lower bound", expectation_lower_bound},
        {6, "statistical-dimension ordering", statdim_ordering},
        {7, "phase transition at n = 100", phase_transition},
        {8, "s1- impact exceeds s1+", opposite_sign_impact},
        {9, "solver certification", solver_certification},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) { ++failures; }
        std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
