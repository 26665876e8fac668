#include <cmath>

#include "doctest.h"
#include "tvphase/error.hpp"
#include "tvphase/experiment.hpp"

using namespace tvphase;

namespace {

PhaseCell cell(std::size_t m, std::size_t successes, std::size_t trials = 10)
{
    PhaseCell c;
    c.n = 50;
    c.s = 3;
    c.m = m;
    c.trials = trials;
    c.successes = successes;
    return c;
}

} // namespace

TEST_CASE("trials are deterministic in their seed")
{
    const auto a = run_trial(40, 4, 25, 123);
    const auto b = run_trial(40, 4, 25, 123);
    CHECK(a.success == b.success);
    CHECK(a.m_hat == b.m_hat);
    CHECK(a.pattern == b.pattern);
    CHECK(a.pattern.support_size() == 4);
    CHECK(run_trial(40, 4, 40, 5).success); // m = n always recovers
    CHECK_FALSE(run_trial(100, 20, 5, 5).success);
    CHECK_THROWS_AS(run_trial(40, 4, 41, 1), ParameterError);
    CHECK_THROWS_AS(run_trial(40, 40, 10, 1), ParameterError);
    CHECK_THROWS_AS(run_trial(40, 4, 0, 1), ParameterError);

    const VariationPattern p{40, 2, 0, 2, 0};
    const auto t = run_pattern_trial(p, 30, 9);
    CHECK(t.pattern == p);
}

TEST_CASE("isotonic fit")
{
    const std::vector<PhaseCell> cells{cell(5, 0), cell(10, 3), cell(15, 2), cell(20, 8), cell(25, 10)};
    const auto fit = isotonic_rates(cells);
    REQUIRE(fit.size() == 5);
    CHECK(fit[0] == doctest::Approx(0.0));
    CHECK(fit[1] == doctest::Approx(0.25));
    CHECK(fit[2] == doctest::Approx(0.25));
    CHECK(fit[3] == doctest::Approx(0.8));
    CHECK(fit[4] == doctest::Approx(1.0));
    for (std::size_t k = 1; k < fit.size(); ++k) { CHECK(fit[k] >= fit[k - 1]); }

    // weights matter
    const auto weighted = isotonic_rates({cell(5, 6, 10), cell(10, 0, 30)});
    CHECK(weighted[0] == doctest::Approx(0.15));
    CHECK(weighted[1] == doctest::Approx(0.15));
}

TEST_CASE("crossing point")
{
    const auto c = crossing_point({cell(5, 0), cell(10, 1), cell(15, 6), cell(20, 10)});
    REQUIRE(c.m.has_value());
    CHECK(*c.m >= 10.0);
    CHECK(*c.m <= 15.0);
    CHECK(c.std_dev > 0.0);
    CHECK_FALSE(crossing_point({cell(5, 0), cell(10, 1)}).m.has_value());
    CHECK(crossing_point({cell(5, 10), cell(10, 10)}).m.has_value());
}

TEST_CASE("grid runs are reproducible and resumable")
{
    PhaseGridConfig cfg;
    cfg.n = 30;
    cfg.s_values = {2, 5};
    cfg.m_values = {5, 15, 25};
    cfg.trials_per_cell = 6;
    cfg.bound_draws = 10;
    cfg.master_seed = 77;
    cfg.threads = 1;
    const auto serial = run_grid(cfg);
    cfg.threads = 4;
    std::size_t sunk = 0;
    const auto parallel = run_grid(cfg, [&](const PhaseCell&) { ++sunk; });
    REQUIRE(serial.cells.size() == 6);
    CHECK(sunk == 6);
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK(serial.cells[k].s == parallel.cells[k].s);
        CHECK(serial.cells[k].m == parallel.cells[k].m);
        CHECK(serial.cells[k].successes == parallel.cells[k].successes);
        CHECK(serial.cells[k].mean_m_hat == parallel.cells[k].mean_m_hat);
    }
    REQUIRE(serial.bounds.size() == 2);
    CHECK(serial.bounds[0].mean_m_hat == parallel.bounds[0].mean_m_hat);

    // resume with the first two cells already done
    std::vector<PhaseCell> done(serial.cells.begin(), serial.cells.begin() + 2);
    sunk = 0;
    const auto resumed = run_grid(cfg, [&](const PhaseCell&) { ++sunk; }, done);
    CHECK(sunk == 4);
    for (std::size_t k = 0; k < 6; ++k) { CHECK(resumed.cells[k].successes == serial.cells[k].successes); }

    const auto s5 = cells_for_s(serial.cells, 5);
    CHECK(s5.size() == 3);
    CHECK(s5.front().m == 5);

    PhaseGridConfig bad = cfg;
    bad.m_values = {31};
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = cfg;
    bad.s_values = {30};
    CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("bound curve")
{
    const auto p = bound_curve_point(100, 10, 50, 3, 2);
    CHECK(p.s == 10);
    CHECK(p.mean_m_hat > 0.0);
    CHECK(p.mean_m_hat < 100.0);
    CHECK(p.std_m_hat >= 0.0);
    CHECK(p.cai_lower >= 0.0);
    CHECK(p.cai_upper > p.cai_lower);
    CHECK(bound_curve_point(100, 10, 50, 3, 1).mean_m_hat == p.mean_m_hat);
}

TEST_CASE("pattern experiment")
{
    PatternExperimentConfig cfg;
    cfg.pattern = {60, 3, 0, 2, 0};
    cfg.m_values = {5, 30, 60};
    cfg.trials = 5;
    cfg.seed = 4;
    const auto cells = pattern_experiment(cfg);
    REQUIRE(cells.size() == 3);
    CHECK(cells[0].s == 4);
    CHECK(cells[2].successes == 5);
    cfg.trials = 0;
    CHECK(pattern_experiment(cfg).empty());
}

TEST_CASE("phase CSV round trip")
{
    PhaseCell c = cell(20, 7, 25);
    c.flagged = 1;
    c.mean_m_hat = 12.345678901234567;
    c.mean_cai_lower = 0.5;
    c.wall_ms = 3.25;
    const auto back = phase_cell_from_row(phase_csv_row(c));
    CHECK(back.n == c.n);
    CHECK(back.m == c.m);
    CHECK(back.successes == c.successes);
    CHECK(back.flagged == c.flagged);
    CHECK(back.mean_m_hat == c.mean_m_hat);
    CHECK(phase_csv_header().size() == phase_csv_row(c).size());
}
