#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "tvphase/bound.hpp"
#include "tvphase/cli.hpp"
#include "tvphase/csv.hpp"
#include "tvphase/experiment.hpp"
#include "tvphase/pattern.hpp"

using namespace tvphase;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    Run r;
    r.code = cli::dispatch(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("tvphase_cli_test_" + name);
    fs::remove_all(dir);
    return dir.string();
}

std::string first_line(const std::string& path)
{
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    return line;
}

} // namespace

TEST_CASE("bound subcommand")
{
    const auto r = run({"bound", "--n", "100", "--s1p", "9", "--s2", "2"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j.at("m_hat").get<double>() == doctest::Approx(10.0));
    CHECK(j.at("t_star") == "infinity");
    CHECK(j.contains("terms"));
    // JSON round trips through the library's own parser
    const auto back = bound_result_from_json(j);
    CHECK(back.at_infinity());
    CHECK(pattern_from_json(j.at("pattern")) == VariationPattern{100, 9, 0, 2, 0});

    const auto inline_json = run({"bound", "--pattern-json", R"({"n":100,"s1_plus":0,"s1_minus":9,"s2":2,"s3":0})"});
    REQUIRE(inline_json.code == 0);
    CHECK(std::abs(json::parse(inline_json.out).at("m_hat").get<double>() - 32.04) < 0.05);
}

TEST_CASE("table1 subcommand")
{
    const auto r = run({"table1"});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    const auto rows = csv::read_numeric(in);
    REQUIRE(rows.size() == 8);
    const double expected[] = {10.0, 32.04, 31.74, 32.584, 12.33, 10.0, 16.53, 25.54};
    for (std::size_t k = 0; k < 8; ++k) { CHECK(std::abs(rows[k][6] - expected[k]) <= 0.05); }
}

TEST_CASE("phi subcommand")
{
    const auto r = run({"phi", "--t", "1"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(std::abs(j.at("phi2_t").get<double>() - 0.1506796) < 1e-7);
    CHECK(std::abs(j.at("phi1_tt").get<double>() - 0.5057687) < 1e-7);
    CHECK(run({"phi"}).code == cli::kValidationError);
    CHECK(run({"phi", "--z", "-1"}).code == cli::kValidationError);
}

TEST_CASE("classify and gen subcommands")
{
    const auto r = run({"classify", "--in", TVPHASE_TEST_DATA_DIR "/fig1.csv"});
    REQUIRE(r.code == 0);
    CHECK(pattern_from_json(json::parse(r.out)) == VariationPattern{20, 1, 0, 10, 0});

    const std::string dir = scratch("gen");
    const auto g = run({"gen", "--n", "100", "--s1m", "9", "--s2", "2", "--seed", "5", "--out", dir});
    REQUIRE(g.code == 0);
    CHECK(pattern_from_json(json::parse(g.out)) == VariationPattern{100, 0, 9, 2, 0});
    CHECK(classify(read_signal_csv(dir + "/signal.csv")).pattern() == VariationPattern{100, 0, 9, 2, 0});

    // manifest linkage
    std::ifstream mf(dir + "/manifest.json");
    const auto manifest = cli::manifest_from_json(json::parse(mf));
    CHECK(manifest.command == "gen");
    CHECK(manifest.master_seed == 5);
    CHECK(first_line(dir + "/signal.csv") == "# manifest " + manifest.hash());

    // determinism: same flags, same signal
    const auto a = run({"gen", "--n", "30", "--s", "4", "--seed", "9"});
    const auto b = run({"gen", "--n", "30", "--s", "4", "--seed", "9"});
    const auto c = run({"gen", "--n", "30", "--s", "4", "--seed", "10"});
    CHECK(a.out == b.out);
    CHECK(a.out != c.out);

    CHECK(run({"gen", "--n", "10", "--s2", "3"}).code == cli::kValidationError);
    CHECK(run({"classify", "--in", "/nonexistent/file.csv"}).code == cli::kValidationError);
}

TEST_CASE("seed precedence")
{
    const auto flagged = run({"gen", "--n", "30", "--s", "4", "--seed", "9"});
    const auto other = run({"gen", "--n", "30", "--s", "4", "--seed", "3"});
    setenv("TVPHASE_SEED", "9", 1);
    const auto from_env = run({"gen", "--n", "30", "--s", "4"});
    const auto flag_wins = run({"gen", "--n", "30", "--s", "4", "--seed", "3"});
    setenv("TVPHASE_SEED", "abc", 1);
    const auto bad_env = run({"gen", "--n", "30", "--s", "4"});
    unsetenv("TVPHASE_SEED");
    CHECK(from_env.out == flagged.out);
    CHECK(flag_wins.out == other.out);
    CHECK(bad_env.code == cli::kValidationError);
}

TEST_CASE("config file supplies defaults that flags override")
{
    const std::string dir = scratch("config");
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir + "/run.toml");
        cfg << "seed = 9\n";
    }
    const auto flagged = run({"gen", "--n", "30", "--s", "4", "--seed", "9"});
    const auto from_cfg = run({"--config", dir + "/run.toml", "gen", "--n", "30", "--s", "4"});
    const auto override = run({"--config", dir + "/run.toml", "gen", "--n", "30", "--s", "4", "--seed", "3"});
    const auto direct = run({"gen", "--n", "30", "--s", "4", "--seed", "3"});
    CHECK(from_cfg.code == 0);
    CHECK(from_cfg.out == flagged.out);
    CHECK(override.out == direct.out);
}

TEST_CASE("solve subcommand")
{
    const std::string dir = scratch("solve");
    fs::create_directories(dir);
    Rng rng = make_rng(3);
    std::normal_distribution<double> normal;
    const std::size_t n = 20, m = 16;
    const auto x = generate_random_support_signal(n, 3, rng);
    csv::Table A(m, std::vector<double>(n));
    csv::Table y(m, std::vector<double>(1, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            A[i][j] = normal(rng);
            y[i][0] += A[i][j] * x.values()[j];
        }
    }
    csv::write_numeric_file(dir + "/A.csv", {}, A);
    csv::write_numeric_file(dir + "/y.csv", {"y"}, y);
    const auto r = run({"solve", "--A", dir + "/A.csv", "--y", dir + "/y.csv", "--out", dir + "/out"});
    REQUIRE(r.code == 0);
    const auto status = json::parse(r.out);
    CHECK(status.at("status") == "Optimal");
    const auto x_hat = read_signal_csv(dir + "/out/x_hat.csv");
    CHECK(check_recovery(x.values(), x_hat.values()));

    // duplicated row: rank deficient, reported as solver failure
    A[1] = A[0];
    csv::write_numeric_file(dir + "/A_bad.csv", {}, A);
    CHECK(run({"solve", "--A", dir + "/A_bad.csv", "--y", dir + "/y.csv", "--out", dir + "/bad"}).code
        == cli::kSolverFailure);
    // shape mismatch
    csv::write_numeric_file(dir + "/y_short.csv", {"y"}, csv::Table(3, std::vector<double>{1.0}));
    CHECK(run({"solve", "--A", dir + "/A.csv", "--y", dir + "/y_short.csv", "--out", dir + "/bad2"}).code
        == cli::kValidationError);
}

TEST_CASE("statdim subcommand")
{
    const std::string dir = scratch("statdim");
    const auto r = run({"statdim", "--n", "60", "--s1m", "3", "--s2", "2", "--trials", "100", "--t-grid", "0.1:2:0.1",
        "--threads", "2", "--out", dir});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j.at("Bu_hat").get<double>() >= j.at("delta_hat").get<double>());
    CHECK(j.at("m_hat_TV").get<double>() > 0.0);
    const auto curve = csv::read_numeric_file(dir + "/statdim_curve.csv");
    CHECK(curve.size() == 20);
    CHECK(curve.front().size() == 3);
}

TEST_CASE("phase subcommands")
{
    const std::string dir = scratch("phase");
    const std::vector<std::string> args{"phase", "--n", "30", "--s-values", "2,4", "--m-values", "5:25:10",
        "--trials", "4", "--bound-draws", "10", "--seed", "4", "--out", dir};
    const auto first = run(args);
    REQUIRE(first.code == 0);
    const auto cells = read_phase_csv(dir + "/phase.csv");
    CHECK(cells.size() == 6);
    CHECK(fs::exists(dir + "/bounds.csv"));
    CHECK(fs::exists(dir + "/crossings.csv"));

    auto resume_args = args;
    resume_args.push_back("--resume");
    const auto again = run(resume_args);
    REQUIRE(again.code == 0);
    CHECK(json::parse(again.out).at("crossings") == json::parse(first.out).at("crossings"));
    const auto cells_again = read_phase_csv(dir + "/phase.csv");
    REQUIRE(cells_again.size() == 6);
    for (std::size_t k = 0; k < 6; ++k) { CHECK(cells_again[k].successes == cells[k].successes); }

    auto changed = resume_args;
    changed[6] = "5:25:5";
    CHECK(run(changed).code == cli::kValidationError);

    const std::string pdir = scratch("pattern_phase");
    const auto pp = run({"pattern-phase", "--n", "40", "--s2", "4", "--m-values", "5,20,40", "--trials", "3",
        "--out", pdir});
    REQUIRE(pp.code == 0);
    CHECK(read_phase_csv(pdir + "/pattern_phase.csv").size() == 3);
}

TEST_CASE("usage errors")
{
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"bogus"}).code == cli::kUsage);
    const auto unknown = run({"bound", "--n", "10", "--frobnicate"});
    CHECK(unknown.code == cli::kUsage);
    CHECK(unknown.err.find("Usage") != std::string::npos);
    CHECK(run({"bound", "--n", "ten"}).code == cli::kUsage);
    CHECK(run({"solve", "--A", "a.csv"}).code == cli::kUsage);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"bound", "--n", "5", "--s2", "7"}).code == cli::kValidationError);
    CHECK(run({"phase", "--s-values", "2", "--m-values", "5:1:0", "--out", scratch("bad")}).code
        == cli::kValidationError);
}

TEST_CASE("list parsing and manifests")
{
    CHECK(cli::parse_index_list("5:20:5") == std::vector<std::size_t>{5, 10, 15, 20});
    CHECK(cli::parse_index_list(" 4, 10 ,20") == std::vector<std::size_t>{4, 10, 20});
    CHECK(cli::parse_real_list("0.1:0.3:0.1").size() == 3);
    CHECK_THROWS(cli::parse_index_list("1.5"));
    CHECK_THROWS(cli::parse_index_list("1:2"));
    CHECK_THROWS(cli::parse_real_list("a,b"));

    cli::RunManifest m;
    m.command = "phase";
    m.config = {{"n", 100}};
    m.master_seed = 42;
    m.started_at = "2026-01-01T00:00:00Z";
    const auto back = cli::manifest_from_json(json::parse(m.to_json().dump()));
    CHECK(back.hash() == m.hash());
    CHECK(back.started_at == m.started_at);
    cli::RunManifest later = m;
    later.started_at = "2027-01-01T00:00:00Z";
    CHECK(later.hash() == m.hash());
    later.master_seed = 43;
    CHECK(later.hash() != m.hash());
}
