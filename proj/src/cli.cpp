#include "tvphase/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tvphase/bound.hpp"
#include "tvphase/csv.hpp"
#include "tvphase/error.hpp"
#include "tvphase/experiment.hpp"
#include "tvphase/parallel.hpp"
#include "tvphase/pattern.hpp"
#include "tvphase/statdim.hpp"
#include "tvphase/tvsolve.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tvphase::cli {

namespace {

/* Solver did not certify optimality. */
class SolverFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::uint64_t fnv1a(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string trim(std::string s)
{
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) { return {}; }
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

double parse_real(const std::string& text)
{
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used != text.size()) { throw ParameterError("bad number '" + text + "'"); }
        return v;
    } catch (const std::logic_error&) {
        throw ParameterError("bad number '" + text + "'");
    }
}

std::vector<double> parse_list_or_range(const std::string& raw)
{
    const std::string text = trim(raw);
    if (text.empty()) { throw ParameterError("empty list"); }
    std::vector<double> values;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string part; std::getline(ss, part, ':');) { parts.push_back(trim(part)); }
        if (parts.size() != 3) { throw ParameterError("range must be start:stop:step, got '" + text + "'"); }
        const double start = parse_real(parts[0]);
        const double stop = parse_real(parts[1]);
        const double step = parse_real(parts[2]);
        if (!(step > 0.0)) { throw ParameterError("range step must be positive"); }
        const double slack = 1e-9 * step;
        for (std::size_t k = 0;; ++k) {
            const double v = start + static_cast<double>(k) * step;
            if (v > stop + slack) { break; }
            values.push_back(v);
        }
        return values;
    }
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');) { values.push_back(parse_real(trim(part))); }
    return values;
}

/* Resolved master seed: --seed flag, then TVPHASE_SEED, then config/default. */
std::uint64_t resolve_seed(const std::vector<std::string>& args, std::uint64_t configured)
{
    const bool on_command_line = std::any_of(args.begin(), args.end(), [](const std::string& a) {
        return a == "--seed" || a.rfind("--seed=", 0) == 0;
    });
    if (on_command_line) { return configured; }
    if (const char* env = std::getenv("TVPHASE_SEED")) {
        try {
            std::size_t used = 0;
            const std::string text(env);
            const unsigned long long v = std::stoull(text, &used);
            if (used != text.size()) { throw ParameterError(""); }
            return v;
        } catch (const std::logic_error&) {
            throw ParameterError("TVPHASE_SEED must be a nonnegative integer");
        }
    }
    return configured;
}

struct Common {
    std::string out_dir;
    unsigned threads = default_threads();
    std::uint64_t seed = 1;
};

struct PatternFlags {
    std::size_t n = 0;
    std::size_t s1p = 0;
    std::size_t s1m = 0;
    std::size_t s2 = 0;
    std::size_t s3 = 0;
    std::string pattern_json;

    void add_to(CLI::App* app, bool n_required)
    {
        auto* opt = app->add_option("--n", n, "signal length");
        if (n_required) { opt->required(); }
        app->add_option("--s1p", s1p, "same-sign consecutive variations");
        app->add_option("--s1m", s1m, "opposite-sign consecutive variations");
        app->add_option("--s2", s2, "individual variations");
        app->add_option("--s3", s3, "tail-end variations");
        app->add_option("--pattern-json", pattern_json, "pattern as inline JSON or a JSON file path");
    }

    bool given(const CLI::App* app) const
    {
        return !pattern_json.empty() || app->count("--s1p") || app->count("--s1m") || app->count("--s2")
            || app->count("--s3");
    }

    VariationPattern resolve() const
    {
        if (pattern_json.empty()) { return {n, s1p, s1m, s2, s3}; }
        json j;
        const std::string text = trim(pattern_json);
        try {
            if (!text.empty() && text.front() == '{') {
                j = json::parse(text);
            } else {
                std::ifstream in(text);
                if (!in) { throw FormatError("cannot open pattern file " + text); }
                j = json::parse(in);
            }
        } catch (const json::parse_error& e) {
            throw FormatError(std::string("pattern json: ") + e.what());
        }
        if (!j.contains("n") && n > 0) { j["n"] = n; }
        return pattern_from_json(j);
    }
};

class Outputs {
public:
    Outputs(std::string dir, RunManifest manifest)
        : dir_(std::move(dir)), manifest_(std::move(manifest)), hash_(manifest_.hash())
    {
        if (!dir_.empty()) { fs::create_directories(dir_); }
    }

    bool enabled() const { return !dir_.empty(); }
    const std::string& hash() const { return hash_; }
    std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

    void csv(const std::string& name, const std::vector<std::string>& header, const csv::Table& rows) const
    {
        std::ofstream out(path(name));
        if (!out) { throw FormatError("cannot write " + path(name)); }
        out << "# manifest " << hash_ << '\n';
        csv::write_numeric(out, header, rows);
    }

    void json_file(const std::string& name, json j) const
    {
        j["manifest"] = hash_;
        std::ofstream out(path(name));
        if (!out) { throw FormatError("cannot write " + path(name)); }
        out << j.dump(2) << '\n';
    }

    void write_manifest(bool complete, const json& extra = json::object())
    {
        json j = manifest_.to_json();
        j["complete"] = complete;
        for (auto it = extra.begin(); it != extra.end(); ++it) { j[it.key()] = it.value(); }
        std::ofstream out(path("manifest.json"));
        if (!out) { throw FormatError("cannot write manifest"); }
        out << j.dump(2) << '\n';
    }

    void finish(const json& extra = json::object())
    {
        manifest_.finished_at = utc_timestamp();
        if (enabled()) { write_manifest(true, extra); }
    }

private:
    std::string dir_;
    RunManifest manifest_;
    std::string hash_;
};

RunManifest make_manifest(const std::string& command, json config, std::uint64_t seed)
{
    RunManifest m;
    m.command = command;
    m.config = std::move(config);
    m.master_seed = seed;
    m.started_at = utc_timestamp();
    return m;
}

json bound_json(const VariationPattern& p)
{
    const BoundResult r = minimize_psi(p);
    json j = to_json(r);
    j["pattern"] = to_json(p);
    const double s = static_cast<double>(p.support_size());
    const ClampedValue lower = clamp_nonnegative(cai_lower(static_cast<double>(p.n), s));
    j["cai_lower"] = lower.value;
    j["cai_lower_clamped"] = lower.clamped;
    j["cai_upper"] = cai_upper(static_cast<double>(p.n), s);
    return j;
}

json classification_json(const SupportClassification& c)
{
    json j = to_json(c.pattern());
    j["s"] = c.support.size();
    j["support"] = c.support;
    j["signs"] = c.signs;
    j["S1_plus"] = c.s1_plus;
    j["S1_minus"] = c.s1_minus;
    j["S2"] = c.s2;
    j["S2_prime"] = c.s2_prime;
    j["S4_size"] = c.s4.size();
    return j;
}

Eigen::MatrixXd to_matrix(const csv::Table& t)
{
    if (t.empty()) { throw FormatError("empty matrix csv"); }
    Eigen::MatrixXd A(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(t.front().size()));
    for (std::size_t i = 0; i < t.size(); ++i) {
        for (std::size_t j = 0; j < t[i].size(); ++j) { A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t[i][j]; }
    }
    return A;
}

Eigen::VectorXd to_vector(const csv::Table& t)
{
    if (t.empty()) { throw FormatError("empty vector csv"); }
    std::vector<double> v;
    if (t.size() == 1) {
        v = t.front();
    } else {
        for (const auto& row : t) {
            if (row.size() != 1) { throw FormatError("vector csv must be one column or one row"); }
            v.push_back(row[0]);
        }
    }
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json crossings_json(const std::vector<PhaseCell>& cells, const std::vector<std::size_t>& s_values)
{
    json arr = json::array();
    for (std::size_t s : s_values) {
        const auto row = cells_for_s(cells, s);
        const CrossingEstimate c = crossing_point(row);
        double m_hat = 0.0;
        for (const auto& cell : row) { m_hat += cell.mean_m_hat; }
        if (!row.empty()) { m_hat /= static_cast<double>(row.size()); }
        json e = {{"s", s}, {"crossing_std", c.std_dev}, {"mean_m_hat", m_hat}};
        e["crossing_m"] = c.m ? json(*c.m) : json(nullptr);
        arr.push_back(e);
    }
    return arr;
}

csv::Table crossing_rows(const json& crossings)
{
    csv::Table rows;
    for (const auto& e : crossings) {
        const double m = e["crossing_m"].is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                   : e["crossing_m"].get<double>();
        rows.push_back({e["s"].get<double>(), m, e["crossing_std"].get<double>(), e["mean_m_hat"].get<double>()});
    }
    return rows;
}

} // namespace

std::vector<std::size_t> parse_index_list(const std::string& text)
{
    std::vector<std::size_t> out;
    for (double v : parse_list_or_range(text)) {
        if (v < 0.0 || v != std::floor(v)) { throw ParameterError("expected nonnegative integers in '" + text + "'"); }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::vector<double> parse_real_list(const std::string& text) { return parse_list_or_range(text); }

std::string RunManifest::hash() const
{
    const json core = {{"command", command}, {"config", config}, {"master_seed", master_seed}, {"version", version}};
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(core.dump());
    return os.str();
}

json RunManifest::to_json() const
{
    return {
        {"command", command},
        {"config", config},
        {"master_seed", master_seed},
        {"version", version},
        {"started_at", started_at},
        {"finished_at", finished_at},
        {"hash", hash()},
    };
}

RunManifest manifest_from_json(const json& j)
{
    try {
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.config = j.at("config");
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.version = j.at("version").get<std::string>();
        m.started_at = j.value("started_at", "");
        m.finished_at = j.value("finished_at", "");
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest json: ") + e.what());
    }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Phase-transition bounds and Monte Carlo validation for TV minimization", "tvphase"};
    app.set_config("--config", "", "TOML/INI file with option defaults");
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(kVersion));

    Common common;
    app.add_option("--out", common.out_dir, "output directory");
    app.add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", common.seed, "master seed (TVPHASE_SEED overrides the config file)");

    // bound
    auto* bound_cmd = app.add_subcommand("bound", "lower bound m_hat for a variation pattern");
    PatternFlags bound_flags;
    bound_flags.add_to(bound_cmd, false);

    auto* table_cmd = app.add_subcommand("table1", "m_hat for the eight benchmark patterns as CSV");

    auto* phi_cmd = app.add_subcommand("phi", "evaluate phi1(a, b) and phi2(z)");
    double phi_t = 0, phi_a = 0, phi_b = 0, phi_z = 0;
    phi_cmd->add_option("--t", phi_t, "report phi1(t,t), phi2(t), phi2(2t)");
    phi_cmd->add_option("--a", phi_a, "phi1 first argument");
    phi_cmd->add_option("--b", phi_b, "phi1 second argument");
    phi_cmd->add_option("--z", phi_z, "phi2 argument");

    auto* gen_cmd = app.add_subcommand("gen", "generate a gradient-sparse signal");
    PatternFlags gen_flags;
    gen_flags.add_to(gen_cmd, false);
    std::size_t gen_s = 0;
    gen_cmd->add_option("--s", gen_s, "random support size");

    auto* classify_cmd = app.add_subcommand("classify", "variation pattern of a signal CSV");
    std::string classify_in;
    double zero_tol = 0.0;
    classify_cmd->add_option("--in", classify_in, "signal CSV")->required();
    classify_cmd->add_option("--zero-tol", zero_tol, "treat |d_i| <= tol as zero");

    auto* solve_cmd = app.add_subcommand("solve", "solve min ||z||_TV s.t. Az = y");
    std::string a_path, y_path;
    TvSolverOptions solver;
    solve_cmd->add_option("--A", a_path, "measurement matrix CSV (row-major)")->required();
    solve_cmd->add_option("--y", y_path, "measurement vector CSV")->required();
    solve_cmd->add_option("--feas-tol", solver.feas_tol, "relative feasibility tolerance");
    solve_cmd->add_option("--gap-tol", solver.gap_tol, "certified duality gap tolerance");
    solve_cmd->add_option("--max-iter", solver.max_iter, "interior-point iteration cap");

    auto* statdim_cmd = app.add_subcommand("statdim", "Monte Carlo statistical dimension and B_u");
    PatternFlags statdim_flags;
    statdim_flags.add_to(statdim_cmd, false);
    std::string statdim_in;
    std::size_t statdim_trials = 1000;
    std::string t_grid_text = "0.05:10:0.05";
    statdim_cmd->add_option("--in", statdim_in, "signal CSV (instead of a pattern)");
    statdim_cmd->add_option("--trials", statdim_trials, "Gaussian samples");
    statdim_cmd->add_option("--t-grid", t_grid_text, "t values: list or start:stop:step");

    auto* phase_cmd = app.add_subcommand("phase", "phase-transition grid with random supports");
    PhaseGridConfig grid;
    std::string s_text, m_text;
    bool resume = false;
    phase_cmd->add_option("--n", grid.n, "signal length");
    phase_cmd->add_option("--s-values", s_text, "gradient sparsities: list or range")->required();
    phase_cmd->add_option("--m-values", m_text, "measurement counts: list or range")->required();
    phase_cmd->add_option("--trials", grid.trials_per_cell, "trials per cell");
    phase_cmd->add_option("--bound-draws", grid.bound_draws, "signal draws per s for the mean bound");
    phase_cmd->add_flag("--resume", resume, "continue an interrupted run in --out");

    auto* pphase_cmd = app.add_subcommand("pattern-phase", "phase sweep over m for a fixed pattern");
    PatternFlags pphase_flags;
    pphase_flags.add_to(pphase_cmd, false);
    std::string pm_text;
    std::size_t pphase_trials = 25;
    pphase_cmd->add_option("--m-values", pm_text, "measurement counts: list or range")->required();
    pphase_cmd->add_option("--trials", pphase_trials, "trials per m");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        common.seed = resolve_seed(args, common.seed);

        if (bound_cmd->parsed()) {
            if (bound_flags.n == 0 && bound_flags.pattern_json.empty()) {
                throw ParameterError("bound: --n is required");
            }
            const VariationPattern p = bound_flags.resolve();
            json j = bound_json(p);
            Outputs o(common.out_dir, make_manifest("bound", to_json(p), common.seed));
            if (o.enabled()) { o.json_file("bound.json", j); }
            o.finish();
            out << j.dump(2) << '\n';
            return kOk;
        }

        if (table_cmd->parsed()) {
            csv::Table rows;
            for (const auto& p : benchmark_patterns()) {
                const BoundResult r = minimize_psi(p);
                rows.push_back({static_cast<double>(p.n), static_cast<double>(p.support_size()),
                    static_cast<double>(p.s1_plus), static_cast<double>(p.s1_minus), static_cast<double>(p.s2),
                    static_cast<double>(p.s3), r.m_hat,
                    r.t_star ? *r.t_star : std::numeric_limits<double>::infinity()});
            }
            const std::vector<std::string> header{"n", "s", "s1_plus", "s1_minus", "s2", "s3", "m_hat", "t_star"};
            Outputs o(common.out_dir, make_manifest("table1", json::object(), common.seed));
            if (o.enabled()) { o.csv("table1.csv", header, rows); }
            o.finish();
            csv::write_numeric(out, header, rows);
            return kOk;
        }

        if (phi_cmd->parsed()) {
            json j = json::object();
            if (phi_cmd->count("--t")) {
                j["t"] = phi_t;
                j["phi1_tt"] = phi1(phi_t, phi_t);
                j["phi2_t"] = phi2(phi_t);
                j["phi2_2t"] = phi2(2.0 * phi_t);
            }
            if (phi_cmd->count("--a") || phi_cmd->count("--b")) {
                j["a"] = phi_a;
                j["b"] = phi_b;
                j["phi1_ab"] = phi1(phi_a, phi_b);
            }
            if (phi_cmd->count("--z")) {
                j["z"] = phi_z;
                j["phi2_z"] = phi2(phi_z);
            }
            if (j.empty()) { throw ParameterError("phi: give at least one of --t, --a/--b, --z"); }
            out << j.dump(2) << '\n';
            return kOk;
        }

        if (gen_cmd->parsed()) {
            Rng rng = make_rng(derive_seed(common.seed, {0x6e6ULL}));
            json config;
            std::optional<GradientSparseSignal> x;
            if (gen_flags.given(gen_cmd)) {
                const VariationPattern p = gen_flags.resolve();
                config = {{"pattern", to_json(p)}};
                x = generate_pattern_signal(p, rng);
            } else {
                if (!gen_cmd->count("--n") || !gen_cmd->count("--s")) {
                    throw ParameterError("gen: give --n and --s, or a pattern");
                }
                config = {{"n", gen_flags.n}, {"s", gen_s}};
                x = generate_random_support_signal(gen_flags.n, gen_s, rng);
            }
            Outputs o(common.out_dir, make_manifest("gen", config, common.seed));
            csv::Table rows;
            for (double v : x->values()) { rows.push_back({v}); }
            if (o.enabled()) {
                o.csv("signal.csv", {"x"}, rows);
                json j = classification_json(classify(*x));
                o.json_file("signal_pattern.json", j);
                out << j.dump(2) << '\n';
            } else {
                csv::write_numeric(out, {"x"}, rows);
            }
            o.finish();
            return kOk;
        }

        if (classify_cmd->parsed()) {
            const auto x = read_signal_csv(classify_in);
            json j = classification_json(classify(x, zero_tol));
            Outputs o(common.out_dir, make_manifest("classify", {{"in", classify_in}, {"zero_tol", zero_tol}}, common.seed));
            if (o.enabled()) { o.json_file("classification.json", j); }
            o.finish();
            out << j.dump(2) << '\n';
            return kOk;
        }

        if (solve_cmd->parsed()) {
            if (common.out_dir.empty()) { throw ParameterError("solve: --out is required"); }
            TvProblem problem{to_matrix(csv::read_numeric_file(a_path)), to_vector(csv::read_numeric_file(y_path))};
            const TvSolution sol = solve_tv(problem, solver);
            Outputs o(common.out_dir, make_manifest("solve",
                {{"A", a_path}, {"y", y_path}, {"feas_tol", solver.feas_tol}, {"gap_tol", solver.gap_tol},
                    {"max_iter", solver.max_iter}},
                common.seed));
            csv::Table rows;
            for (Eigen::Index i = 0; i < sol.x_hat.size(); ++i) { rows.push_back({sol.x_hat(i)}); }
            o.csv("x_hat.csv", {"x_hat"}, rows);
            const json record = status_record(sol);
            o.json_file("status.json", record);
            o.finish();
            out << record.dump(2) << '\n';
            if (sol.status != SolveStatus::Optimal) { throw SolverFailure("solver status " + to_string(sol.status)); }
            return kOk;
        }

        if (statdim_cmd->parsed()) {
            std::optional<GradientSparseSignal> x;
            json config;
            if (!statdim_in.empty()) {
                x = read_signal_csv(statdim_in);
                config["in"] = statdim_in;
            } else {
                if (statdim_flags.n == 0 && statdim_flags.pattern_json.empty()) {
                    throw ParameterError("statdim: give --in or a pattern (--n with counts, or --pattern-json)");
                }
                const VariationPattern p = statdim_flags.resolve();
                Rng rng = make_rng(derive_seed(common.seed, {0x5161ULL}));
                x = generate_pattern_signal(p, rng);
                config["pattern"] = to_json(p);
            }
            const auto grid_t = parse_real_list(t_grid_text);
            config["trials"] = statdim_trials;
            config["t_grid"] = grid_t;

            const auto cls = classify(*x);
            const SubdiffSpec spec = SubdiffSpec::from_classification(cls);
            EstimatorOptions eopts;
            eopts.threads = common.threads;
            const std::uint64_t sample_seed = derive_seed(common.seed, {0x9a55ULL});
            const McEstimate delta = estimate_statdim(spec, statdim_trials, sample_seed, eopts);
            const BuEstimate bu = estimate_Bu(spec, grid_t, statdim_trials, sample_seed, eopts);
            const BoundResult bound = minimize_psi(cls.pattern());

            json summary = {
                {"pattern", to_json(cls.pattern())},
                {"trials", statdim_trials},
                {"delta_hat", delta.mean},
                {"delta_halfwidth", delta.half_width},
                {"Bu_hat", bu.at_best.mean},
                {"Bu_halfwidth", bu.at_best.half_width},
                {"Bu_t", bu.t_best},
                {"m_hat_TV", bound.m_hat},
                {"flagged", delta.flagged + bu.at_best.flagged},
            };
            Outputs o(common.out_dir, make_manifest("statdim", config, common.seed));
            if (o.enabled()) {
                csv::Table rows;
                for (const auto& pt : bu.curve) { rows.push_back({pt.t, pt.estimate.mean, pt.estimate.half_width}); }
                o.csv("statdim_curve.csv", {"t", "mean", "halfwidth"}, rows);
                o.json_file("statdim.json", summary);
            }
            o.finish();
            out << summary.dump(2) << '\n';
            return kOk;
        }

        if (phase_cmd->parsed()) {
            if (common.out_dir.empty()) { throw ParameterError("phase: --out is required"); }
            grid.s_values = parse_index_list(s_text);
            grid.m_values = parse_index_list(m_text);
            grid.master_seed = common.seed;
            grid.threads = common.threads;
            grid.validate();

            RunManifest manifest = make_manifest("phase", to_json(grid), common.seed);
            Outputs o(common.out_dir, manifest);
            const std::string cells_path = o.path("phase.csv");
            std::vector<PhaseCell> done;
            if (resume && fs::exists(o.path("manifest.json"))) {
                std::ifstream in(o.path("manifest.json"));
                const RunManifest previous = manifest_from_json(json::parse(in));
                if (previous.hash() != o.hash()) {
                    throw ParameterError("phase --resume: configuration differs from the run in " + common.out_dir);
                }
                if (fs::exists(cells_path)) { done = read_phase_csv(cells_path); }
            }

            o.write_manifest(false);
            auto append = [&](const PhaseCell& c) {
                std::ofstream partial(cells_path, std::ios::app);
                const auto row = phase_csv_row(c);
                for (std::size_t k = 0; k < row.size(); ++k) { partial << (k ? "," : "") << csv::format_double(row[k]); }
                partial << '\n';
            };
            {
                std::ofstream partial(cells_path);
                partial << "# manifest " << o.hash() << '\n';
                csv::write_numeric(partial, phase_csv_header(), {});
            }
            for (const auto& c : done) { append(c); }
            const PhaseGridResult result = run_grid(grid, append, done);

            csv::Table rows;
            for (const auto& c : result.cells) { rows.push_back(phase_csv_row(c)); }
            o.csv("phase.csv", phase_csv_header(), rows);
            csv::Table bound_rows;
            for (const auto& b : result.bounds) {
                bound_rows.push_back({static_cast<double>(b.s), b.mean_m_hat, b.std_m_hat, b.cai_lower, b.cai_upper});
            }
            o.csv("bounds.csv", {"s", "mean_m_hat", "std_m_hat", "cai_lower", "cai_upper"}, bound_rows);
            const json crossings = crossings_json(result.cells, grid.s_values);
            o.csv("crossings.csv", {"s", "crossing_m", "crossing_std", "mean_m_hat"}, crossing_rows(crossings));
            std::size_t flagged = 0;
            for (const auto& c : result.cells) { flagged += c.flagged; }
            o.finish({{"flagged_trials", flagged}});
            out << json({{"manifest", o.hash()}, {"cells", result.cells.size()}, {"flagged_trials", flagged},
                            {"crossings", crossings}})
                       .dump(2)
                << '\n';
            return kOk;
        }

        if (pphase_cmd->parsed()) {
            if (common.out_dir.empty()) { throw ParameterError("pattern-phase: --out is required"); }
            PatternExperimentConfig cfg;
            cfg.pattern = pphase_flags.resolve();
            cfg.m_values = parse_index_list(pm_text);
            cfg.trials = pphase_trials;
            cfg.seed = common.seed;
            cfg.threads = common.threads;
            json config = {{"pattern", to_json(cfg.pattern)}, {"m_values", cfg.m_values}, {"trials", cfg.trials}};
            Outputs o(common.out_dir, make_manifest("pattern-phase", config, common.seed));
            o.write_manifest(false);
            const auto cells = pattern_experiment(cfg);
            csv::Table rows;
            for (const auto& c : cells) { rows.push_back(phase_csv_row(c)); }
            o.csv("pattern_phase.csv", phase_csv_header(), rows);
            const CrossingEstimate cross = crossing_point(cells);
            json summary = {{"manifest", o.hash()}, {"pattern", to_json(cfg.pattern)},
                {"m_hat", minimize_psi(cfg.pattern).m_hat}, {"crossing_std", cross.std_dev}};
            summary["crossing_m"] = cross.m ? json(*cross.m) : json(nullptr);
            o.finish();
            out << summary.dump(2) << '\n';
            return kOk;
        }
    } catch (const SolverFailure& e) {
        err << "solver failure: " << e.what() << '\n';
        return kSolverFailure;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << '\n';
        return kValidationError;
    } catch (const FormatError& e) {
        err << "invalid input: " << e.what() << '\n';
        return kValidationError;
    } catch (const json::exception& e) {
        err << "invalid input: " << e.what() << '\n';
        return kValidationError;
    }
    return kUsage;
}

} // namespace tvphase::cli
