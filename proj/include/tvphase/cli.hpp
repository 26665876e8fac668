#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace tvphase::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
    kOk = 0,
    kValidationError = 2,
    kSolverFailure = 3,
    kUsage = 64,
};

/* Runs one subcommand: bound, table1, phi, gen, classify, solve, statdim,
 * phase, pattern-phase. `args` excludes the program name. */
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/* "5,10,20" or an inclusive range "start:stop:step"; throws ParameterError. */
std::vector<std::size_t> parse_index_list(const std::string& text);
std::vector<double> parse_real_list(const std::string& text);

/* Run manifest: command, resolved configuration, master seed, version and
 * timestamps. The hash covers everything but the timestamps, so identical
 * runs share it. */
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t master_seed = 0;
    std::string version = kVersion;
    std::string started_at;
    std::string finished_at;

    std::string hash() const;
    nlohmann::json to_json() const;
};

RunManifest manifest_from_json(const nlohmann::json& j);

} // namespace tvphase::cli
