#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hchc/io.hpp"

namespace hchc::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUnexpected = 1,
    kUsage = 2,
    kDivergence = 3,
    kDegenerate = 4,
};

struct DataOptions {
    std::filesystem::path data;
    CsvOptions csv;
    std::optional<std::filesystem::path> config;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out_dir;
    bool verbose = false;
};

/// Config file (or defaults) with the seed override applied.
RunConfig resolve_config(const std::optional<std::filesystem::path>& path, std::optional<std::uint64_t> seed);

/// Full pipeline: pretrain, train, infer, lay out, write files, render.
RunArtifacts cmd_run(const DataOptions& options, std::ostream& log);

/// Layout only, from a probabilities CSV: cycle.json, layout.csv, layout.svg.
CircularLayout cmd_layout(const std::filesystem::path& probabilities_csv,
                          const std::optional<std::filesystem::path>& config, const std::filesystem::path& out_dir,
                          std::ostream& log);

/// ACC and NMI of predicted against true labels; writes metrics.json when
/// `out_path` is given.
Metrics cmd_evaluate(const std::filesystem::path& pred_csv, const std::filesystem::path& truth_csv,
                     const std::optional<std::filesystem::path>& out_path);

/// Parses argv-style arguments (args[0] is the program name), dispatches one
/// subcommand, and maps errors onto ExitCode values.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hchc::cli
