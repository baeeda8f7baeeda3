#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hchc/gldc.hpp"
#include "hchc/layout.hpp"

namespace hchc {

// ---------------------------------------------------------------------------
// Data ingestion

struct CsvOptions {
    bool has_header = false;
    /// Header name, or zero-based column index, of a label column.
    std::optional<std::string> label_column;
};

/// Reads a comma-separated numeric table. Labels, when requested, may be any
/// text; they are mapped to dense ids in order of first appearance.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// One label per line; a non-numeric first line is treated as a header. For
/// multi-column files the column named "label" or "assigned_cluster" is used.
Labels load_labels(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
    TrainingConfig training;
    LayoutParams layout;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// `key = value` lines with '#' comments. Unknown keys, duplicates, bad
/// values and range violations throw ConfigError naming the key. A path
/// ending in ".json" is read as a config_echo.json document instead.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(std::string_view text);
RunConfig parse_config_json(std::string_view text);

/// JSON with every resolved parameter; parse_config_json() inverts it.
std::string config_echo_json(const RunConfig& config);

// ---------------------------------------------------------------------------
// Result files

/// 12 significant digits, the precision used in every CSV we write.
std::string format_number(double v);

void write_probabilities_csv(const std::filesystem::path& path, const ProbabilityMatrix& probabilities);

/// Reads probabilities.csv-style files (header of p0..p{c-1} optional). Rows
/// within 1e-6 of summing to 1 are renormalized; anything else is a
/// ParseError naming the row.
ProbabilityMatrix load_probabilities(const std::filesystem::path& path);

/// Same acceptance rule applied to an in-memory table; `source` labels errors.
ProbabilityMatrix normalize_probability_rows(DenseMatrix table, const std::string& source);

/// Rounds every entry to the CSV precision and renormalizes exactly as
/// load_probabilities() would, so in-memory and on-disk pipelines agree.
ProbabilityMatrix as_written(const ProbabilityMatrix& probabilities);

void write_labels_csv(const std::filesystem::path& path, const Labels& labels);

struct Metrics {
    double acc = 0.0;
    double nmi = 0.0;
};

struct RunArtifacts {
    ProbabilityMatrix probabilities;
    CircularLayout layout;
    Labels assigned;  // argmax labels, one per sample
    std::optional<Metrics> metrics;
    RunConfig config;

    /// Throws InputError unless n and c agree across fields.
    void validate() const;
};

void write_layout_csv(const std::filesystem::path& path, const CircularLayout& layout, const Labels& assigned);
void write_cycle_json(const std::filesystem::path& path, const CircularLayout& layout);
void write_metrics_json(const std::filesystem::path& path, const Metrics& metrics);
void write_config_echo(const std::filesystem::path& path, const RunConfig& config);

/// probabilities.csv, layout.csv, cycle.json, config_echo.json, and
/// metrics.json when metrics are present. Creates `out_dir` if needed.
void write_outputs(const RunArtifacts& artifacts, const std::filesystem::path& out_dir);

/// Rebuilds the drawable parts of a layout (anchors, samples, outliers) and
/// the assigned labels from layout.csv and cycle.json.
struct LoadedLayout {
    CircularLayout layout;
    Labels assigned;
};
LoadedLayout load_layout(const std::filesystem::path& layout_csv, const std::filesystem::path& cycle_json);

/// Reads a whole file; IoError with the path on failure.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace hchc
