#include "hchc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "hchc/errors.hpp"
#include "json.hpp"

namespace hchc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string unquote(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return std::string(s);
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

template <class Int>
std::optional<Int> parse_integer(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    Int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

struct CsvRow {
    std::size_t line = 0;  // 1-based line number in the file
    std::vector<std::string> cells;
};

std::vector<CsvRow> read_csv_rows(const fs::path& path) {
    const std::string text = read_text_file(path);
    std::vector<CsvRow> rows;
    std::size_t line_no = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        CsvRow row{line_no, {}};
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            row.cells.push_back(unquote(std::string_view(line).substr(start, comma - start)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string cell_location(const CsvRow& row, std::size_t col) {
    return "row " + std::to_string(row.line) + ", column " + std::to_string(col + 1);
}

void require_rectangular(const fs::path& path, const std::vector<CsvRow>& rows, std::size_t width) {
    for (const auto& row : rows) {
        if (row.cells.size() != width) {
            throw ParseError(path.string(), "row " + std::to_string(row.line),
                             "expected " + std::to_string(width) + " columns, found " +
                                 std::to_string(row.cells.size()));
        }
    }
}

double number_at(const fs::path& path, const CsvRow& row, std::size_t col) {
    const auto v = parse_double(row.cells[col]);
    if (!v) throw ParseError(path.string(), cell_location(row, col), "not a number: '" + row.cells[col] + "'");
    return *v;
}

bool row_is_numeric(const CsvRow& row) {
    return std::all_of(row.cells.begin(), row.cells.end(), [](const std::string& c) { return parse_double(c).has_value(); });
}

std::ofstream open_for_writing(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    return out;
}

void finish_writing(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
    auto out = open_for_writing(path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    finish_writing(out, path);
}

// ---------------------------------------------------------------------------
// Data ingestion

Dataset load_csv(const fs::path& path, const CsvOptions& options) {
    auto rows = read_csv_rows(path);
    std::vector<std::string> header;
    if (options.has_header) {
        if (rows.empty()) throw ParseError(path.string(), "row 1", "missing header");
        header = rows.front().cells;
        rows.erase(rows.begin());
    }
    if (rows.empty()) throw ParseError(path.string(), "end of file", "no data rows");
    const std::size_t width = options.has_header ? header.size() : rows.front().cells.size();
    require_rectangular(path, rows, width);

    std::optional<std::size_t> label_col;
    if (options.label_column) {
        const std::string& wanted = *options.label_column;
        const auto named = std::find(header.begin(), header.end(), wanted);
        if (named != header.end()) {
            label_col = static_cast<std::size_t>(named - header.begin());
        } else if (const auto idx = parse_integer<std::size_t>(wanted); idx && *idx < width) {
            label_col = *idx;
        } else {
            throw ParseError(path.string(), "header", "label column '" + wanted + "' not found");
        }
    }
    const std::size_t dims = width - (label_col ? 1 : 0);
    if (dims == 0) throw ParseError(path.string(), "header", "no feature columns");

    Dataset data;
    data.features = DenseMatrix(rows.size(), dims);
    Labels labels;
    std::map<std::string, int> ids;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::size_t out_col = 0;
        for (std::size_t c = 0; c < width; ++c) {
            if (label_col && c == *label_col) {
                const auto [it, inserted] = ids.try_emplace(rows[r].cells[c], static_cast<int>(ids.size()));
                labels.push_back(it->second);
                continue;
            }
            data.features(r, out_col++) = number_at(path, rows[r], c);
        }
    }
    if (label_col) data.labels = std::move(labels);
    return data;
}

Labels load_labels(const fs::path& path) {
    auto rows = read_csv_rows(path);
    if (rows.empty()) throw ParseError(path.string(), "end of file", "no labels");
    std::size_t col = 0;
    if (!row_is_numeric(rows.front())) {
        const auto& header = rows.front().cells;
        if (header.size() > 1) {
            auto it = std::find(header.begin(), header.end(), "label");
            if (it == header.end()) it = std::find(header.begin(), header.end(), "assigned_cluster");
            if (it == header.end()) throw ParseError(path.string(), "header", "no 'label' or 'assigned_cluster' column");
            col = static_cast<std::size_t>(it - header.begin());
        }
        rows.erase(rows.begin());
    } else if (rows.front().cells.size() != 1) {
        throw ParseError(path.string(), "row 1", "multi-column label files need a header");
    }
    require_rectangular(path, rows, rows.empty() ? 0 : rows.front().cells.size());
    Labels labels;
    labels.reserve(rows.size());
    for (const auto& row : rows) {
        const auto v = parse_integer<int>(row.cells[col]);
        if (!v || *v < 0) {
            throw ParseError(path.string(), cell_location(row, col), "not a label id: '" + row.cells[col] + "'");
        }
        labels.push_back(*v);
    }
    return labels;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::size_t config_size(const std::string& key, std::string_view value) {
    const auto v = parse_integer<std::size_t>(value);
    if (!v) throw ConfigError(key, "expected a non-negative integer, got '" + std::string(value) + "'");
    return *v;
}

double config_real(const std::string& key, std::string_view value) {
    const auto v = parse_double(value);
    if (!v) throw ConfigError(key, "expected a number, got '" + std::string(value) + "'");
    return *v;
}

std::vector<std::size_t> config_list(const std::string& key, std::string_view value) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= value.size()) {
        const std::size_t comma = value.find(',', start);
        out.push_back(config_size(key, value.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

DiscountGranularity config_granularity(const std::string& key, std::string_view value) {
    if (value == "epoch") return DiscountGranularity::Epoch;
    if (value == "minibatch") return DiscountGranularity::Minibatch;
    throw ConfigError(key, "expected 'epoch' or 'minibatch', got '" + std::string(value) + "'");
}

void apply_setting(RunConfig& cfg, const std::string& key, std::string_view value) {
    auto& t = cfg.training;
    auto& l = cfg.layout;
    if (key == "clusters") t.clusters = config_size(key, value);
    else if (key == "batch_size") t.batch_size = config_size(key, value);
    else if (key == "learning_rate") t.learning_rate = config_real(key, value);
    else if (key == "beta1") t.beta1 = config_real(key, value);
    else if (key == "beta2") t.beta2 = config_real(key, value);
    else if (key == "discount_gamma") t.discount_gamma = config_real(key, value);
    else if (key == "discount_granularity") t.discount_granularity = config_granularity(key, value);
    else if (key == "sigma2") t.sigma2 = config_real(key, value);
    else if (key == "xi") t.xi = config_real(key, value);
    else if (key == "k_neighbors") t.k_neighbors = config_size(key, value);
    else if (key == "pretrain_epochs") t.pretrain_epochs = config_size(key, value);
    else if (key == "train_epochs") t.train_epochs = config_size(key, value);
    else if (key == "seed") {
        const auto v = parse_integer<std::uint64_t>(value);
        if (!v) throw ConfigError(key, "expected a non-negative integer, got '" + std::string(value) + "'");
        t.seed = *v;
    } else if (key == "hidden_dims") t.hidden_dims = config_list(key, value);
    else if (key == "embedding_dim") t.embedding_dim = config_size(key, value);
    else if (key == "gamma_exponent") l.gamma_exponent = config_real(key, value);
    else if (key == "radius") l.radius = config_real(key, value);
    else if (key == "exact_cycle_max") l.exact_cycle_max = config_size(key, value);
    else if (key == "outlier_threshold") l.outlier_threshold = config_real(key, value);
    else throw ConfigError(key, "unknown key");
}

void validate_config(const RunConfig& cfg) {
    cfg.training.validate();
    cfg.layout.validate();
}

}  // namespace

RunConfig parse_config_text(std::string_view text) {
    RunConfig cfg;
    std::vector<std::string> seen;
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(std::string(trim(line)), "line " + std::to_string(line_no) + " is not 'key = value'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) throw ConfigError(key, "set more than once");
        seen.push_back(key);
        apply_setting(cfg, key, value);
    }
    validate_config(cfg);
    return cfg;
}

std::string config_echo_json(const RunConfig& config) {
    const auto& t = config.training;
    const auto& l = config.layout;
    json doc;
    doc["training"] = {
        {"clusters", t.clusters},
        {"batch_size", t.batch_size},
        {"learning_rate", t.learning_rate},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"discount_gamma", t.discount_gamma},
        {"discount_granularity", std::string(to_string(t.discount_granularity))},
        {"sigma2", t.sigma2},
        {"xi", t.xi},
        {"k_neighbors", t.k_neighbors},
        {"pretrain_epochs", t.pretrain_epochs},
        {"train_epochs", t.train_epochs},
        {"seed", t.seed},
        {"hidden_dims", t.hidden_dims},
        {"embedding_dim", t.embedding_dim},
    };
    doc["layout"] = {
        {"gamma_exponent", l.gamma_exponent},
        {"radius", l.radius},
        {"exact_cycle_max", l.exact_cycle_max},
        {"outlier_threshold", l.outlier_threshold},
    };
    return doc.dump(2) + "\n";
}

RunConfig parse_config_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("<json>", e.what());
    }
    RunConfig cfg;
    for (const char* section : {"training", "layout"}) {
        if (!doc.contains(section)) continue;
        if (!doc[section].is_object()) throw ConfigError(section, "expected an object");
        for (const auto& [key, value] : doc[section].items()) {
            std::string text_value;
            if (value.is_string()) {
                text_value = value.get<std::string>();
            } else if (value.is_array()) {
                for (std::size_t i = 0; i < value.size(); ++i) {
                    if (i) text_value += ",";
                    text_value += value[i].dump();
                }
            } else if (value.is_number_float()) {
                // Exact round trip: print with enough digits for the parser.
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", value.get<double>());
                text_value = buf;
            } else {
                text_value = value.dump();
            }
            apply_setting(cfg, key, text_value);
        }
    }
    for (const auto& [key, value] : doc.items()) {
        if (key != "training" && key != "layout") throw ConfigError(key, "unknown section");
    }
    validate_config(cfg);
    return cfg;
}

RunConfig parse_config(const fs::path& path) {
    const std::string text = read_text_file(path);
    if (path.extension() == ".json") return parse_config_json(text);
    return parse_config_text(text);
}

// ---------------------------------------------------------------------------
// Result files

std::string format_number(double v) {
    if (v == 0.0) v = 0.0;  // no "-0"
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_probabilities_csv(const fs::path& path, const ProbabilityMatrix& probabilities) {
    auto out = open_for_writing(path);
    for (std::size_t j = 0; j < probabilities.clusters(); ++j) out << (j ? ",p" : "p") << j;
    out << '\n';
    for (std::size_t i = 0; i < probabilities.samples(); ++i) {
        auto row = probabilities.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_number(row[j]);
        out << '\n';
    }
    finish_writing(out, path);
}

ProbabilityMatrix normalize_probability_rows(DenseMatrix table, const std::string& source) {
    if (table.cols() < 2) throw ParseError(source, "header", "need at least 2 probability columns");
    for (std::size_t i = 0; i < table.rows(); ++i) {
        auto row = table.row(i);
        double sum = 0.0;
        for (double v : row) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ParseError(source, "row index " + std::to_string(i), "probability outside [0, 1]");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw ParseError(source, "row index " + std::to_string(i), "probabilities sum to " + format_number(sum));
        }
        for (double& v : row) v /= sum;
    }
    return ProbabilityMatrix(std::move(table));
}

ProbabilityMatrix load_probabilities(const fs::path& path) {
    auto rows = read_csv_rows(path);
    if (!rows.empty() && !row_is_numeric(rows.front())) rows.erase(rows.begin());
    if (rows.empty()) throw ParseError(path.string(), "end of file", "no probability rows");
    const std::size_t c = rows.front().cells.size();
    require_rectangular(path, rows, c);
    DenseMatrix table(rows.size(), c);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < c; ++j) table(r, j) = number_at(path, rows[r], j);
    return normalize_probability_rows(std::move(table), path.string());
}

ProbabilityMatrix as_written(const ProbabilityMatrix& probabilities) {
    // Renormalising can move the 12th digit, so repeat until the text is stable.
    ProbabilityMatrix current = probabilities;
    for (int round = 0; round < 16; ++round) {
        DenseMatrix table = current.values();
        for (double& v : table.values()) v = *parse_double(format_number(v));
        ProbabilityMatrix next = normalize_probability_rows(std::move(table), "<probabilities>");
        const auto& before = current.values().values();
        const auto& after = next.values().values();
        bool same_text = true;
        for (std::size_t i = 0; i < after.size() && same_text; ++i)
            same_text = format_number(after[i]) == format_number(before[i]);
        current = std::move(next);
        if (same_text) break;
    }
    return current;
}

void write_labels_csv(const fs::path& path, const Labels& labels) {
    auto out = open_for_writing(path);
    out << "label\n";
    for (int l : labels) out << l << '\n';
    finish_writing(out, path);
}

void RunArtifacts::validate() const {
    const std::size_t n = probabilities.samples();
    const std::size_t c = probabilities.clusters();
    if (layout.sample_coords.size() != n || layout.outlier_flags.size() != n || assigned.size() != n) {
        throw InputError("run artifacts: sample counts disagree");
    }
    if (layout.cycle.order.size() != c || layout.anchor_coords.size() != c || layout.anchor_angles.size() != c) {
        throw InputError("run artifacts: cluster counts disagree");
    }
}

void write_layout_csv(const fs::path& path, const CircularLayout& layout, const Labels& assigned) {
    if (assigned.size() != layout.sample_coords.size()) throw InputError("write_layout_csv: label count mismatch");
    auto out = open_for_writing(path);
    out << "id,x,y,assigned_cluster,outlier\n";
    for (std::size_t i = 0; i < layout.sample_coords.size(); ++i) {
        const auto& p = layout.sample_coords[i];
        out << i << ',' << format_number(p.x) << ',' << format_number(p.y) << ',' << assigned[i] << ','
            << (layout.outlier_flags[i] ? 1 : 0) << '\n';
    }
    finish_writing(out, path);
}

void write_cycle_json(const fs::path& path, const CircularLayout& layout) {
    json anchors = json::array();
    for (const auto& a : layout.anchor_coords) anchors.push_back({a.x, a.y});
    json doc = {
        {"order", layout.cycle.order},
        {"angles", layout.anchor_angles},
        {"anchors", anchors},
        {"radius", layout.radius},
        {"total_cost", layout.cycle.total_cost},
        {"S_sam", layout.similarity_score},
        {"solver", std::string(to_string(layout.solver))},
    };
    write_text_file(path, doc.dump(2) + "\n");
}

void write_metrics_json(const fs::path& path, const Metrics& metrics) {
    const json doc = {{"acc", metrics.acc}, {"nmi", metrics.nmi}};
    write_text_file(path, doc.dump(2) + "\n");
}

void write_config_echo(const fs::path& path, const RunConfig& config) {
    write_text_file(path, config_echo_json(config));
}

void write_outputs(const RunArtifacts& artifacts, const fs::path& out_dir) {
    artifacts.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError(out_dir.string() + ": cannot create directory: " + ec.message());
    write_probabilities_csv(out_dir / "probabilities.csv", artifacts.probabilities);
    write_layout_csv(out_dir / "layout.csv", artifacts.layout, artifacts.assigned);
    write_cycle_json(out_dir / "cycle.json", artifacts.layout);
    if (artifacts.metrics) write_metrics_json(out_dir / "metrics.json", *artifacts.metrics);
    write_config_echo(out_dir / "config_echo.json", artifacts.config);
}

LoadedLayout load_layout(const fs::path& layout_csv, const fs::path& cycle_json) {
    LoadedLayout loaded;
    auto& layout = loaded.layout;

    json doc;
    try {
        doc = json::parse(read_text_file(cycle_json));
        layout.cycle.order = doc.at("order").get<std::vector<std::size_t>>();
        layout.anchor_angles = doc.at("angles").get<std::vector<double>>();
        for (const auto& a : doc.at("anchors")) layout.anchor_coords.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
        layout.radius = doc.at("radius").get<double>();
        layout.cycle.total_cost = doc.at("total_cost").get<double>();
        layout.similarity_score = doc.at("S_sam").get<double>();
        const auto solver = doc.at("solver").get<std::string>();
        if (solver != "exact" && solver != "greedy") throw ParseError(cycle_json.string(), "solver", "unknown solver");
        layout.solver = solver == "exact" ? CycleSolver::Exact : CycleSolver::Greedy;
    } catch (const json::exception& e) {
        throw ParseError(cycle_json.string(), "document", e.what());
    }
    const std::size_t c = layout.cycle.order.size();
    if (layout.anchor_coords.size() != c || layout.anchor_angles.size() != c) {
        throw ParseError(cycle_json.string(), "document", "order, angles and anchors differ in length");
    }

    auto rows = read_csv_rows(layout_csv);
    if (rows.empty() || rows.front().cells != std::vector<std::string>{"id", "x", "y", "assigned_cluster", "outlier"}) {
        throw ParseError(layout_csv.string(), "row 1", "expected header id,x,y,assigned_cluster,outlier");
    }
    rows.erase(rows.begin());
    require_rectangular(layout_csv, rows, 5);
    for (const auto& row : rows) {
        layout.sample_coords.push_back({number_at(layout_csv, row, 1), number_at(layout_csv, row, 2)});
        const auto label = parse_integer<int>(row.cells[3]);
        if (!label || *label < 0) throw ParseError(layout_csv.string(), cell_location(row, 3), "not a cluster id");
        loaded.assigned.push_back(*label);
        if (row.cells[4] != "0" && row.cells[4] != "1") {
            throw ParseError(layout_csv.string(), cell_location(row, 4), "outlier flag must be 0 or 1");
        }
        layout.outlier_flags.push_back(row.cells[4] == "1");
    }
    return loaded;
}

}  // namespace hchc
