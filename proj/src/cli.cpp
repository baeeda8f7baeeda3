#include "hchc/cli.hpp"

#include <ostream>

#include "CLI11.hpp"
#include "hchc/errors.hpp"
#include "hchc/metrics.hpp"
#include "hchc/model_io.hpp"
#include "hchc/svg.hpp"

namespace hchc::cli {

namespace fs = std::filesystem;

namespace {

// Pipeline stage currently executing, used to tag error messages.
thread_local std::string g_stage = "cli";

void enter(const char* stage) { g_stage = stage; }

EpochCallback progress(bool verbose, std::ostream& log) {
    if (!verbose) return {};
    return [&log](const EpochRecord& r) {
        log << r.phase << " epoch " << r.epoch << ": loss=" << format_number(r.loss);
        if (r.phase == "train") {
            log << " (Lr=" << format_number(r.reconstruction) << " Lw=" << format_number(r.graph)
                << " La=" << format_number(r.augmentation) << " beta1=" << format_number(r.beta1) << ")";
        }
        log << '\n';
    };
}

void print_warnings(const CircularLayout& layout, std::ostream& log) {
    for (const auto& w : layout.warnings) log << "warning: " << w << '\n';
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir.string() + ": cannot create directory: " + ec.message());
}

Dataset load_data(const DataOptions& options) {
    enter("load");
    if (!fs::exists(options.data)) throw IoError(options.data.string() + ": no such file");
    Dataset data = load_csv(options.data, options.csv);
    data.validate();
    return data;
}

/// Replaces clusters = 0 by the label-derived count so the echo is exact.
RunConfig resolved_for(RunConfig config, const Dataset& data) {
    config.training.clusters = config.training.resolved_clusters(data);
    config.training.validate_for(data);
    return config;
}

std::optional<Metrics> metrics_for(const Dataset& data, const Labels& assigned) {
    if (!data.labels) return std::nullopt;
    return Metrics{acc(assigned, *data.labels), nmi(assigned, *data.labels)};
}

void add_data_options(CLI::App& cmd, DataOptions& o) {
    cmd.add_option("data", o.data, "Input CSV (rows = samples)")->required();
    cmd.add_option("-c,--config", o.config, "Config file (key = value, or config_echo.json)");
    cmd.add_option("-o,--out", o.out_dir, "Output directory")->required();
    cmd.add_option("--seed", o.seed, "Override the config seed");
    cmd.add_flag("--header", o.csv.has_header, "First CSV row is a header");
    cmd.add_option("--label-column", o.csv.label_column, "Label column (header name or zero-based index)");
    cmd.add_flag("-v,--verbose", o.verbose, "Print per-epoch losses");
}

}  // namespace

RunConfig resolve_config(const std::optional<fs::path>& path, std::optional<std::uint64_t> seed) {
    enter("config");
    RunConfig config;
    if (path) {
        if (!fs::exists(*path)) throw IoError(path->string() + ": no such file");
        config = parse_config(*path);
    }
    if (seed) config.training.seed = *seed;
    return config;
}

RunArtifacts cmd_run(const DataOptions& options, std::ostream& log) {
    RunConfig config = resolve_config(options.config, options.seed);
    const Dataset data = load_data(options);
    enter("config");
    config = resolved_for(std::move(config), data);

    enter("train");
    TrainResult trained = train(data, config.training, progress(options.verbose, log));

    enter("layout");
    RunArtifacts artifacts;
    artifacts.config = config;
    artifacts.probabilities = as_written(trained.probabilities);
    artifacts.layout = map_to_circle(artifacts.probabilities, config.layout);
    artifacts.assigned = assign_labels(artifacts.probabilities);
    print_warnings(artifacts.layout, log);

    enter("evaluate");
    artifacts.metrics = metrics_for(data, artifacts.assigned);

    enter("write");
    write_outputs(artifacts, options.out_dir);
    enter("render");
    render_svg(artifacts.layout, artifacts.assigned, options.out_dir / "layout.svg");
    return artifacts;
}

CircularLayout cmd_layout(const fs::path& probabilities_csv, const std::optional<fs::path>& config_path,
                          const fs::path& out_dir, std::ostream& log) {
    const RunConfig config = resolve_config(config_path, std::nullopt);
    enter("load");
    if (!fs::exists(probabilities_csv)) throw IoError(probabilities_csv.string() + ": no such file");
    const ProbabilityMatrix p = load_probabilities(probabilities_csv);
    enter("layout");
    CircularLayout layout = map_to_circle(p, config.layout);
    const Labels assigned = assign_labels(p);
    print_warnings(layout, log);
    enter("write");
    ensure_dir(out_dir);
    write_cycle_json(out_dir / "cycle.json", layout);
    write_layout_csv(out_dir / "layout.csv", layout, assigned);
    enter("render");
    render_svg(layout, assigned, out_dir / "layout.svg");
    return layout;
}

Metrics cmd_evaluate(const fs::path& pred_csv, const fs::path& truth_csv, const std::optional<fs::path>& out_path) {
    enter("load");
    for (const auto& p : {pred_csv, truth_csv}) {
        if (!fs::exists(p)) throw IoError(p.string() + ": no such file");
    }
    const Labels pred = load_labels(pred_csv);
    const Labels truth = load_labels(truth_csv);
    enter("evaluate");
    const Metrics m{acc(pred, truth), nmi(pred, truth)};
    if (out_path) {
        enter("write");
        if (out_path->has_parent_path()) ensure_dir(out_path->parent_path());
        write_metrics_json(*out_path, m);
    }
    return m;
}

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cluster samples with GLDC and lay them out on an optimal Hamiltonian cycle", "hchc"};
    app.require_subcommand(1);

    DataOptions run_opts;
    auto* run = app.add_subcommand("run", "Full pipeline: train, lay out, write results and SVG");
    add_data_options(*run, run_opts);

    DataOptions pre_opts;
    auto* pre = app.add_subcommand("pretrain", "Autoencoder pretraining only; writes model.bin");
    add_data_options(*pre, pre_opts);

    DataOptions train_opts;
    std::optional<fs::path> model_path;
    auto* trn = app.add_subcommand("train", "Clustering; writes model.bin, probabilities.csv, labels.csv");
    add_data_options(*trn, train_opts);
    trn->add_option("--model", model_path, "Pretrained model.bin (pretrains from scratch when omitted)");

    fs::path layout_input, layout_out;
    std::optional<fs::path> layout_config;
    auto* lay = app.add_subcommand("layout", "Hamiltonian-cycle layout of a probabilities CSV");
    lay->add_option("probabilities", layout_input, "probabilities.csv")->required();
    lay->add_option("-c,--config", layout_config, "Config file");
    lay->add_option("-o,--out", layout_out, "Output directory")->required();

    fs::path render_dir, render_out;
    int render_width = 900;
    auto* ren = app.add_subcommand("render", "SVG from layout.csv and cycle.json");
    ren->add_option("layout_dir", render_dir, "Directory holding layout.csv and cycle.json")->required();
    ren->add_option("-o,--out", render_out, "Output SVG path")->required();
    ren->add_option("--width", render_width, "Canvas width in pixels")->check(CLI::PositiveNumber);

    fs::path eval_pred, eval_truth;
    std::optional<fs::path> eval_out;
    auto* eva = app.add_subcommand("evaluate", "ACC and NMI of predicted labels");
    eva->add_option("pred", eval_pred, "Predicted labels CSV")->required();
    eva->add_option("truth", eval_truth, "True labels CSV")->required();
    eva->add_option("-o,--out", eval_out, "metrics.json path");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    g_stage = "cli";
    try {
        if (*run) {
            const RunArtifacts a = cmd_run(run_opts, err);
            out << "wrote " << run_opts.out_dir.string() << " (solver=" << to_string(a.layout.solver) << ")\n";
            if (a.metrics) out << "acc=" << format_number(a.metrics->acc) << " nmi=" << format_number(a.metrics->nmi) << '\n';
        } else if (*pre) {
            RunConfig config = resolve_config(pre_opts.config, pre_opts.seed);
            const Dataset data = load_data(pre_opts);
            enter("config");
            config = resolved_for(std::move(config), data);
            enter("pretrain");
            const GldcModel model = pretrain(data, config.training, progress(pre_opts.verbose, err));
            enter("write");
            ensure_dir(pre_opts.out_dir);
            save_model(pre_opts.out_dir / "model.bin", model);
            write_config_echo(pre_opts.out_dir / "config_echo.json", config);
            out << "wrote " << (pre_opts.out_dir / "model.bin").string() << '\n';
        } else if (*trn) {
            RunConfig config = resolve_config(train_opts.config, train_opts.seed);
            const Dataset data = load_data(train_opts);
            enter("config");
            config = resolved_for(std::move(config), data);
            enter("train");
            TrainResult trained;
            if (model_path) {
                enter("load");
                GldcModel model = load_model(*model_path);
                enter("train");
                trained = fine_tune(data, config.training, std::move(model), progress(train_opts.verbose, err));
            } else {
                trained = train(data, config.training, progress(train_opts.verbose, err));
            }
            const ProbabilityMatrix p = as_written(trained.probabilities);
            const Labels assigned = assign_labels(p);
            enter("write");
            ensure_dir(train_opts.out_dir);
            save_model(train_opts.out_dir / "model.bin", trained.model);
            write_probabilities_csv(train_opts.out_dir / "probabilities.csv", p);
            write_labels_csv(train_opts.out_dir / "labels.csv", assigned);
            write_config_echo(train_opts.out_dir / "config_echo.json", config);
            if (const auto m = metrics_for(data, assigned)) {
                write_metrics_json(train_opts.out_dir / "metrics.json", *m);
                out << "acc=" << format_number(m->acc) << " nmi=" << format_number(m->nmi) << '\n';
            }
            out << "wrote " << train_opts.out_dir.string() << '\n';
        } else if (*lay) {
            const CircularLayout layout = cmd_layout(layout_input, layout_config, layout_out, err);
            out << "wrote " << layout_out.string() << " (solver=" << to_string(layout.solver) << ")\n";
        } else if (*ren) {
            enter("load");
            const LoadedLayout loaded = load_layout(render_dir / "layout.csv", render_dir / "cycle.json");
            enter("render");
            render_svg(loaded.layout, loaded.assigned, render_out, SvgStyle{.width_px = render_width});
            out << "wrote " << render_out.string() << '\n';
        } else if (*eva) {
            const Metrics m = cmd_evaluate(eval_pred, eval_truth, eval_out);
            out << "{\"acc\": " << format_number(m.acc) << ", \"nmi\": " << format_number(m.nmi) << "}\n";
        }
    } catch (const DivergenceError& e) {
        err << "hchc " << command << ": [" << g_stage << "] training diverged: " << e.what() << '\n';
        return kDivergence;
    } catch (const DegenerateError& e) {
        err << "hchc " << command << ": [" << g_stage << "] degenerate layout input: " << e.what() << '\n';
        return kDegenerate;
    } catch (const InputError& e) {
        err << "hchc " << command << ": [" << g_stage << "] " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "hchc " << command << ": [" << g_stage << "] unexpected error: " << e.what() << '\n';
        return kUnexpected;
    }
    return kSuccess;
}

}  // namespace hchc::cli
