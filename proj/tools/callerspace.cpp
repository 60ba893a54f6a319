// callerspace command-line entry point.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "callerspace/classifier.hpp"
#include "callerspace/error.hpp"
#include "callerspace/evaluation.hpp"
#include "callerspace/experiment.hpp"
#include "callerspace/formats.hpp"
#include "callerspace/parallel.hpp"
#include "callerspace/report.hpp"
#include "callerspace/store.hpp"
#include "callerspace/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace callerspace;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

int exit_code_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::Config:
    case ErrorCode::InvalidArgument: return kUsage;
    case ErrorCode::Internal: return kInternal;
    default: return kData;
    }
}

/// Writes to a file, or stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_text_file(path, text);
    }
}

RunManifest command_manifest(const std::string& command, json flags, const std::vector<fs::path>& inputs)
{
    RunManifest m;
    m.command = command;
    m.config = std::move(flags);
    for (const auto& p : inputs) m.inputs[p.filename().string()] = sha256_file(p);
    return m;
}

std::string with_manifest(json artifact, const RunManifest& manifest)
{
    artifact["manifest_sha256"] = manifest.hash();
    return artifact.dump(2) + "\n";
}

std::string csv_banner(const RunManifest& manifest)
{
    return "# manifest_sha256=" + manifest.hash() + "\n";
}

std::string iso_now()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<double> parse_ratio_list(const std::string& text)
{
    std::vector<double> values;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "bad ratio '" + item + "'");
        }
    }
    if (values.size() != 3) {
        throw Error(ErrorCode::InvalidArgument, "--ratios needs three comma-separated values");
    }
    return values;
}

json length_json(const LengthStats& s)
{
    return {{"count", s.count}, {"mean_ms", s.mean_ms}, {"std_ms", s.std_ms},
            {"median_ms", s.median_ms}, {"min_ms", s.min_ms}, {"max_ms", s.max_ms}};
}

std::string summary_text(const EmbeddingStore& store, OutputFormat format)
{
    const auto s = store_summary(store);
    if (format == OutputFormat::Json) {
        json per_caller = json::array();
        for (const auto& [caller, count] : s.per_caller) {
            per_caller.push_back({{"caller_id", caller}, {"segments", count},
                                  {"lengths", length_json(s.per_caller_lengths.at(caller))}});
        }
        json per_calltype = json::array();
        for (const auto& [type, count] : s.per_calltype) {
            per_calltype.push_back({{"calltype_id", type}, {"segments", count}});
        }
        json cross = json::array();
        for (const auto& [key, count] : s.per_caller_calltype) {
            cross.push_back({{"caller_id", key.first}, {"calltype_id", key.second}, {"segments", count}});
        }
        json hist = json::array();
        for (const auto& b : s.length_histogram) {
            hist.push_back({{"log10_lower", b.lower}, {"log10_upper", b.upper}, {"count", b.count}});
        }
        const json j = {{"model_name", store.meta.model_name},
                        {"embed_dim", store.meta.embed_dim},
                        {"pretext_objective", std::string(to_string(store.meta.pretext_objective))},
                        {"param_count_millions", store.meta.param_count_millions},
                        {"records", s.total_records},
                        {"frames", s.total_frames},
                        {"lengths", length_json(s.lengths)},
                        {"per_caller", per_caller},
                        {"per_calltype", per_calltype},
                        {"per_caller_calltype", cross},
                        {"length_histogram", hist}};
        return j.dump(2) + "\n";
    }
    std::ostringstream out;
    out << "caller_id,segments,mean_ms,std_ms,median_ms,min_ms,max_ms\n";
    auto row = [&](const std::string& name, std::size_t count, const LengthStats& l) {
        out << name << ',' << count << ',' << format_number(l.mean_ms) << ',' << format_number(l.std_ms) << ','
            << format_number(l.median_ms) << ',' << format_number(l.min_ms) << ',' << format_number(l.max_ms) << '\n';
    };
    for (const auto& [caller, count] : s.per_caller) row(std::to_string(caller), count, s.per_caller_lengths.at(caller));
    row("all", s.total_records, s.lengths);
    return out.str();
}

json model_summary(const TrainedModel& model)
{
    json j = {{"algorithm", std::string(to_string(model.algorithm()))},
              {"config", to_json(model.config)},
              {"classes", model.classes},
              {"num_features", model.num_features},
              {"score_convention", std::string(to_string(model.convention))},
              {"standardized", !model.standardizer.mean.empty()}};
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, RandomForestModel>) {
                std::size_t nodes = 0;
                for (const auto& t : p.trees) nodes += t.nodes.size();
                j["trees"] = p.trees.size();
                j["nodes"] = nodes;
                j["oob_accuracy"] = p.oob_accuracy;
            } else if constexpr (std::is_same_v<T, AdaBoostModel>) {
                j["stumps"] = p.stumps.size();
                j["final_training_error"] = p.training_error.empty() ? 0.0 : p.training_error.back();
            } else if constexpr (std::is_same_v<T, KernelSvmModel>) {
                bool converged = true;
                for (const auto& m : p.machines) converged = converged && m.converged;
                j["kernel_gamma"] = p.kernel.gamma;
                j["support_vectors"] = p.support.rows;
                j["pair_machines"] = p.machines.size();
                j["converged"] = converged;
            } else {
                j["weight_rows"] = p.weights.rows;
                j["converged"] = p.converged;
            }
        },
        model.parameters);
    return j;
}

struct Loaded {
    EmbeddingStore store;
    GroupsFile groups_file;
    std::vector<CallerGroup> groups;
};

Loaded load_groups(const fs::path& store_path, const fs::path& groups_path)
{
    Loaded l;
    l.store = read_store(store_path);
    l.groups_file = groups_file_from_json(read_json_file(groups_path));
    l.groups = materialize_groups(l.store, l.groups_file.splits.assignment, l.groups_file.options.unit_kind,
                                  l.groups_file.ranges);
    return l;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Caller discrimination and detection on embedding stores"};
    app.set_version_flag("--version", tool_version());
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (default: CALLERSPACE_THREADS, else 1)");

    std::string format_text = "csv";
    auto add_format = [&](CLI::App* cmd) {
        cmd->add_option("--format", format_text, "csv|json")->check(CLI::IsMember({"csv", "json"}));
    };

    // store
    auto* store_cmd = app.add_subcommand("store", "Inspect embedding store files");
    store_cmd->require_subcommand(1);
    std::string store_path;
    auto* validate_cmd = store_cmd->add_subcommand("validate", "Check a store against the format rules");
    validate_cmd->add_option("path", store_path)->required();
    auto* summary_cmd = store_cmd->add_subcommand("summary", "Segment counts and length statistics");
    summary_cmd->add_option("path", store_path)->required();
    std::string out_path;
    summary_cmd->add_option("--out", out_path);
    add_format(summary_cmd);

    // split
    auto* split_cmd = app.add_subcommand("split", "Assign segments to train/val/test");
    std::string ratios_text = "0.7,0.2,0.1";
    std::uint64_t seed = 0;
    std::string mode_text = "sequential";
    split_cmd->add_option("path", store_path)->required();
    split_cmd->add_option("--ratios", ratios_text);
    split_cmd->add_option("--seed", seed);
    split_cmd->add_option("--mode", mode_text)->check(CLI::IsMember({"sequential", "shuffled"}));
    split_cmd->add_option("--out", out_path)->required();

    // groups
    auto* groups_cmd = app.add_subcommand("groups", "Caller-group construction");
    groups_cmd->require_subcommand(1);
    auto* groups_build = groups_cmd->add_subcommand("build", "Build caller groups from a split");
    std::string splits_path;
    std::size_t train_groups = 100;
    std::string unit_text = "frame";
    bool respect_segments = false;
    groups_build->add_option("store", store_path)->required();
    groups_build->add_option("--splits", splits_path)->required();
    groups_build->add_option("--train-groups", train_groups);
    groups_build->add_option("--unit", unit_text)->check(CLI::IsMember({"frame", "segment-mean"}));
    groups_build->add_flag("--respect-segments", respect_segments);
    groups_build->add_option("--out", out_path)->required();

    // analyze
    auto* analyze_cmd = app.add_subcommand("analyze", "Caller discrimination analysis");
    analyze_cmd->require_subcommand(1);
    auto* distances_cmd = analyze_cmd->add_subcommand("distances", "Caller x caller distance matrix");
    std::string groups_path;
    std::string measure_text = "kl";
    std::string split_text = "train";
    std::string heatmap_path;
    distances_cmd->add_option("store", store_path)->required();
    distances_cmd->add_option("--groups", groups_path)->required();
    distances_cmd->add_option("--measure", measure_text)->check(CLI::IsMember({"kl", "bc"}));
    distances_cmd->add_option("--split", split_text)->check(CLI::IsMember({"train", "val", "test"}));
    distances_cmd->add_option("--out", out_path)->required();
    distances_cmd->add_option("--heatmap", heatmap_path);
    auto* heatmap_cmd = analyze_cmd->add_subcommand("heatmap", "Render a matrix CSV as an SVG heatmap");
    std::string matrix_path;
    heatmap_cmd->add_option("matrix", matrix_path)->required();
    heatmap_cmd->add_option("--measure", measure_text)->check(CLI::IsMember({"kl", "bc"}));
    heatmap_cmd->add_option("--out", out_path)->required();

    // detect
    auto* detect_cmd = app.add_subcommand("detect", "Grid search + k-fold caller detection");
    std::string algo_text = "svm";
    std::size_t folds = 5;
    std::string roc_path;
    std::string space_path;
    std::string models_out;
    detect_cmd->add_option("store", store_path)->required();
    detect_cmd->add_option("--groups", groups_path)->required();
    detect_cmd->add_option("--algo", algo_text)->check(CLI::IsMember({"svm", "lsvm", "rf", "ab"}));
    detect_cmd->add_option("--folds", folds);
    detect_cmd->add_option("--seed", seed);
    detect_cmd->add_option("--out", out_path)->required();
    detect_cmd->add_option("--roc", roc_path);
    detect_cmd->add_option("--search-space", space_path, "JSON subset of the hyperparameter grid");
    detect_cmd->add_option("--models-out", models_out, "Directory for the per-fold models");

    // report
    auto* report_cmd = app.add_subcommand("report", "Tables from detection reports");
    report_cmd->require_subcommand(1);
    auto* table3_cmd = report_cmd->add_subcommand("table3", "Model x classifier macro AUC matrix");
    std::vector<std::string> report_paths;
    table3_cmd->add_option("reports", report_paths)->required();
    table3_cmd->add_option("--out", out_path);
    add_format(table3_cmd);
    auto* size_cmd = report_cmd->add_subcommand("size-vs-auc", "Model size against macro AUC");
    std::string registry_path;
    size_cmd->add_option("--registry", registry_path)->required();
    size_cmd->add_option("--out", out_path);
    add_format(size_cmd);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic embedding store");
    SynthSpec spec;
    synth_cmd->add_option("--callers", spec.num_callers);
    synth_cmd->add_option("--dim", spec.embed_dim);
    synth_cmd->add_option("--separation", spec.separation);
    synth_cmd->add_flag("--nonlinear", spec.nonlinear);
    synth_cmd->add_option("--seed", spec.seed);
    synth_cmd->add_option("--max-segments", spec.max_segments);
    synth_cmd->add_option("--imbalance", spec.imbalance);
    synth_cmd->add_option("--out", out_path)->required();

    // model
    auto* model_cmd = app.add_subcommand("model", "Saved classifier models");
    model_cmd->require_subcommand(1);
    auto* inspect_cmd = model_cmd->add_subcommand("inspect", "Summarize a saved model");
    std::string model_path;
    inspect_cmd->add_option("path", model_path)->required();
    add_format(inspect_cmd);

    // run
    auto* run_cmd = app.add_subcommand("run", "Run a full experiment from a YAML config");
    std::string config_path;
    std::string run_out;
    std::optional<std::uint64_t> run_seed;
    std::string run_store;
    bool force = false;
    run_cmd->add_option("config", config_path)->required();
    run_cmd->add_option("--out", run_out);
    run_cmd->add_option("--seed", run_seed);
    run_cmd->add_option("--store", run_store);
    run_cmd->add_flag("--force", force, "Rebuild even if the bundle is up to date");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        set_thread_count(threads);
        const auto format = parse_output_format(format_text);

        if (*validate_cmd) {
            const auto store = read_store(store_path);
            std::cout << "ok: " << store.records.size() << " records, " << store.callers().size()
                      << " callers, embed_dim " << store.meta.embed_dim << ", model " << store.meta.model_name << "\n";
        } else if (*summary_cmd) {
            emit(out_path, summary_text(read_store(store_path), format));
        } else if (*split_cmd) {
            const auto r = parse_ratio_list(ratios_text);
            SplitFile file{{r[0], r[1], r[2]}, seed, parse_split_mode(mode_text), {}};
            file.ratios.validate();
            const auto store = read_store(store_path);
            file.assignment = split_dataset(store, file.ratios, seed, file.mode);
            const auto m = command_manifest("split", {{"ratios", r}, {"seed", seed}, {"mode", mode_text}}, {store_path});
            emit(out_path, with_manifest(to_json(file), m));
        } else if (*groups_build) {
            const auto store = read_store(store_path);
            GroupsFile file;
            file.splits = split_file_from_json(read_json_file(splits_path));
            file.options.unit_kind = parse_unit_kind(unit_text);
            file.options.respect_segments = respect_segments;
            file.train_groups = train_groups;
            const auto groups = build_all_caller_groups(store, file.splits.assignment, file.splits.ratios, train_groups,
                                                        file.options);
            file.ranges = group_ranges(groups);
            const auto m = command_manifest("groups build",
                                            {{"train_groups", train_groups}, {"unit", unit_text},
                                             {"respect_segments", respect_segments}},
                                            {store_path, splits_path});
            emit(out_path, with_manifest(to_json(file), m));
        } else if (*distances_cmd) {
            const auto loaded = load_groups(store_path, groups_path);
            const auto split = parse_split(split_text);
            std::vector<CallerGroup> selected;
            for (const auto& g : loaded.groups) {
                if (g.split() == split) selected.push_back(g);
            }
            const auto matrix = distance_matrix(fit_caller_gaussians(selected), parse_measure(measure_text));
            const auto m = command_manifest("analyze distances", {{"measure", measure_text}, {"split", split_text}},
                                            {store_path, groups_path});
            std::ostringstream csv;
            csv << csv_banner(m);
            write_matrix_csv(csv, std::span(&matrix, 1));
            emit(out_path, csv.str());
            if (!heatmap_path.empty()) {
                write_text_file(heatmap_path, "<!-- manifest_sha256=" + m.hash() + " -->\n" + heatmap_svg(matrix));
            }
        } else if (*heatmap_cmd) {
            std::ifstream in(matrix_path);
            if (!in) throw Error(ErrorCode::Io, "cannot open " + matrix_path);
            const auto matrices = parse_matrix_csv(in);
            const auto measure = parse_measure(measure_text);
            const DistanceMatrixReport* chosen = nullptr;
            for (const auto& mat : matrices) {
                if (mat.measure == measure) chosen = &mat;
            }
            if (chosen == nullptr && matrices.size() == 1 && heatmap_cmd->count("--measure") == 0) {
                chosen = &matrices.front();
            }
            if (chosen == nullptr) {
                throw Error(ErrorCode::InvalidArgument, "matrix CSV has no rows for measure " + measure_text);
            }
            write_text_file(out_path, heatmap_svg(*chosen));
        } else if (*detect_cmd) {
            const auto loaded = load_groups(store_path, groups_path);
            const auto algorithm = parse_algorithm(algo_text);
            SearchSpace space = SearchSpace::full(algorithm);
            std::vector<fs::path> inputs = {store_path, groups_path};
            json space_json = to_json(space);
            if (!space_path.empty()) {
                space_json = read_json_file(space_path);
                space = search_space_from_json(algorithm, space_json);
                inputs.emplace_back(space_path);
            }
            const auto data = functional_dataset(loaded.groups);
            const auto plan = make_folds(loaded.groups, folds, seed);
            std::vector<TrainedModel> models;
            const auto report = grid_search(plan, data, space, seed, loaded.store.meta.model_name,
                                            models_out.empty() ? nullptr : &models);
            const auto m = command_manifest("detect",
                                            {{"algo", algo_text}, {"folds", folds}, {"seed", seed},
                                             {"search_space", to_json(space)}},
                                            inputs);
            emit(out_path, with_manifest(to_json(report), m));
            if (!roc_path.empty()) {
                std::ostringstream csv;
                csv << csv_banner(m);
                write_roc_csv(csv, report);
                write_text_file(roc_path, csv.str());
            }
            if (!models_out.empty()) {
                fs::create_directories(models_out);
                for (std::size_t f = 0; f < models.size(); ++f) {
                    save_model(models[f], fs::path(models_out) / ("fold_" + std::to_string(f) + ".model"));
                }
            }
        } else if (*table3_cmd) {
            std::vector<EvalReport> reports;
            for (const auto& p : report_paths) {
                for (auto& r : load_reports(p)) reports.push_back(std::move(r));
            }
            std::ostringstream out;
            write_table3(out, build_table3(reports), format);
            emit(out_path, out.str());
        } else if (*size_cmd) {
            const auto rows = size_vs_auc(registry_path);
            std::ostringstream out;
            write_size_vs_auc(out, rows, format);
            emit(out_path, out.str());
        } else if (*synth_cmd) {
            const auto store = generate_store(spec);
            auto tmp = fs::path(out_path);
            tmp += ".tmp";
            write_store(store, tmp);
            fs::rename(tmp, out_path);
            std::cout << "wrote " << store.records.size() << " records for " << spec.num_callers << " callers to "
                      << out_path << "\n";
        } else if (*inspect_cmd) {
            const auto summary = model_summary(load_model(model_path));
            if (format == OutputFormat::Json) {
                std::cout << summary.dump(2) << "\n";
            } else {
                std::cout << "key,value\n";
                for (const auto& [key, value] : summary.items()) {
                    std::string text = value.is_string() ? value.get<std::string>() : value.dump();
                    if (text.find(',') != std::string::npos || text.find('"') != std::string::npos) {
                        std::string quoted;
                        for (char c : text) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
                        text = "\"" + quoted + "\"";
                    }
                    std::cout << key << ',' << text << "\n";
                }
            }
        } else if (*run_cmd) {
            ConfigOverrides overrides;
            if (!run_out.empty()) overrides.out = run_out;
            if (!run_store.empty()) overrides.store = run_store;
            overrides.seed = run_seed;
            const auto config = load_experiment_config(config_path, overrides);
            const auto started = iso_now();
            const auto result = run_experiment(config, force);
            const auto finished = iso_now();
            // Wall-clock data lives beside the bundle so the bundle itself
            // stays identical across reruns.
            auto info_path = fs::absolute(result.bundle);
            info_path += ".runinfo.json";
            const json info = {{"manifest_sha256", result.manifest_hash}, {"started", started},
                               {"finished", finished}, {"threads", thread_count()},
                               {"up_to_date", result.up_to_date}};
            write_text_file(info_path, info.dump(2) + "\n");
            std::cout << (result.up_to_date ? "up to date: " : "wrote bundle: ") << result.bundle.string()
                      << " (manifest " << result.manifest_hash.substr(0, 12) << ")\n";
        }
    } catch (const Error& e) {
        std::cerr << "callerspace: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "callerspace: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "callerspace: internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kOk;
}
