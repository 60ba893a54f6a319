#include "callerspace/experiment.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "callerspace/error.hpp"
#include "callerspace/evaluation.hpp"
#include "callerspace/formats.hpp"
#include "callerspace/report.hpp"

#ifndef CALLERSPACE_VERSION
#define CALLERSPACE_VERSION "0.0.0"
#endif

namespace callerspace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string tool_version()
{
    return CALLERSPACE_VERSION;
}

namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new())
    {
        if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
            throw Error(ErrorCode::Internal, "SHA-256 init failed");
        }
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, std::size_t size)
    {
        if (EVP_DigestUpdate(ctx_, data, size) != 1) throw Error(ErrorCode::Internal, "SHA-256 update failed");
    }

    std::string hex()
    {
        std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_, digest.data(), &len) != 1) throw Error(ErrorCode::Internal, "SHA-256 final failed");
        static constexpr char kHex[] = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out += kHex[digest[i] >> 4];
            out += kHex[digest[i] & 0xF];
        }
        return out;
    }

private:
    EVP_MD_CTX* ctx_;
};

} // namespace

std::string sha256_hex(std::string_view data)
{
    Sha256 h;
    h.update(data.data(), data.size());
    return h.hex();
}

std::string sha256_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    Sha256 h;
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

json RunManifest::to_json() const
{
    return {{"tool", "callerspace"}, {"version", tool_version()}, {"command", command}, {"config", config},
            {"inputs", inputs}};
}

std::string RunManifest::hash() const
{
    return sha256_hex(to_json().dump());
}

// ---------------------------------------------------------------------------
// Configuration

json ExperimentConfig::to_json() const
{
    json j;
    j["out"] = out.string();
    j["seed"] = seed;
    if (store) j["store"] = store->string();
    if (synth) {
        j["synth"] = {{"callers", synth->num_callers},
                      {"dim", synth->embed_dim},
                      {"separation", synth->separation},
                      {"nonlinear", synth->nonlinear},
                      {"seed", synth->seed},
                      {"max_segments", synth->max_segments},
                      {"imbalance", synth->imbalance},
                      {"segments_per_caller", synth->segments_per_caller}};
    }
    j["split"] = {{"ratios", {ratios.train, ratios.val, ratios.test}},
                  {"mode", std::string(to_string(split_mode))},
                  {"seed", split_seed}};
    j["groups"] = {{"train_groups", train_groups},
                   {"unit", std::string(to_string(grouping.unit_kind))},
                   {"respect_segments", grouping.respect_segments}};
    json measure_names = json::array();
    for (auto m : measures) measure_names.push_back(std::string(to_string(m)));
    j["analyze"] = {{"measures", measure_names}, {"split", std::string(to_string(analyze_split))}, {"heatmap", heatmap}};
    json algos = json::array();
    json spaces = json::object();
    for (auto a : algorithms) {
        algos.push_back(std::string(to_string(a)));
        spaces[std::string(to_string(a))] = callerspace::to_json(search_spaces.at(a));
    }
    j["detect"] = {{"algorithms", algos}, {"folds", folds}, {"seed", detect_seed}, {"search_space", spaces}};
    return j;
}

namespace {

/// YAML node plus its dotted key path, for error messages.
class ConfigNode {
public:
    ConfigNode(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {}

    [[noreturn]] void fail(const std::string& message) const
    {
        std::string where = path_.empty() ? "config" : path_;
        if (node_.Mark().line >= 0) where += " (line " + std::to_string(node_.Mark().line + 1) + ")";
        throw Error(ErrorCode::Config, where + ": " + message);
    }

    bool has(const std::string& key) const { return node_.IsMap() && node_[key]; }

    ConfigNode child(const std::string& key) const
    {
        return ConfigNode(node_[key], path_.empty() ? key : path_ + "." + key);
    }

    void expect_map() const
    {
        if (!node_.IsMap()) fail("expected a mapping");
    }

    void allow_keys(std::initializer_list<std::string_view> keys) const
    {
        expect_map();
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
                ConfigNode(kv.first, path_.empty() ? key : path_ + "." + key).fail("unknown key");
            }
        }
    }

    template <class T>
    T as() const
    {
        try {
            return node_.as<T>();
        } catch (const YAML::Exception&) {
            fail("wrong type");
        }
    }

    template <class T>
    T get(const std::string& key, T fallback) const
    {
        return has(key) ? child(key).as<T>() : fallback;
    }

    template <class T>
    std::vector<T> list() const
    {
        if (!node_.IsSequence()) fail("expected a list");
        std::vector<T> out;
        for (std::size_t i = 0; i < node_.size(); ++i) {
            out.push_back(ConfigNode(node_[i], path_ + "[" + std::to_string(i) + "]").as<T>());
        }
        return out;
    }

    /// Runs parse(text) and turns a library error into a located config error.
    template <class F>
    auto parsed(F parse) const
    {
        try {
            return parse(as<std::string>());
        } catch (const Error& e) {
            fail(e.what());
        }
    }

    json to_json() const { return yaml_to_json(node_); }

private:
    static json yaml_to_json(const YAML::Node& node)
    {
        if (node.IsSequence()) {
            json arr = json::array();
            for (const auto& item : node) arr.push_back(yaml_to_json(item));
            return arr;
        }
        if (node.IsMap()) {
            json obj = json::object();
            for (const auto& kv : node) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
            return obj;
        }
        if (node.IsNull()) return nullptr;
        std::int64_t i = 0;
        if (YAML::convert<std::int64_t>::decode(node, i)) return i;
        double d = 0.0;
        if (YAML::convert<double>::decode(node, d)) return d;
        bool b = false;
        if (YAML::convert<bool>::decode(node, b)) return b;
        return node.as<std::string>();
    }

    YAML::Node node_;
    std::string path_;
};

fs::path resolve(const fs::path& base, const fs::path& p)
{
    return p.is_absolute() ? p : base / p;
}

} // namespace

ExperimentConfig parse_experiment_config(const std::string& yaml_text, const fs::path& base_dir,
                                         const ConfigOverrides& overrides)
{
    YAML::Node doc;
    try {
        doc = YAML::Load(yaml_text);
    } catch (const YAML::ParserException& e) {
        throw Error(ErrorCode::Config, "config (line " + std::to_string(e.mark.line + 1) + "): " + e.msg);
    }
    const ConfigNode root(doc, "");
    root.allow_keys({"out", "seed", "store", "synth", "split", "groups", "analyze", "detect"});

    ExperimentConfig cfg;
    cfg.seed = overrides.seed ? *overrides.seed : root.get<std::uint64_t>("seed", 0);
    if (overrides.out) {
        cfg.out = *overrides.out;
    } else if (root.has("out")) {
        cfg.out = resolve(base_dir, root.child("out").as<std::string>());
    } else {
        root.fail("missing key 'out'");
    }

    if (overrides.store) {
        cfg.store = *overrides.store;
    } else if (root.has("store")) {
        cfg.store = resolve(base_dir, root.child("store").as<std::string>());
    }
    if (root.has("synth") && !cfg.store) {
        const auto node = root.child("synth");
        node.allow_keys({"callers", "dim", "separation", "nonlinear", "seed", "max_segments", "imbalance",
                         "segments_per_caller"});
        SynthSpec spec;
        spec.num_callers = node.get<std::uint16_t>("callers", spec.num_callers);
        spec.embed_dim = node.get<std::uint32_t>("dim", spec.embed_dim);
        spec.separation = node.get<double>("separation", spec.separation);
        spec.nonlinear = node.get<bool>("nonlinear", spec.nonlinear);
        spec.seed = node.get<std::uint64_t>("seed", cfg.seed);
        spec.max_segments = node.get<std::uint32_t>("max_segments", spec.max_segments);
        spec.imbalance = node.get<double>("imbalance", spec.imbalance);
        if (node.has("segments_per_caller")) {
            spec.segments_per_caller = node.child("segments_per_caller").list<std::uint32_t>();
        }
        try {
            spec.validate();
        } catch (const Error& e) {
            node.fail(e.what());
        }
        cfg.synth = spec;
    }
    if (!cfg.store && !cfg.synth) {
        root.fail("one of 'store' or 'synth' is required");
    }

    cfg.split_seed = cfg.seed;
    if (root.has("split")) {
        const auto node = root.child("split");
        node.allow_keys({"ratios", "mode", "seed"});
        if (node.has("ratios")) {
            const auto ratios_node = node.child("ratios");
            const auto r = ratios_node.list<double>();
            if (r.size() != 3) ratios_node.fail("expected three values (train, val, test)");
            cfg.ratios = {r[0], r[1], r[2]};
            try {
                cfg.ratios.validate();
            } catch (const Error& e) {
                ratios_node.fail(e.what());
            }
        }
        if (node.has("mode")) cfg.split_mode = node.child("mode").parsed(parse_split_mode);
        cfg.split_seed = node.get<std::uint64_t>("seed", cfg.seed);
    }

    if (root.has("groups")) {
        const auto node = root.child("groups");
        node.allow_keys({"train_groups", "unit", "respect_segments"});
        cfg.train_groups = node.get<std::size_t>("train_groups", cfg.train_groups);
        if (cfg.train_groups == 0) node.child("train_groups").fail("must be positive");
        if (node.has("unit")) cfg.grouping.unit_kind = node.child("unit").parsed(parse_unit_kind);
        cfg.grouping.respect_segments = node.get<bool>("respect_segments", false);
    }

    if (root.has("analyze")) {
        const auto node = root.child("analyze");
        node.allow_keys({"measures", "split", "heatmap"});
        if (node.has("measures")) {
            const auto list = node.child("measures");
            cfg.measures.clear();
            for (const auto& name : list.list<std::string>()) {
                try {
                    cfg.measures.push_back(parse_measure(name));
                } catch (const Error& e) {
                    list.fail(e.what());
                }
            }
        }
        if (node.has("split")) cfg.analyze_split = node.child("split").parsed(parse_split);
        cfg.heatmap = node.get<bool>("heatmap", cfg.heatmap);
    }

    cfg.detect_seed = cfg.seed;
    std::map<Algorithm, json> space_overrides;
    if (root.has("detect")) {
        const auto node = root.child("detect");
        node.allow_keys({"algorithms", "folds", "seed", "search_space"});
        if (node.has("algorithms")) {
            const auto list = node.child("algorithms");
            cfg.algorithms.clear();
            for (const auto& name : list.list<std::string>()) {
                try {
                    cfg.algorithms.push_back(parse_algorithm(name));
                } catch (const Error& e) {
                    list.fail(e.what());
                }
            }
        }
        cfg.folds = node.get<std::size_t>("folds", cfg.folds);
        if (cfg.folds < 2) node.child("folds").fail("need at least 2 folds");
        cfg.detect_seed = node.get<std::uint64_t>("seed", cfg.seed);
        if (node.has("search_space")) {
            const auto spaces = node.child("search_space");
            spaces.allow_keys({"rf", "ab", "svm", "lsvm"});
            for (auto a : {Algorithm::RandomForest, Algorithm::AdaBoost, Algorithm::Svm, Algorithm::LinearSvm}) {
                const std::string key(to_string(a));
                if (!spaces.has(key)) continue;
                const auto sub = spaces.child(key);
                try {
                    cfg.search_spaces[a] = search_space_from_json(a, sub.to_json());
                } catch (const Error& e) {
                    sub.fail(e.what());
                } catch (const json::exception& e) {
                    sub.fail(e.what());
                }
            }
        }
    }
    for (auto a : cfg.algorithms) {
        if (cfg.search_spaces.count(a) == 0) cfg.search_spaces[a] = SearchSpace::full(a);
    }
    for (auto it = cfg.search_spaces.begin(); it != cfg.search_spaces.end();) {
        const bool used = std::find(cfg.algorithms.begin(), cfg.algorithms.end(), it->first) != cfg.algorithms.end();
        it = used ? std::next(it) : cfg.search_spaces.erase(it);
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path, const ConfigOverrides& overrides)
{
    return parse_experiment_config(read_text_file(path), path.parent_path(), overrides);
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

/// Collects bundle files in memory; they reach disk only when the whole
/// pipeline has succeeded.
struct Bundle {
    std::vector<std::pair<std::string, std::string>> files;

    void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
};

std::string with_manifest(const json& artifact, const std::string& hash)
{
    json j = artifact;
    j["manifest_sha256"] = hash;
    return j.dump(2) + "\n";
}

std::string csv_banner(const std::string& hash)
{
    return "# manifest_sha256=" + hash + "\n";
}

bool bundle_matches(const fs::path& dir, const std::string& manifest_text)
{
    const auto manifest = dir / "manifest.json";
    if (!fs::exists(manifest)) return false;
    if (read_text_file(manifest) != manifest_text) return false;
    const auto listed = json::parse(manifest_text).at("artifacts");
    for (const auto& name : listed) {
        if (!fs::exists(dir / name.get<std::string>())) return false;
    }
    return true;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, bool force)
{
    if (config.out.empty()) {
        throw Error(ErrorCode::Config, "no output directory");
    }

    // Inputs and manifest first, so an up-to-date bundle costs nothing.
    RunManifest manifest;
    manifest.command = "run";
    manifest.config = config.to_json();
    manifest.config.erase("out");
    if (config.store) {
        manifest.inputs[config.store->filename().string()] = sha256_file(*config.store);
    }

    std::vector<std::string> artifacts = {"splits.json", "groups.json", "matrix.csv"};
    if (config.heatmap) {
        for (auto m : config.measures) artifacts.push_back("heatmap_" + std::string(to_string(m)) + ".svg");
    }
    if (!config.algorithms.empty()) {
        artifacts.emplace_back("report.json");
        for (auto a : config.algorithms) artifacts.push_back("roc_" + std::string(to_string(a)) + ".csv");
        artifacts.emplace_back("table3.csv");
    }
    json manifest_json = manifest.to_json();
    manifest_json["artifacts"] = artifacts;
    const std::string manifest_text = manifest_json.dump(2) + "\n";
    const std::string hash = sha256_hex(manifest_text);

    ExperimentResult result;
    result.bundle = config.out;
    result.manifest_hash = hash;
    result.artifacts = artifacts;
    if (!force && bundle_matches(config.out, manifest_text)) {
        result.up_to_date = true;
        return result;
    }

    const EmbeddingStore store = config.store ? read_store(*config.store) : generate_store(*config.synth);
    const std::string model_name = store.meta.model_name;

    Bundle bundle;
    SplitFile splits{config.ratios, config.split_seed, config.split_mode, {}};
    splits.assignment = split_dataset(store, config.ratios, config.split_seed, config.split_mode);
    bundle.add("splits.json", with_manifest(to_json(splits), hash));

    const auto groups = build_all_caller_groups(store, splits.assignment, config.ratios, config.train_groups,
                                                config.grouping);
    GroupsFile groups_file{splits, config.grouping, config.train_groups, group_ranges(groups)};
    bundle.add("groups.json", with_manifest(to_json(groups_file), hash));

    std::vector<CallerGroup> analysed;
    for (const auto& g : groups) {
        if (g.split() == config.analyze_split) analysed.push_back(g);
    }
    const auto gaussians = fit_caller_gaussians(analysed);
    std::vector<DistanceMatrixReport> matrices;
    for (auto m : config.measures) matrices.push_back(distance_matrix(gaussians, m));
    {
        std::ostringstream csv;
        csv << csv_banner(hash);
        write_matrix_csv(csv, matrices);
        bundle.add("matrix.csv", csv.str());
    }
    if (config.heatmap) {
        for (const auto& matrix : matrices) {
            bundle.add("heatmap_" + std::string(to_string(matrix.measure)) + ".svg",
                       "<!-- manifest_sha256=" + hash + " -->\n" + heatmap_svg(matrix));
        }
    }

    if (!config.algorithms.empty()) {
        const auto data = functional_dataset(groups);
        const auto folds = make_folds(groups, config.folds, config.detect_seed);
        json reports = json::array();
        std::vector<EvalReport> evals;
        std::vector<std::pair<std::string, std::string>> rocs;
        for (auto a : config.algorithms) {
            auto report = grid_search(folds, data, config.search_spaces.at(a), config.detect_seed, model_name);
            reports.push_back(to_json(report));
            std::ostringstream roc;
            roc << csv_banner(hash);
            write_roc_csv(roc, report);
            rocs.emplace_back("roc_" + std::string(to_string(a)) + ".csv", roc.str());
            evals.push_back(std::move(report));
        }
        bundle.add("report.json", with_manifest(json{{"reports", reports}}, hash));
        for (auto& [name, text] : rocs) bundle.add(name, std::move(text));
        std::ostringstream table;
        table << csv_banner(hash);
        write_table3(table, build_table3(evals), OutputFormat::Csv);
        bundle.add("table3.csv", table.str());
    }
    bundle.add("manifest.json", manifest_text);

    // Assemble next to the target, then swap directories.
    const fs::path target = fs::absolute(config.out);
    const std::string suffix = std::to_string(::getpid());
    const fs::path staging = target.parent_path() / (target.filename().string() + ".partial-" + suffix);
    const fs::path previous = target.parent_path() / (target.filename().string() + ".old-" + suffix);
    fs::create_directories(target.parent_path());
    fs::remove_all(staging);
    try {
        fs::create_directories(staging);
        for (const auto& [name, text] : bundle.files) {
            std::ofstream out(staging / name, std::ios::binary | std::ios::trunc);
            out.write(text.data(), static_cast<std::streamsize>(text.size()));
            if (!out) throw Error(ErrorCode::Io, "cannot write " + (staging / name).string());
        }
        if (fs::exists(target)) fs::rename(target, previous);
        fs::rename(staging, target);
        fs::remove_all(previous);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        if (!fs::exists(target, ec) && fs::exists(previous, ec)) fs::rename(previous, target, ec);
        throw;
    }
    return result;
}

} // namespace callerspace
