#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "callerspace/classifier_config.hpp"
#include "callerspace/gaussian.hpp"
#include "callerspace/grouping.hpp"
#include "callerspace/store.hpp"
#include "callerspace/synth.hpp"

namespace callerspace {

std::string tool_version();

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Identity of a run. Two runs with equal manifests write identical
/// artifacts; wall-clock data is kept out of it.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    /// Input path -> SHA-256 of its content.
    std::map<std::string, std::string> inputs;

    nlohmann::json to_json() const;
    std::string hash() const;
};

/// Fully resolved experiment configuration.
struct ExperimentConfig {
    std::filesystem::path out;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> store;
    std::optional<SynthSpec> synth;

    SplitRatios ratios;
    SplitMode split_mode = SplitMode::Sequential;
    std::uint64_t split_seed = 0;

    std::size_t train_groups = 100;
    GroupingOptions grouping;

    std::vector<DistanceMeasure> measures{DistanceMeasure::Kl, DistanceMeasure::Bhattacharyya};
    /// Split whose groups feed the distance matrices.
    Split analyze_split = Split::Train;
    bool heatmap = true;

    std::vector<Algorithm> algorithms{Algorithm::Svm, Algorithm::LinearSvm, Algorithm::RandomForest,
                                      Algorithm::AdaBoost};
    std::size_t folds = 5;
    std::uint64_t detect_seed = 0;
    std::map<Algorithm, SearchSpace> search_spaces;

    nlohmann::json to_json() const;
};

/// Command-line values that take precedence over the file.
struct ConfigOverrides {
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> store;
};

/// Parses a YAML experiment file. Schema violations throw
/// ErrorCode::Config naming the key path and line.
ExperimentConfig load_experiment_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});
ExperimentConfig parse_experiment_config(const std::string& yaml_text, const std::filesystem::path& base_dir,
                                         const ConfigOverrides& overrides = {});

struct ExperimentResult {
    std::filesystem::path bundle;
    std::string manifest_hash;
    bool up_to_date = false;
    std::vector<std::string> artifacts;
};

/// split -> groups -> distances -> detection -> tables, written as one
/// bundle directory. The bundle is assembled next to `out` and swapped in
/// only on success, so a failed run leaves an earlier bundle untouched.
/// A bundle whose manifest already matches is left as is unless forced.
ExperimentResult run_experiment(const ExperimentConfig& config, bool force = false);

} // namespace callerspace
