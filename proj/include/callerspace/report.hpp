#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "callerspace/evaluation.hpp"
#include "callerspace/gaussian.hpp"
#include "callerspace/store.hpp"

namespace callerspace {

enum class OutputFormat { Csv, Json };
OutputFormat parse_output_format(std::string_view text);

/// Reads a report file holding one EvalReport or {"reports": [...]}.
std::vector<EvalReport> load_reports(const std::filesystem::path& path);

/// Model x classifier matrix of macro AUC in percent.
struct Table3 {
    std::vector<std::string> models;
    std::vector<Algorithm> algorithms;
    /// (model, algorithm) -> (mean, std) in percent.
    std::map<std::pair<std::string, Algorithm>, std::pair<double, double>> cells;
};

Table3 build_table3(std::span<const EvalReport> reports);
void write_table3(std::ostream& out, const Table3& table, OutputFormat format);

struct SizeAucRow {
    std::string model_name;
    double param_count_millions = 0.0;
    PretextObjective objective = PretextObjective::MaskedPrediction;
    std::uint32_t embed_dim = 0;
    Algorithm algorithm = Algorithm::Svm;
    double mean_auc = 0.0;
    double std_auc = 0.0;
};

/// Registry: {"models": [{"model_name", "reports": [paths], optional
/// "param_count_millions", "pretext_objective", "embed_dim"}]}. Missing
/// metadata is taken from the known model table. Report paths resolve
/// relative to the registry file.
std::vector<SizeAucRow> size_vs_auc(const std::filesystem::path& registry);
void write_size_vs_auc(std::ostream& out, std::span<const SizeAucRow> rows, OutputFormat format);

/// Grayscale caller x caller heatmap; darker cells hold larger values.
std::string heatmap_svg(const DistanceMatrixReport& matrix);

} // namespace callerspace
