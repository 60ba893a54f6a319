#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "callerspace/evaluation.hpp"
#include "callerspace/gaussian.hpp"
#include "callerspace/grouping.hpp"
#include "callerspace/store.hpp"

namespace callerspace {

/// Contents of splits.json.
struct SplitFile {
    SplitRatios ratios;
    std::uint64_t seed = 0;
    SplitMode mode = SplitMode::Sequential;
    SplitAssignment assignment;
};

nlohmann::json to_json(const SplitFile& splits);
SplitFile split_file_from_json(const nlohmann::json& j);

/// Contents of groups.json: unit index ranges plus the split they refer to.
struct GroupsFile {
    SplitFile splits;
    GroupingOptions options;
    std::size_t train_groups = 0;
    std::vector<GroupRange> ranges;
};

nlohmann::json to_json(const GroupsFile& groups);
GroupsFile groups_file_from_json(const nlohmann::json& j);

/// caller_a,caller_b,measure,mean,std,count; one row per cell.
void write_matrix_csv(std::ostream& out, std::span<const DistanceMatrixReport> reports);
/// Lines starting with '#' are skipped. Throws InvalidArgument naming the
/// offending line.
std::vector<DistanceMatrixReport> parse_matrix_csv(std::istream& in);

nlohmann::json to_json(const MacroAuc& auc);
nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// fold,class_or_pair,fpr,tpr.
void write_roc_csv(std::ostream& out, const EvalReport& report);

/// Shortest text that reads back as the same double.
std::string format_number(double value);

nlohmann::json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
void write_text_file(const std::filesystem::path& path, std::string_view text);

} // namespace callerspace
