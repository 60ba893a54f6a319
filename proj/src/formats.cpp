#include "callerspace/formats.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "callerspace/error.hpp"

namespace callerspace {

using nlohmann::json;

namespace {

template <class T>
T require(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key)) {
        throw Error(ErrorCode::InvalidArgument, std::string("missing field '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "': " + e.what());
    }
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& text, std::size_t line)
{
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw Error(ErrorCode::InvalidArgument, "matrix CSV line " + std::to_string(line) + ": bad number '" + text + "'");
    }
    return value;
}

template <class Int>
Int parse_int(const std::string& text, std::size_t line)
{
    Int value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw Error(ErrorCode::InvalidArgument, "matrix CSV line " + std::to_string(line) + ": bad integer '" + text + "'");
    }
    return value;
}

} // namespace

std::string format_number(double value)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) {
        throw Error(ErrorCode::Internal, "number formatting failed");
    }
    return std::string(buf, ptr);
}

json to_json(const SplitFile& splits)
{
    json j;
    j["ratios"] = {splits.ratios.train, splits.ratios.val, splits.ratios.test};
    j["seed"] = splits.seed;
    j["mode"] = std::string(to_string(splits.mode));
    json segments = {{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
    for (const auto& [id, split] : splits.assignment.by_segment) {
        segments[std::string(to_string(split))].push_back(id);
    }
    j["segments"] = std::move(segments);
    return j;
}

SplitFile split_file_from_json(const json& j)
{
    SplitFile splits;
    const auto ratios = require<std::vector<double>>(j, "ratios");
    if (ratios.size() != 3) {
        throw Error(ErrorCode::InvalidArgument, "field 'ratios' must hold three values");
    }
    splits.ratios = {ratios[0], ratios[1], ratios[2]};
    splits.ratios.validate();
    splits.seed = require<std::uint64_t>(j, "seed");
    splits.mode = parse_split_mode(require<std::string>(j, "mode"));
    const auto& segments = j.at("segments");
    for (auto split : {Split::Train, Split::Val, Split::Test}) {
        for (auto id : require<std::vector<std::uint32_t>>(segments, std::string(to_string(split)).c_str())) {
            if (!splits.assignment.by_segment.emplace(id, split).second) {
                throw Error(ErrorCode::InvalidArgument, "segment " + std::to_string(id) + " assigned twice");
            }
        }
    }
    return splits;
}

json to_json(const GroupsFile& groups)
{
    json j;
    j["splits"] = to_json(groups.splits);
    j["unit"] = std::string(to_string(groups.options.unit_kind));
    j["respect_segments"] = groups.options.respect_segments;
    j["min_units_per_group"] = groups.options.min_units_per_group;
    j["train_groups"] = groups.train_groups;
    json ranges = json::array();
    for (const auto& r : groups.ranges) {
        ranges.push_back({r.caller_id, std::string(to_string(r.split)), r.group_index, r.unit_begin, r.unit_end});
    }
    j["groups"] = std::move(ranges);
    return j;
}

GroupsFile groups_file_from_json(const json& j)
{
    GroupsFile groups;
    if (!j.contains("splits")) {
        throw Error(ErrorCode::InvalidArgument, "missing field 'splits'");
    }
    groups.splits = split_file_from_json(j.at("splits"));
    groups.options.unit_kind = parse_unit_kind(require<std::string>(j, "unit"));
    groups.options.respect_segments = require<bool>(j, "respect_segments");
    groups.options.min_units_per_group = require<std::size_t>(j, "min_units_per_group");
    groups.train_groups = require<std::size_t>(j, "train_groups");
    if (!j.contains("groups") || !j.at("groups").is_array()) {
        throw Error(ErrorCode::InvalidArgument, "missing array 'groups'");
    }
    for (const auto& row : j.at("groups")) {
        if (!row.is_array() || row.size() != 5) {
            throw Error(ErrorCode::InvalidArgument, "group entries must be [caller, split, index, begin, end]");
        }
        GroupRange r;
        r.caller_id = row[0].get<std::uint16_t>();
        r.split = parse_split(row[1].get<std::string>());
        r.group_index = row[2].get<std::uint32_t>();
        r.unit_begin = row[3].get<std::size_t>();
        r.unit_end = row[4].get<std::size_t>();
        groups.ranges.push_back(r);
    }
    return groups;
}

void write_matrix_csv(std::ostream& out, std::span<const DistanceMatrixReport> reports)
{
    out << "caller_a,caller_b,measure,mean,std,count\n";
    for (const auto& report : reports) {
        for (const auto& cell : report.cells) {
            out << cell.caller_a << ',' << cell.caller_b << ',' << to_string(report.measure) << ','
                << format_number(cell.mean) << ',' << format_number(cell.std) << ',' << cell.count << '\n';
        }
    }
}

std::vector<DistanceMatrixReport> parse_matrix_csv(std::istream& in)
{
    std::vector<DistanceMatrixReport> reports;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split_csv_line(line);
        if (!header) {
            if (line != "caller_a,caller_b,measure,mean,std,count") {
                throw Error(ErrorCode::InvalidArgument, "matrix CSV line " + std::to_string(line_no) + ": unexpected header");
            }
            header = true;
            continue;
        }
        if (fields.size() != 6) {
            throw Error(ErrorCode::InvalidArgument, "matrix CSV line " + std::to_string(line_no) + ": expected 6 fields");
        }
        DistanceCell cell;
        cell.caller_a = parse_int<std::uint16_t>(fields[0], line_no);
        cell.caller_b = parse_int<std::uint16_t>(fields[1], line_no);
        DistanceMeasure measure;
        try {
            measure = parse_measure(fields[2]);
        } catch (const Error&) {
            throw Error(ErrorCode::InvalidArgument, "matrix CSV line " + std::to_string(line_no) + ": unknown measure");
        }
        cell.mean = parse_double(fields[3], line_no);
        cell.std = parse_double(fields[4], line_no);
        cell.count = parse_int<std::size_t>(fields[5], line_no);
        if (reports.empty() || reports.back().measure != measure) {
            reports.emplace_back().measure = measure;
        }
        reports.back().cells.push_back(std::move(cell));
    }
    if (!header) {
        throw Error(ErrorCode::InvalidArgument, "matrix CSV is empty");
    }
    // Cells must form a complete row-major square over the listed callers.
    for (auto& report : reports) {
        std::vector<std::uint16_t> callers;
        for (const auto& cell : report.cells) {
            if (cell.caller_a == report.cells.front().caller_a) callers.push_back(cell.caller_b);
        }
        const std::size_t n = callers.size();
        if (n * n != report.cells.size()) {
            throw Error(ErrorCode::InvalidArgument, "matrix CSV for " + std::string(to_string(report.measure)) +
                                                        " is not a square caller matrix");
        }
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
                const auto& cell = report.cells[r * n + c];
                if (cell.caller_a != callers[r] || cell.caller_b != callers[c]) {
                    throw Error(ErrorCode::InvalidArgument, "matrix CSV cells out of order");
                }
            }
        }
        report.callers = std::move(callers);
    }
    return reports;
}

json to_json(const MacroAuc& auc)
{
    json items = json::array();
    for (std::size_t i = 0; i < auc.per_item.size(); ++i) {
        items.push_back({{"name", auc.item_names[i]}, {"auc", auc.per_item[i] ? json(*auc.per_item[i]) : json(nullptr)}});
    }
    return {{"macro_auc", auc.value}, {"items", std::move(items)}, {"warnings", auc.warnings}};
}

json to_json(const EvalReport& report)
{
    json folds = json::array();
    for (const auto& f : report.folds) {
        folds.push_back({{"fold", f.fold_index},
                         {"chosen", to_json(f.chosen)},
                         {"val_f1", f.val_f1},
                         {"cells_evaluated", f.cells_evaluated},
                         {"cells_failed", f.cells_failed},
                         {"test_macro_auc", f.test_macro_auc},
                         {"test", to_json(f.test_auc)}});
    }
    json items = json::array();
    for (const auto& [name, value] : report.mean_item_auc) {
        items.push_back({{"name", name}, {"auc", value}});
    }
    return {{"model_name", report.model_name},
            {"algorithm", std::string(to_string(report.algorithm))},
            {"convention", std::string(to_string(report.convention))},
            {"mean_auc", report.mean_auc},
            {"std_auc", report.std_auc},
            {"folds", std::move(folds)},
            {"mean_item_auc", std::move(items)},
            {"warnings", report.warnings}};
}

EvalReport eval_report_from_json(const json& j)
{
    EvalReport report;
    report.model_name = require<std::string>(j, "model_name");
    report.algorithm = parse_algorithm(require<std::string>(j, "algorithm"));
    const auto convention = require<std::string>(j, "convention");
    bool known = false;
    for (auto c : {ScoreConvention::DecisionOvo, ScoreConvention::DecisionOvr, ScoreConvention::ProbabilityOvr}) {
        if (convention == to_string(c)) {
            report.convention = c;
            known = true;
        }
    }
    if (!known) {
        throw Error(ErrorCode::InvalidArgument, "unknown score convention '" + convention + "'");
    }
    report.mean_auc = require<double>(j, "mean_auc");
    report.std_auc = require<double>(j, "std_auc");
    for (const auto& f : j.at("folds")) {
        FoldResult fold;
        fold.fold_index = require<std::size_t>(f, "fold");
        fold.chosen = config_from_json(f.at("chosen"));
        fold.val_f1 = require<double>(f, "val_f1");
        fold.cells_evaluated = require<std::size_t>(f, "cells_evaluated");
        fold.cells_failed = require<std::size_t>(f, "cells_failed");
        fold.test_macro_auc = require<double>(f, "test_macro_auc");
        const auto& test = f.at("test");
        fold.test_auc.value = require<double>(test, "macro_auc");
        for (const auto& item : test.at("items")) {
            fold.test_auc.item_names.push_back(require<std::string>(item, "name"));
            const auto& auc = item.at("auc");
            fold.test_auc.per_item.push_back(auc.is_null() ? std::nullopt : std::optional<double>(auc.get<double>()));
        }
        fold.test_auc.warnings = require<std::vector<std::string>>(test, "warnings");
        report.folds.push_back(std::move(fold));
    }
    for (const auto& item : j.at("mean_item_auc")) {
        report.mean_item_auc[require<std::string>(item, "name")] = require<double>(item, "auc");
    }
    report.warnings = require<std::vector<std::string>>(j, "warnings");
    return report;
}

void write_roc_csv(std::ostream& out, const EvalReport& report)
{
    out << "fold,class_or_pair,fpr,tpr\n";
    for (const auto& fold : report.folds) {
        for (std::size_t i = 0; i < fold.test_auc.curves.size(); ++i) {
            if (!fold.test_auc.per_item[i]) continue;
            for (const auto& p : fold.test_auc.curves[i].points) {
                out << fold.fold_index << ',' << fold.test_auc.item_names[i] << ',' << format_number(p.fpr) << ','
                    << format_number(p.tpr) << '\n';
            }
        }
    }
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json read_json_file(const std::filesystem::path& path)
{
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, std::string_view text)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
        }
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) {
            throw Error(ErrorCode::Io, "write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace callerspace
