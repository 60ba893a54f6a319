#include "callerspace/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "callerspace/error.hpp"
#include "callerspace/formats.hpp"

namespace callerspace {

using nlohmann::json;

namespace {

constexpr Algorithm kTableColumns[] = {Algorithm::AdaBoost, Algorithm::LinearSvm, Algorithm::RandomForest,
                                       Algorithm::Svm};

std::string column_name(Algorithm a)
{
    switch (a) {
    case Algorithm::AdaBoost: return "AB";
    case Algorithm::LinearSvm: return "LSVM";
    case Algorithm::RandomForest: return "RF";
    case Algorithm::Svm: return "SVM";
    }
    return "?";
}

std::string fixed2(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string short_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string xml_escape(std::string_view text)
{
    std::string out;
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

OutputFormat parse_output_format(std::string_view text)
{
    if (text == "csv") return OutputFormat::Csv;
    if (text == "json") return OutputFormat::Json;
    throw Error(ErrorCode::InvalidArgument, "unknown format '" + std::string(text) + "' (csv|json)");
}

std::vector<EvalReport> load_reports(const std::filesystem::path& path)
{
    const auto j = read_json_file(path);
    std::vector<EvalReport> reports;
    try {
        if (j.is_object() && j.contains("reports")) {
            for (const auto& r : j.at("reports")) reports.push_back(eval_report_from_json(r));
        } else {
            reports.push_back(eval_report_from_json(j));
        }
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
    return reports;
}

Table3 build_table3(std::span<const EvalReport> reports)
{
    Table3 table;
    std::set<Algorithm> present;
    for (const auto& r : reports) {
        if (std::find(table.models.begin(), table.models.end(), r.model_name) == table.models.end()) {
            table.models.push_back(r.model_name);
        }
        present.insert(r.algorithm);
        if (!table.cells.emplace(std::make_pair(r.model_name, r.algorithm), std::make_pair(100.0 * r.mean_auc, 100.0 * r.std_auc))
                 .second) {
            throw Error(ErrorCode::InvalidArgument,
                        "duplicate report for " + r.model_name + " / " + std::string(to_string(r.algorithm)));
        }
    }
    for (auto a : kTableColumns) {
        if (present.count(a) != 0) table.algorithms.push_back(a);
    }
    return table;
}

void write_table3(std::ostream& out, const Table3& table, OutputFormat format)
{
    // Average row over the models that have a value in that column.
    std::map<Algorithm, std::pair<double, std::size_t>> average;
    for (const auto& [key, value] : table.cells) {
        auto& acc = average[key.second];
        acc.first += value.first;
        acc.second++;
    }
    if (format == OutputFormat::Json) {
        json rows = json::array();
        for (const auto& model : table.models) {
            json row = {{"model", model}};
            for (auto a : table.algorithms) {
                const auto it = table.cells.find({model, a});
                row[column_name(a)] = it == table.cells.end()
                                          ? json(nullptr)
                                          : json{{"mean", it->second.first}, {"std", it->second.second}};
            }
            rows.push_back(std::move(row));
        }
        json avg = {{"model", "Average"}};
        for (auto a : table.algorithms) {
            avg[column_name(a)] = {{"mean", average[a].first / static_cast<double>(average[a].second)}};
        }
        rows.push_back(std::move(avg));
        out << json{{"unit", "macro AUC [%]"}, {"rows", std::move(rows)}}.dump(2) << '\n';
        return;
    }
    out << "model";
    for (auto a : table.algorithms) out << ',' << column_name(a);
    out << '\n';
    for (const auto& model : table.models) {
        out << model;
        for (auto a : table.algorithms) {
            const auto it = table.cells.find({model, a});
            out << ',' << (it == table.cells.end() ? std::string() : fixed2(it->second.first));
        }
        out << '\n';
    }
    out << "Average";
    for (auto a : table.algorithms) {
        out << ',' << fixed2(average[a].first / static_cast<double>(average[a].second));
    }
    out << '\n';
}

std::vector<SizeAucRow> size_vs_auc(const std::filesystem::path& registry)
{
    const auto j = read_json_file(registry);
    if (!j.is_object() || !j.contains("models") || !j.at("models").is_array()) {
        throw Error(ErrorCode::InvalidArgument, registry.string() + ": expected {\"models\": [...]}");
    }
    std::vector<SizeAucRow> rows;
    for (const auto& entry : j.at("models")) {
        if (!entry.contains("model_name") || !entry.contains("reports")) {
            throw Error(ErrorCode::InvalidArgument, registry.string() + ": entries need model_name and reports");
        }
        const auto name = entry.at("model_name").get<std::string>();
        auto meta = find_known_model(name).value_or(ModelMeta{});
        meta.model_name = name;
        const bool known = find_known_model(name).has_value();
        if (entry.contains("param_count_millions")) {
            meta.param_count_millions = entry.at("param_count_millions").get<float>();
        } else if (!known) {
            throw Error(ErrorCode::InvalidArgument, "unknown model '" + name + "' needs param_count_millions");
        }
        if (entry.contains("pretext_objective")) {
            meta.pretext_objective = parse_objective(entry.at("pretext_objective").get<std::string>());
        }
        if (entry.contains("embed_dim")) {
            meta.embed_dim = entry.at("embed_dim").get<std::uint32_t>();
        }
        for (const auto& path_text : entry.at("reports")) {
            std::filesystem::path path = path_text.get<std::string>();
            if (path.is_relative()) path = registry.parent_path() / path;
            for (const auto& report : load_reports(path)) {
                rows.push_back({meta.model_name, static_cast<double>(meta.param_count_millions), meta.pretext_objective,
                                meta.embed_dim, report.algorithm, report.mean_auc, report.std_auc});
            }
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const SizeAucRow& a, const SizeAucRow& b) {
        return a.param_count_millions < b.param_count_millions;
    });
    return rows;
}

void write_size_vs_auc(std::ostream& out, std::span<const SizeAucRow> rows, OutputFormat format)
{
    if (format == OutputFormat::Json) {
        json arr = json::array();
        for (const auto& r : rows) {
            arr.push_back({{"model", r.model_name},
                           {"param_count_millions", r.param_count_millions},
                           {"pretext_objective", std::string(to_string(r.objective))},
                           {"embed_dim", r.embed_dim},
                           {"algorithm", std::string(to_string(r.algorithm))},
                           {"mean_auc", r.mean_auc},
                           {"std_auc", r.std_auc}});
        }
        out << arr.dump(2) << '\n';
        return;
    }
    out << "model,param_count_millions,pretext_objective,embed_dim,algorithm,mean_auc,std_auc\n";
    for (const auto& r : rows) {
        out << r.model_name << ',' << format_number(r.param_count_millions) << ',' << to_string(r.objective) << ','
            << r.embed_dim << ',' << to_string(r.algorithm) << ',' << format_number(r.mean_auc) << ','
            << format_number(r.std_auc) << '\n';
    }
}

std::string heatmap_svg(const DistanceMatrixReport& matrix)
{
    const std::size_t n = matrix.callers.size();
    if (n == 0 || matrix.cells.size() != n * n) {
        throw Error(ErrorCode::InvalidArgument, "heatmap needs a square, non-empty matrix");
    }
    double lo = matrix.cells.front().mean;
    double hi = lo;
    for (const auto& c : matrix.cells) {
        lo = std::min(lo, c.mean);
        hi = std::max(hi, c.mean);
    }
    constexpr int cell = 40;
    constexpr int left = 80;
    constexpr int top = 40;
    const int size = static_cast<int>(n) * cell;
    const int width = left + size + 20;
    const int height = top + size + 90;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << xml_escape(to_string(matrix.measure))
        << " distance</text>\n";
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const auto& value = matrix.cell(r, c);
            const double t = hi > lo ? (value.mean - lo) / (hi - lo) : 0.0;
            const int gray = static_cast<int>(std::lround(255.0 * (1.0 - t)));
            svg << "<rect x=\"" << left + static_cast<int>(c) * cell << "\" y=\"" << top + static_cast<int>(r) * cell
                << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << gray << ',' << gray << ','
                << gray << ")\"><title>" << value.caller_a << " vs " << value.caller_b << ": "
                << short_number(value.mean) << "</title></rect>\n";
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::string label = "Caller " + std::to_string(matrix.callers[i]);
        svg << "<text x=\"" << left - 6 << "\" y=\"" << top + static_cast<int>(i) * cell + cell / 2 + 4
            << "\" text-anchor=\"end\">" << label << "</text>\n";
        const int x = left + static_cast<int>(i) * cell + cell / 2;
        const int y = top + size + 8;
        svg << "<text x=\"" << x << "\" y=\"" << y << "\" text-anchor=\"end\" transform=\"rotate(-60 " << x << ' ' << y
            << ")\">" << label << "</text>\n";
    }
    // Scale bar: white at the minimum, black at the maximum.
    const int bar_y = top + size + 62;
    svg << "<defs><linearGradient id=\"scale\"><stop offset=\"0\" stop-color=\"rgb(255,255,255)\"/>"
        << "<stop offset=\"1\" stop-color=\"rgb(0,0,0)\"/></linearGradient></defs>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << bar_y << "\" width=\"" << size
        << "\" height=\"10\" fill=\"url(#scale)\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
    svg << "<text x=\"" << left << "\" y=\"" << bar_y + 22 << "\">min " << short_number(lo) << "</text>\n";
    svg << "<text x=\"" << left + size << "\" y=\"" << bar_y + 22 << "\" text-anchor=\"end\">max " << short_number(hi)
        << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

} // namespace callerspace
