#include "callerspace/store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "callerspace/binary_io.hpp"
#include "callerspace/error.hpp"
#include "callerspace/rng.hpp"

namespace callerspace {

std::string_view to_string(PretextObjective objective)
{
    switch (objective) {
    case PretextObjective::AutoregressiveReconstruction: return "autoregressive_reconstruction";
    case PretextObjective::MaskedReconstruction: return "masked_reconstruction";
    case PretextObjective::Contrastive: return "contrastive";
    case PretextObjective::MaskedPrediction: return "masked_prediction";
    }
    throw Error(ErrorCode::InvalidArgument, "bad pretext objective code");
}

PretextObjective parse_objective(std::string_view text)
{
    for (auto objective : {PretextObjective::AutoregressiveReconstruction, PretextObjective::MaskedReconstruction,
                           PretextObjective::Contrastive, PretextObjective::MaskedPrediction}) {
        if (text == to_string(objective)) {
            return objective;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown pretext objective '" + std::string(text) + "'");
}

void ModelMeta::validate() const
{
    if (embed_dim < 1 || embed_dim > 0xFFFF) {
        throw Error(ErrorCode::DimensionOrEmpty, "embed_dim must be in [1, 65535]");
    }
    if (!(param_count_millions > 0.0F) || !std::isfinite(param_count_millions)) {
        throw Error(ErrorCode::InvalidStore, "param_count_millions must be positive");
    }
    if (static_cast<std::uint8_t>(pretext_objective) > 3) {
        throw Error(ErrorCode::InvalidStore, "pretext objective code out of range");
    }
    if (model_name.size() > 0xFF) {
        throw Error(ErrorCode::InvalidStore, "model name longer than 255 bytes");
    }
}

const std::vector<ModelMeta>& known_models()
{
    using enum PretextObjective;
    static const std::vector<ModelMeta> models = {
        {"APC", "LS 360", 4.11F, 512, AutoregressiveReconstruction},
        {"VQ-APC", "LS 360", 4.63F, 512, AutoregressiveReconstruction},
        {"NPC", "LS 360", 19.38F, 512, MaskedReconstruction},
        {"Mockingjay", "LS 100", 21.33F, 768, MaskedReconstruction},
        {"TERA", "LS 100", 21.33F, 768, MaskedReconstruction},
        {"Mod-CPC", "LL 60k", 1.84F, 256, Contrastive},
        {"Wav2Vec2", "LS 960", 95.04F, 768, Contrastive},
        {"Hubert", "LS 960", 94.68F, 768, MaskedPrediction},
        {"DistilHubert", "LS 960", 27.03F, 768, MaskedPrediction},
        {"WavLM", "LS 960", 94.38F, 768, MaskedPrediction},
        {"Data2Vec", "LS 960", 93.16F, 768, MaskedPrediction},
    };
    return models;
}

std::optional<ModelMeta> find_known_model(std::string_view name)
{
    auto lower = [](std::string_view s) {
        std::string out(s);
        std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
        return out;
    };
    const std::string wanted = lower(name);
    for (const auto& model : known_models()) {
        if (lower(model.model_name) == wanted) {
            return model;
        }
    }
    return std::nullopt;
}

namespace {

void validate_record(const EmbeddingRecord& record, std::uint32_t embed_dim)
{
    const std::string where = "segment " + std::to_string(record.segment_id);
    if (record.num_frames == 0) {
        throw Error(ErrorCode::DimensionOrEmpty, where + " has no frames");
    }
    if (record.frames.size() != static_cast<std::size_t>(record.num_frames) * embed_dim) {
        throw Error(ErrorCode::DimensionOrEmpty,
                    where + " frame data does not match " + std::to_string(record.num_frames) + " x " +
                        std::to_string(embed_dim));
    }
    if (record.end_ms <= record.start_ms) {
        throw Error(ErrorCode::InvalidStore, where + " has end_ms <= start_ms");
    }
    if (record.source_file.size() > 0xFF) {
        throw Error(ErrorCode::InvalidStore, where + " source_file longer than 255 bytes");
    }
    for (float value : record.frames) {
        if (!std::isfinite(value)) {
            throw Error(ErrorCode::NonFiniteValue, where + " contains a non-finite frame value");
        }
    }
}

void validate_order(std::span<const EmbeddingRecord> records)
{
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& prev = records[i - 1];
        const auto& cur = records[i];
        if (std::tie(prev.source_file, prev.start_ms) > std::tie(cur.source_file, cur.start_ms)) {
            throw Error(ErrorCode::InvalidStore, "records not sorted by (source_file, start_ms) at segment " +
                                                     std::to_string(cur.segment_id));
        }
        if (cur.segment_id <= prev.segment_id) {
            throw Error(ErrorCode::InvalidStore,
                        "segment ids not strictly increasing at segment " + std::to_string(cur.segment_id));
        }
    }
}

} // namespace

void EmbeddingStore::validate() const
{
    meta.validate();
    for (const auto& record : records) {
        validate_record(record, meta.embed_dim);
    }
    validate_order(records);
}

std::vector<std::uint16_t> EmbeddingStore::callers() const
{
    std::set<std::uint16_t> ids;
    for (const auto& record : records) {
        ids.insert(record.caller_id);
    }
    return {ids.begin(), ids.end()};
}

void write_store(const ModelMeta& meta, std::span<const EmbeddingRecord> records, const std::filesystem::path& path)
{
    meta.validate();
    for (const auto& record : records) {
        validate_record(record, meta.embed_dim);
    }
    validate_order(records);
    if (records.size() > UINT32_MAX) {
        throw Error(ErrorCode::InvalidStore, "too many records");
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    }
    binary::Writer w(out);
    w.put_bytes(kStoreMagic.data(), kStoreMagic.size());
    w.put(kStoreVersion);
    w.put(static_cast<std::uint16_t>(meta.embed_dim));
    w.put(static_cast<std::uint32_t>(records.size()));
    w.put_short_string(meta.model_name);
    w.put(static_cast<std::uint8_t>(meta.pretext_objective));
    w.put(meta.param_count_millions);
    for (const auto& record : records) {
        w.put(record.segment_id);
        w.put(record.caller_id);
        w.put(record.calltype_id);
        w.put(record.start_ms);
        w.put(record.end_ms);
        w.put_short_string(record.source_file);
        w.put(record.num_frames);
        for (float value : record.frames) {
            w.put(value);
        }
    }
    out.flush();
    if (!out) {
        throw Error(ErrorCode::Io, "write failed for " + path.string());
    }
}

void write_store(const EmbeddingStore& store, const std::filesystem::path& path)
{
    write_store(store.meta, store.records, path);
}

EmbeddingStore read_store(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    binary::Reader r(in);

    std::array<char, 4> magic{};
    try {
        r.get_bytes(magic.data(), magic.size());
    } catch (const Error&) {
        throw Error(ErrorCode::BadMagic, path.string() + " is too short to be a store");
    }
    if (magic != kStoreMagic) {
        throw Error(ErrorCode::BadMagic, path.string() + " does not start with CSE1");
    }
    const auto version = r.get<std::uint16_t>();
    if (version != kStoreVersion) {
        throw Error(ErrorCode::UnsupportedVersion, "store version " + std::to_string(version));
    }

    EmbeddingStore store;
    store.meta.embed_dim = r.get<std::uint16_t>();
    const auto record_count = r.get<std::uint32_t>();
    store.meta.model_name = r.get_short_string();
    const auto objective = r.get<std::uint8_t>();
    if (objective > 3) {
        throw Error(ErrorCode::InvalidStore, "objective code " + std::to_string(objective));
    }
    store.meta.pretext_objective = static_cast<PretextObjective>(objective);
    store.meta.param_count_millions = r.get<float>();
    store.meta.validate();

    const std::size_t dim = store.meta.embed_dim;
    store.records.reserve(std::min<std::size_t>(record_count, 1U << 20));
    for (std::uint32_t i = 0; i < record_count; ++i) {
        EmbeddingRecord record;
        record.segment_id = r.get<std::uint32_t>();
        record.caller_id = r.get<std::uint16_t>();
        record.calltype_id = r.get<std::uint16_t>();
        record.start_ms = r.get<std::uint32_t>();
        record.end_ms = r.get<std::uint32_t>();
        record.source_file = r.get_short_string();
        record.num_frames = r.get<std::uint32_t>();
        const std::size_t values = static_cast<std::size_t>(record.num_frames) * dim;
        // Grow incrementally so a corrupt frame count cannot trigger a huge allocation.
        constexpr std::size_t kChunk = 1U << 16;
        for (std::size_t done = 0; done < values;) {
            const std::size_t take = std::min(kChunk, values - done);
            record.frames.resize(done + take);
            for (std::size_t k = 0; k < take; ++k) {
                record.frames[done + k] = r.get<float>();
            }
            done += take;
        }
        store.records.push_back(std::move(record));
    }
    if (!r.at_end()) {
        throw Error(ErrorCode::InvalidStore, "trailing bytes after the last record");
    }
    store.validate();
    return store;
}

std::string_view to_string(Split split)
{
    switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    throw Error(ErrorCode::InvalidArgument, "bad split");
}

Split parse_split(std::string_view text)
{
    if (text == "train") return Split::Train;
    if (text == "val") return Split::Val;
    if (text == "test") return Split::Test;
    throw Error(ErrorCode::InvalidArgument, "unknown split '" + std::string(text) + "'");
}

std::string_view to_string(SplitMode mode)
{
    return mode == SplitMode::Sequential ? "sequential" : "shuffled";
}

SplitMode parse_split_mode(std::string_view text)
{
    if (text == "sequential") return SplitMode::Sequential;
    if (text == "shuffled") return SplitMode::Shuffled;
    throw Error(ErrorCode::InvalidArgument, "unknown split mode '" + std::string(text) + "'");
}

void SplitRatios::validate() const
{
    if (train <= 0.0 || val <= 0.0 || test <= 0.0) {
        throw Error(ErrorCode::InvalidArgument, "split ratios must be positive");
    }
    if (std::abs(train + val + test - 1.0) > 1e-9) {
        throw Error(ErrorCode::InvalidArgument, "split ratios must sum to 1");
    }
}

double SplitRatios::of(Split split) const
{
    switch (split) {
    case Split::Train: return train;
    case Split::Val: return val;
    case Split::Test: return test;
    }
    return 0.0;
}

Split SplitAssignment::at(std::uint32_t segment_id) const
{
    const auto it = by_segment.find(segment_id);
    if (it == by_segment.end()) {
        throw Error(ErrorCode::InvalidArgument, "segment " + std::to_string(segment_id) + " has no split");
    }
    return it->second;
}

std::size_t SplitAssignment::count(Split split) const
{
    return static_cast<std::size_t>(
        std::count_if(by_segment.begin(), by_segment.end(), [split](const auto& kv) { return kv.second == split; }));
}

SplitAssignment split_dataset(const EmbeddingStore& store, const SplitRatios& ratios, std::uint64_t seed,
                              SplitMode mode)
{
    ratios.validate();

    std::map<std::uint16_t, std::vector<std::uint32_t>> by_caller;
    for (const auto& record : store.records) {
        by_caller[record.caller_id].push_back(record.segment_id);
    }

    SplitAssignment assignment;
    double val_target = 0.0;
    double test_target = 0.0;
    std::int64_t val_given = 0;
    std::int64_t test_given = 0;
    for (auto& [caller, segments] : by_caller) {
        const auto n = static_cast<std::int64_t>(segments.size());
        if (n < 3) {
            throw Error(ErrorCode::InsufficientData,
                        "caller " + std::to_string(caller) + " has " + std::to_string(n) + " segments, need 3");
        }
        if (mode == SplitMode::Shuffled) {
            Rng rng(derive_seed(seed, caller));
            rng.shuffle(std::span(segments));
        }
        val_target += static_cast<double>(n) * ratios.val;
        test_target += static_cast<double>(n) * ratios.test;
        // The epsilon absorbs representation error such as 10 * 0.7 = 7.000000000000001.
        const auto n_val = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(val_target + 1e-9)) - val_given);
        const auto n_test =
            std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(test_target + 1e-9)) - test_given);
        val_given += n_val;
        test_given += n_test;
        const std::int64_t n_train = n - n_val - n_test;

        for (std::int64_t i = 0; i < n; ++i) {
            const Split split = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
            assignment.by_segment.emplace(segments[static_cast<std::size_t>(i)], split);
        }
    }
    return assignment;
}

LengthStats length_stats(std::span<const double> lengths_ms)
{
    LengthStats stats;
    stats.count = lengths_ms.size();
    if (lengths_ms.empty()) {
        return stats;
    }
    std::vector<double> sorted(lengths_ms.begin(), lengths_ms.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    stats.mean_ms = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : sorted) {
        ss += (v - stats.mean_ms) * (v - stats.mean_ms);
    }
    stats.std_ms = sorted.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const std::size_t mid = sorted.size() / 2;
    stats.median_ms = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    stats.min_ms = sorted.front();
    stats.max_ms = sorted.back();
    return stats;
}

std::vector<HistogramBin> log_length_histogram(std::span<const double> lengths_ms, std::size_t bins)
{
    if (lengths_ms.empty() || bins == 0) {
        return {};
    }
    std::vector<double> logs;
    logs.reserve(lengths_ms.size());
    for (double v : lengths_ms) {
        logs.push_back(std::log10(std::max(v, 1.0)));
    }
    const auto [lo_it, hi_it] = std::minmax_element(logs.begin(), logs.end());
    const double lo = *lo_it;
    const double hi = *hi_it > lo ? *hi_it : lo + 1.0;
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<HistogramBin> histogram(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        histogram[b].lower = std::pow(10.0, lo + width * static_cast<double>(b));
        histogram[b].upper = std::pow(10.0, lo + width * static_cast<double>(b + 1));
    }
    for (double v : logs) {
        auto b = static_cast<std::size_t>((v - lo) / width);
        histogram[std::min(b, bins - 1)].count++;
    }
    return histogram;
}

StoreSummary store_summary(const EmbeddingStore& store, std::size_t histogram_bins)
{
    StoreSummary summary;
    summary.total_records = store.records.size();
    std::vector<double> lengths;
    std::map<std::uint16_t, std::vector<double>> caller_lengths;
    for (const auto& record : store.records) {
        summary.total_frames += record.num_frames;
        summary.per_caller[record.caller_id]++;
        summary.per_calltype[record.calltype_id]++;
        summary.per_caller_calltype[{record.caller_id, record.calltype_id}]++;
        lengths.push_back(static_cast<double>(record.duration_ms()));
        caller_lengths[record.caller_id].push_back(static_cast<double>(record.duration_ms()));
    }
    summary.lengths = length_stats(lengths);
    for (const auto& [caller, values] : caller_lengths) {
        summary.per_caller_lengths[caller] = length_stats(values);
    }
    summary.length_histogram = log_length_histogram(lengths, histogram_bins);
    return summary;
}

} // namespace callerspace
