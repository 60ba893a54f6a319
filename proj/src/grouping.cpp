#include "callerspace/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "callerspace/error.hpp"

namespace callerspace {

std::string_view to_string(UnitKind kind)
{
    return kind == UnitKind::Frame ? "frame" : "segment-mean";
}

UnitKind parse_unit_kind(std::string_view text)
{
    if (text == "frame") return UnitKind::Frame;
    if (text == "segment-mean" || text == "segment_mean") return UnitKind::SegmentMean;
    throw Error(ErrorCode::InvalidArgument, "unknown unit kind '" + std::string(text) + "'");
}

PooledUnit pool_segment(const EmbeddingRecord& record)
{
    if (record.num_frames == 0) {
        throw Error(ErrorCode::DimensionOrEmpty, "segment " + std::to_string(record.segment_id) + " has no frames");
    }
    const std::size_t dim = record.embed_dim();
    std::vector<double> sum(dim, 0.0);
    for (std::size_t f = 0; f < record.num_frames; ++f) {
        const auto frame = record.frame(f);
        for (std::size_t j = 0; j < dim; ++j) {
            sum[j] += frame[j];
        }
    }
    PooledUnit unit;
    unit.segment_id = record.segment_id;
    unit.values.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        unit.values[j] = static_cast<float>(sum[j] / static_cast<double>(record.num_frames));
    }
    return unit;
}

std::vector<std::shared_ptr<const UnitSequence>> build_unit_sequences(const EmbeddingStore& store,
                                                                      const SplitAssignment& assignment, Split split,
                                                                      UnitKind kind)
{
    std::map<std::uint16_t, std::shared_ptr<UnitSequence>> sequences;
    for (const auto& record : store.records) {
        if (assignment.at(record.segment_id) != split) {
            continue;
        }
        auto& seq = sequences[record.caller_id];
        if (!seq) {
            seq = std::make_shared<UnitSequence>();
            seq->caller_id = record.caller_id;
            seq->split = split;
            seq->kind = kind;
            seq->dim = store.meta.embed_dim;
        }
        seq->segment_edges.push_back(seq->size());
        if (kind == UnitKind::Frame) {
            seq->values.insert(seq->values.end(), record.frames.begin(), record.frames.end());
            seq->segment_ids.insert(seq->segment_ids.end(), record.num_frames, record.segment_id);
        } else {
            const auto pooled = pool_segment(record);
            seq->values.insert(seq->values.end(), pooled.values.begin(), pooled.values.end());
            seq->segment_ids.push_back(record.segment_id);
        }
    }
    std::vector<std::shared_ptr<const UnitSequence>> out;
    for (auto& [caller, seq] : sequences) {
        seq->segment_edges.push_back(seq->size());
        out.push_back(std::move(seq));
    }
    return out;
}

CallerGroup::CallerGroup(std::shared_ptr<const UnitSequence> sequence, std::uint32_t group_index,
                         std::size_t unit_begin, std::size_t unit_end)
    : sequence_(std::move(sequence)), group_index_(group_index), unit_begin_(unit_begin), unit_end_(unit_end)
{
    if (!sequence_ || unit_begin_ >= unit_end_ || unit_end_ > sequence_->size()) {
        throw Error(ErrorCode::InvalidArgument, "caller group range out of bounds");
    }
}

std::vector<std::size_t> partition_sizes(std::size_t n, std::size_t groups)
{
    if (groups == 0) {
        throw Error(ErrorCode::InvalidArgument, "number of groups must be positive");
    }
    std::vector<std::size_t> sizes(groups, n / groups);
    for (std::size_t g = 0; g < n % groups; ++g) {
        ++sizes[g];
    }
    return sizes;
}

std::size_t scaled_group_count(std::size_t train_groups, double ratio_train, double ratio_other)
{
    if (!(ratio_train > 0.0) || !(ratio_other > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "ratios must be positive");
    }
    const double scaled = static_cast<double>(train_groups) * ratio_other / ratio_train;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(scaled + 1e-9)));
}

namespace {

std::vector<std::size_t> snapped_boundaries(const UnitSequence& seq, std::span<const std::size_t> sizes)
{
    // Interior segment edges are the only legal cut points.
    const std::vector<std::size_t> edges(seq.segment_edges.begin() + 1, seq.segment_edges.end() - 1);
    const std::size_t cuts = sizes.size() - 1;
    if (edges.size() < cuts) {
        throw Error(ErrorCode::InsufficientUnits, "caller " + std::to_string(seq.caller_id) + " has " +
                                                      std::to_string(edges.size() + 1) + " segments for " +
                                                      std::to_string(sizes.size()) + " groups");
    }
    std::vector<std::size_t> bounds{0};
    std::size_t ideal = 0;
    std::size_t lo = 0;
    for (std::size_t c = 0; c < cuts; ++c) {
        ideal += sizes[c];
        const std::size_t hi = edges.size() - (cuts - c);
        auto it = std::lower_bound(edges.begin() + static_cast<std::ptrdiff_t>(lo),
                                   edges.begin() + static_cast<std::ptrdiff_t>(hi) + 1, ideal);
        std::size_t pick = static_cast<std::size_t>(it - edges.begin());
        if (pick > hi) {
            pick = hi;
        } else if (pick > lo && ideal - edges[pick - 1] <= edges[pick] - ideal) {
            --pick;
        }
        bounds.push_back(edges[pick]);
        lo = pick + 1;
    }
    bounds.push_back(seq.size());
    return bounds;
}

} // namespace

std::vector<CallerGroup> group_sequence(const std::shared_ptr<const UnitSequence>& sequence,
                                        std::size_t groups_per_caller, const GroupingOptions& options)
{
    const UnitSequence& seq = *sequence;
    const std::size_t n = seq.size();
    if (groups_per_caller == 0) {
        throw Error(ErrorCode::InvalidArgument, "groups per caller must be positive");
    }
    if (n < groups_per_caller) {
        throw Error(ErrorCode::InsufficientUnits, "caller " + std::to_string(seq.caller_id) + " has " +
                                                      std::to_string(n) + " units in " +
                                                      std::string(to_string(seq.split)) + ", need " +
                                                      std::to_string(groups_per_caller));
    }
    const auto sizes = partition_sizes(n, groups_per_caller);
    std::vector<std::size_t> bounds;
    if (options.respect_segments && seq.kind == UnitKind::Frame) {
        bounds = snapped_boundaries(seq, sizes);
    } else {
        bounds.push_back(0);
        for (std::size_t s : sizes) {
            bounds.push_back(bounds.back() + s);
        }
    }

    std::vector<CallerGroup> groups;
    groups.reserve(groups_per_caller);
    for (std::size_t g = 0; g < groups_per_caller; ++g) {
        if (bounds[g + 1] - bounds[g] < options.min_units_per_group) {
            throw Error(ErrorCode::InsufficientUnits, "caller " + std::to_string(seq.caller_id) + " group " +
                                                          std::to_string(g) + " in " +
                                                          std::string(to_string(seq.split)) + " would have " +
                                                          std::to_string(bounds[g + 1] - bounds[g]) + " units");
        }
        groups.emplace_back(sequence, static_cast<std::uint32_t>(g), bounds[g], bounds[g + 1]);
    }
    return groups;
}

std::vector<CallerGroup> build_caller_groups(const EmbeddingStore& store, const SplitAssignment& assignment,
                                             Split split, std::size_t groups_per_caller,
                                             const GroupingOptions& options)
{
    const auto sequences = build_unit_sequences(store, assignment, split, options.unit_kind);
    // A caller absent from this split cannot fill its groups.
    for (auto caller : store.callers()) {
        const bool present = std::any_of(sequences.begin(), sequences.end(),
                                          [caller](const auto& s) { return s->caller_id == caller; });
        if (!present) {
            throw Error(ErrorCode::InsufficientUnits, "caller " + std::to_string(caller) + " has no units in " +
                                                          std::string(to_string(split)));
        }
    }
    std::vector<CallerGroup> groups;
    for (const auto& seq : sequences) {
        auto caller_groups = group_sequence(seq, groups_per_caller, options);
        groups.insert(groups.end(), caller_groups.begin(), caller_groups.end());
    }
    return groups;
}

std::vector<CallerGroup> build_all_caller_groups(const EmbeddingStore& store, const SplitAssignment& assignment,
                                                 const SplitRatios& ratios, std::size_t train_groups,
                                                 const GroupingOptions& options)
{
    std::vector<CallerGroup> all;
    for (Split split : {Split::Train, Split::Val, Split::Test}) {
        const std::size_t count =
            split == Split::Train ? train_groups : scaled_group_count(train_groups, ratios.train, ratios.of(split));
        auto groups = build_caller_groups(store, assignment, split, count, options);
        all.insert(all.end(), groups.begin(), groups.end());
    }
    return all;
}

std::vector<GroupRange> group_ranges(std::span<const CallerGroup> groups)
{
    std::vector<GroupRange> ranges;
    ranges.reserve(groups.size());
    for (const auto& g : groups) {
        ranges.push_back({g.caller_id(), g.split(), g.group_index(), g.unit_begin(), g.unit_end()});
    }
    return ranges;
}

std::vector<CallerGroup> materialize_groups(const EmbeddingStore& store, const SplitAssignment& assignment,
                                            UnitKind kind, std::span<const GroupRange> ranges)
{
    std::map<std::pair<Split, std::uint16_t>, std::shared_ptr<const UnitSequence>> lookup;
    for (Split split : {Split::Train, Split::Val, Split::Test}) {
        for (auto& seq : build_unit_sequences(store, assignment, split, kind)) {
            lookup[{split, seq->caller_id}] = seq;
        }
    }
    std::vector<CallerGroup> groups;
    groups.reserve(ranges.size());
    for (const auto& r : ranges) {
        const auto it = lookup.find({r.split, r.caller_id});
        if (it == lookup.end()) {
            throw Error(ErrorCode::InvalidArgument, "group refers to caller " + std::to_string(r.caller_id) +
                                                        " with no units in " + std::string(to_string(r.split)));
        }
        groups.emplace_back(it->second, r.group_index, r.unit_begin, r.unit_end);
    }
    return groups;
}

} // namespace callerspace
