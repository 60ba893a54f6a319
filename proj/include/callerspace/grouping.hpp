#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "callerspace/store.hpp"

namespace callerspace {

enum class UnitKind { Frame, SegmentMean };
std::string_view to_string(UnitKind kind);
UnitKind parse_unit_kind(std::string_view text);

/// Non-owning view of one embedding unit.
struct EmbeddingUnit {
    std::span<const float> values;
    std::uint32_t segment_id = 0;
    UnitKind kind = UnitKind::Frame;
};

/// Owning variant returned by pool_segment.
struct PooledUnit {
    std::vector<float> values;
    std::uint32_t segment_id = 0;
    UnitKind kind = UnitKind::SegmentMean;
};

/// Mean of a record's frames (accumulated in double).
PooledUnit pool_segment(const EmbeddingRecord& record);

/// All units of one caller inside one split, in chronological order.
struct UnitSequence {
    std::uint16_t caller_id = 0;
    Split split = Split::Train;
    UnitKind kind = UnitKind::Frame;
    std::size_t dim = 0;
    /// size() x dim, row-major.
    std::vector<float> values;
    std::vector<std::uint32_t> segment_ids;
    /// Unit index at which each new segment starts, plus size() at the end.
    std::vector<std::size_t> segment_edges;

    std::size_t size() const { return segment_ids.size(); }
    EmbeddingUnit unit(std::size_t index) const
    {
        return {std::span<const float>(values).subspan(index * dim, dim), segment_ids[index], kind};
    }
};

/// Builds per-caller unit sequences of a split; callers in ascending order.
std::vector<std::shared_ptr<const UnitSequence>> build_unit_sequences(const EmbeddingStore& store,
                                                                      const SplitAssignment& assignment, Split split,
                                                                      UnitKind kind);

/// A contiguous block [unit_begin, unit_end) of one caller's unit sequence.
class CallerGroup {
public:
    CallerGroup(std::shared_ptr<const UnitSequence> sequence, std::uint32_t group_index, std::size_t unit_begin,
                std::size_t unit_end);

    std::uint16_t caller_id() const { return sequence_->caller_id; }
    Split split() const { return sequence_->split; }
    std::uint32_t group_index() const { return group_index_; }
    std::size_t unit_begin() const { return unit_begin_; }
    std::size_t unit_end() const { return unit_end_; }
    std::size_t size() const { return unit_end_ - unit_begin_; }
    std::size_t dim() const { return sequence_->dim; }
    EmbeddingUnit unit(std::size_t i) const { return sequence_->unit(unit_begin_ + i); }
    /// Row-major size() x dim() block of unit values.
    std::span<const float> values() const
    {
        return std::span<const float>(sequence_->values).subspan(unit_begin_ * dim(), size() * dim());
    }

private:
    std::shared_ptr<const UnitSequence> sequence_;
    std::uint32_t group_index_;
    std::size_t unit_begin_;
    std::size_t unit_end_;
};

struct GroupingOptions {
    UnitKind unit_kind = UnitKind::Frame;
    /// Frame mode only: move group boundaries onto segment edges.
    bool respect_segments = false;
    /// Smallest admissible group; 2 keeps the unbiased variance defined.
    std::size_t min_units_per_group = 2;
};

/// Group sizes for n units in `groups` blocks, larger blocks first.
std::vector<std::size_t> partition_sizes(std::size_t n, std::size_t groups);

/// floor(train_groups * ratio_other / ratio_train), at least 1.
std::size_t scaled_group_count(std::size_t train_groups, double ratio_train, double ratio_other);

std::vector<CallerGroup> build_caller_groups(const EmbeddingStore& store, const SplitAssignment& assignment,
                                             Split split, std::size_t groups_per_caller,
                                             const GroupingOptions& options = {});

/// Groups of one caller's sequence; exposed for tests and for callers that
/// already hold sequences.
std::vector<CallerGroup> group_sequence(const std::shared_ptr<const UnitSequence>& sequence,
                                        std::size_t groups_per_caller, const GroupingOptions& options);

/// Train groups with the given count; Val and Test scaled by the ratios.
std::vector<CallerGroup> build_all_caller_groups(const EmbeddingStore& store, const SplitAssignment& assignment,
                                                 const SplitRatios& ratios, std::size_t train_groups,
                                                 const GroupingOptions& options = {});

/// Serializable position of a group inside its caller's unit sequence.
struct GroupRange {
    std::uint16_t caller_id = 0;
    Split split = Split::Train;
    std::uint32_t group_index = 0;
    std::size_t unit_begin = 0;
    std::size_t unit_end = 0;

    bool operator==(const GroupRange&) const = default;
};

std::vector<GroupRange> group_ranges(std::span<const CallerGroup> groups);

/// Rebuilds groups from stored ranges; validates every range against the
/// regenerated unit sequences.
std::vector<CallerGroup> materialize_groups(const EmbeddingStore& store, const SplitAssignment& assignment,
                                            UnitKind kind, std::span<const GroupRange> ranges);

} // namespace callerspace
