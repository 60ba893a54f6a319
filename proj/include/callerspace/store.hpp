#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace callerspace {

enum class PretextObjective : std::uint8_t {
    AutoregressiveReconstruction = 0,
    MaskedReconstruction = 1,
    Contrastive = 2,
    MaskedPrediction = 3,
};

std::string_view to_string(PretextObjective objective);
PretextObjective parse_objective(std::string_view text);

/// Metadata of the upstream embedding model. corpus_tag is registry-only
/// information and is not persisted in the store file.
struct ModelMeta {
    std::string model_name;
    std::string corpus_tag;
    float param_count_millions = 1.0F;
    std::uint32_t embed_dim = 1;
    PretextObjective pretext_objective = PretextObjective::MaskedPrediction;

    void validate() const;
    bool operator==(const ModelMeta&) const = default;
};

/// The pre-trained speech models whose embeddings the study compares.
const std::vector<ModelMeta>& known_models();
std::optional<ModelMeta> find_known_model(std::string_view name);

/// One vocalization segment: frame embeddings plus annotation metadata.
struct EmbeddingRecord {
    std::uint32_t segment_id = 0;
    std::uint16_t caller_id = 0;
    std::uint16_t calltype_id = 0;
    std::string source_file;
    std::uint32_t start_ms = 0;
    std::uint32_t end_ms = 0;
    std::uint32_t num_frames = 0;
    /// num_frames x embed_dim, row-major.
    std::vector<float> frames;

    std::uint32_t duration_ms() const { return end_ms - start_ms; }
    std::size_t embed_dim() const { return num_frames == 0 ? 0 : frames.size() / num_frames; }
    std::span<const float> frame(std::size_t index) const
    {
        const std::size_t dim = embed_dim();
        return std::span<const float>(frames).subspan(index * dim, dim);
    }

    bool operator==(const EmbeddingRecord&) const = default;
};

struct EmbeddingStore {
    ModelMeta meta;
    std::vector<EmbeddingRecord> records;

    /// Checks every store invariant; throws Error on the first violation.
    void validate() const;
    /// Distinct caller ids in ascending order.
    std::vector<std::uint16_t> callers() const;

    bool operator==(const EmbeddingStore&) const = default;
};

inline constexpr std::array<char, 4> kStoreMagic = {'C', 'S', 'E', '1'};
inline constexpr std::uint16_t kStoreVersion = 1;

void write_store(const ModelMeta& meta, std::span<const EmbeddingRecord> records, const std::filesystem::path& path);
void write_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore read_store(const std::filesystem::path& path);

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };
std::string_view to_string(Split split);
Split parse_split(std::string_view text);

enum class SplitMode { Sequential, Shuffled };
std::string_view to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view text);

struct SplitRatios {
    double train = 0.7;
    double val = 0.2;
    double test = 0.1;

    void validate() const;
    double of(Split split) const;
};

/// segment_id -> split.
struct SplitAssignment {
    std::map<std::uint32_t, Split> by_segment;

    Split at(std::uint32_t segment_id) const;
    std::size_t count(Split split) const;
    bool operator==(const SplitAssignment&) const = default;
};

/// Allocates each caller's segments to Train/Val/Test. Counts follow the
/// ratios with running floors carried across callers (ascending caller id),
/// so totals over the whole store are floor(N*val) and floor(N*test) and
/// remainders land in Train. Val and Test receive at least one segment per
/// caller. Sequential mode keeps store (chronological) order; shuffled mode
/// permutes each caller's segments with the seed first.
SplitAssignment split_dataset(const EmbeddingStore& store, const SplitRatios& ratios, std::uint64_t seed,
                              SplitMode mode = SplitMode::Sequential);

struct LengthStats {
    std::size_t count = 0;
    double mean_ms = 0.0;
    double std_ms = 0.0;
    double median_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;
};

LengthStats length_stats(std::span<const double> lengths_ms);

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
};

/// Histogram of segment lengths over log10(ms), equal-width bins.
std::vector<HistogramBin> log_length_histogram(std::span<const double> lengths_ms, std::size_t bins);

struct StoreSummary {
    std::size_t total_records = 0;
    std::size_t total_frames = 0;
    std::map<std::uint16_t, std::size_t> per_caller;
    std::map<std::uint16_t, std::size_t> per_calltype;
    std::map<std::pair<std::uint16_t, std::uint16_t>, std::size_t> per_caller_calltype;
    LengthStats lengths;
    std::map<std::uint16_t, LengthStats> per_caller_lengths;
    std::vector<HistogramBin> length_histogram;
};

StoreSummary store_summary(const EmbeddingStore& store, std::size_t histogram_bins = 30);

} // namespace callerspace
