#include "callerspace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "callerspace/error.hpp"
#include "callerspace/parallel.hpp"
#include "callerspace/rng.hpp"

namespace callerspace {

namespace {

constexpr std::uint32_t kFileLengthMs = 600'000;
constexpr int kPathHarmonics = 6;
constexpr std::uint64_t kPathStream = 0xC0FFEE;
constexpr std::uint64_t kMeanStream = 0xBEEF;

std::string file_name(std::uint16_t caller, std::uint32_t file)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "c%03u_f%04u.wav", static_cast<unsigned>(caller), static_cast<unsigned>(file));
    return buf;
}

/// Closed smooth path on the unit sphere shared by all callers.
struct SpherePath {
    std::vector<std::vector<double>> cos_terms;
    std::vector<std::vector<double>> sin_terms;

    SpherePath(std::uint32_t dim, std::uint64_t seed)
    {
        Rng rng(derive_seed(seed, kPathStream));
        for (int k = 0; k < kPathHarmonics; ++k) {
            auto& a = cos_terms.emplace_back(dim);
            auto& b = sin_terms.emplace_back(dim);
            for (auto& v : a) v = rng.normal();
            for (auto& v : b) v = rng.normal();
        }
    }

    std::vector<double> at(double t) const
    {
        std::vector<double> u(cos_terms.front().size(), 0.0);
        for (int k = 0; k < kPathHarmonics; ++k) {
            const double angle = 2.0 * std::numbers::pi * (k + 1) * t;
            const double c = std::cos(angle);
            const double s = std::sin(angle);
            for (std::size_t j = 0; j < u.size(); ++j) {
                u[j] += c * cos_terms[k][j] + s * sin_terms[k][j];
            }
        }
        double norm = 0.0;
        for (double v : u) norm += v * v;
        norm = std::sqrt(norm);
        for (double& v : u) v /= norm;
        return u;
    }
};

std::vector<double> fixed_mean(const SynthSpec& spec, std::uint16_t caller)
{
    std::vector<double> mu(spec.embed_dim, 0.0);
    const double half = spec.separation * spec.within_std / std::numbers::sqrt2;
    if (spec.num_callers <= spec.embed_dim) {
        mu[caller] = half;
        return mu;
    }
    Rng rng(derive_seed(derive_seed(spec.seed, kMeanStream), caller));
    double norm = 0.0;
    for (double& v : mu) {
        v = rng.normal();
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : mu) v *= half / norm;
    return mu;
}

} // namespace

void SynthSpec::validate() const
{
    if (num_callers == 0 || embed_dim == 0) {
        throw Error(ErrorCode::InvalidArgument, "synth needs at least one caller and one dimension");
    }
    // File names are zero-padded so store order stays lexicographic.
    if (num_callers > 999) {
        throw Error(ErrorCode::InvalidArgument, "synth supports at most 999 callers");
    }
    if (!(separation >= 0.0) || !(within_std > 0.0) || !(frame_ms > 0.0) || !(imbalance >= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "synth separation must be >= 0, within_std, frame_ms > 0, imbalance >= 1");
    }
    if (!segments_per_caller.empty() && segments_per_caller.size() != num_callers) {
        throw Error(ErrorCode::InvalidArgument, "segments_per_caller must list every caller");
    }
    if (segments_per_caller.empty() && max_segments == 0) {
        throw Error(ErrorCode::InvalidArgument, "max_segments must be positive");
    }
    for (auto n : segments_per_caller) {
        if (n == 0) throw Error(ErrorCode::InvalidArgument, "segment counts must be positive");
    }
    const auto& m = lengths;
    if (!(m.weight_short >= 0.0 && m.weight_short <= 1.0) || !(m.median_short_ms > 0.0) || !(m.median_long_ms > 0.0) ||
        !(m.sigma_short >= 0.0) || !(m.sigma_long >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "invalid length mixture");
    }
}

std::vector<std::uint32_t> SynthSpec::resolved_segments() const
{
    if (!segments_per_caller.empty()) return segments_per_caller;
    std::vector<std::uint32_t> counts(num_callers);
    for (std::uint16_t c = 0; c < num_callers; ++c) {
        const double frac = num_callers > 1 ? static_cast<double>(c) / (num_callers - 1) : 0.0;
        const double n = static_cast<double>(max_segments) * std::pow(imbalance, -frac);
        counts[c] = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(n)));
    }
    return counts;
}

std::vector<double> synth_caller_mean(const SynthSpec& spec, std::uint16_t caller, double t)
{
    if (!spec.nonlinear) return fixed_mean(spec, caller);
    const SpherePath path(spec.embed_dim, spec.seed);
    auto u = path.at(t + static_cast<double>(caller) / spec.num_callers);
    const double radius = spec.separation * spec.within_std * (caller + 1);
    for (double& v : u) v *= radius;
    return u;
}

EmbeddingStore generate_store(const SynthSpec& spec)
{
    spec.validate();
    const auto counts = spec.resolved_segments();
    const SpherePath path(spec.embed_dim, spec.seed);
    const std::size_t dim = spec.embed_dim;

    std::vector<std::vector<EmbeddingRecord>> per_caller(spec.num_callers);
    parallel_for(spec.num_callers, [&](std::size_t ci) {
        const auto caller = static_cast<std::uint16_t>(ci);
        Rng rng(derive_seed(spec.seed, ci));
        const std::vector<double> fixed = spec.nonlinear ? std::vector<double>{} : fixed_mean(spec, caller);
        const double radius = spec.separation * spec.within_std * (ci + 1);
        auto& records = per_caller[ci];
        records.reserve(counts[ci]);
        std::uint32_t file = 0;
        std::uint32_t clock = 0;
        for (std::uint32_t s = 0; s < counts[ci]; ++s) {
            const bool is_short = rng.uniform() < spec.lengths.weight_short;
            const double median = is_short ? spec.lengths.median_short_ms : spec.lengths.median_long_ms;
            const double sigma = is_short ? spec.lengths.sigma_short : spec.lengths.sigma_long;
            const double duration = median * std::exp(sigma * rng.normal());
            const auto duration_ms = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(duration)));
            const auto gap = static_cast<std::uint32_t>(200 + rng.below(1800));
            if (clock + gap + duration_ms > kFileLengthMs) {
                ++file;
                clock = 0;
            }
            EmbeddingRecord rec;
            rec.caller_id = static_cast<std::uint16_t>(caller + 1);
            rec.calltype_id = static_cast<std::uint16_t>(is_short ? rng.below(5) : 5 + rng.below(6));
            rec.source_file = file_name(rec.caller_id, file);
            rec.start_ms = clock + gap;
            rec.end_ms = rec.start_ms + duration_ms;
            clock = rec.end_ms;
            rec.num_frames = std::max<std::uint32_t>(
                1, static_cast<std::uint32_t>(std::floor(static_cast<double>(duration_ms) / spec.frame_ms)));

            std::vector<double> mean;
            if (spec.nonlinear) {
                mean = path.at(static_cast<double>(s) / counts[ci] + static_cast<double>(ci) / spec.num_callers);
                for (double& v : mean) v *= radius;
            }
            const auto& mu = spec.nonlinear ? mean : fixed;
            rec.frames.resize(static_cast<std::size_t>(rec.num_frames) * dim);
            for (std::size_t f = 0; f < rec.num_frames; ++f) {
                for (std::size_t j = 0; j < dim; ++j) {
                    rec.frames[f * dim + j] = static_cast<float>(mu[j] + spec.within_std * rng.normal());
                }
            }
            records.push_back(std::move(rec));
        }
    });

    EmbeddingStore store;
    store.meta.model_name = spec.model_name;
    store.meta.embed_dim = spec.embed_dim;
    store.meta.pretext_objective = PretextObjective::MaskedPrediction;
    std::uint32_t next_id = 0;
    for (auto& records : per_caller) {
        for (auto& rec : records) {
            rec.segment_id = next_id++;
            store.records.push_back(std::move(rec));
        }
    }
    store.validate();
    return store;
}

} // namespace callerspace
