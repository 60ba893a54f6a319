#pragma once

#include <cstdint>
#include <vector>

#include "callerspace/store.hpp"

namespace callerspace {

/// Two-component log-normal mixture over segment durations.
struct LengthMixture {
    double weight_short = 0.55;
    double median_short_ms = 80.0;
    double sigma_short = 0.3;
    double median_long_ms = 600.0;
    double sigma_long = 0.35;
};

struct SynthSpec {
    std::uint16_t num_callers = 10;
    std::uint32_t embed_dim = 32;
    /// Segments per caller; empty means a geometric ramp from
    /// max_segments down to max_segments / imbalance.
    std::vector<std::uint32_t> segments_per_caller;
    std::uint32_t max_segments = 1000;
    double imbalance = 10.0;
    LengthMixture lengths;
    double frame_ms = 20.0;
    /// Distance between caller means (or shell spacing) in units of within_std.
    double separation = 3.0;
    double within_std = 1.0;
    bool nonlinear = false;
    std::uint64_t seed = 0;
    std::string model_name = "synthetic";

    void validate() const;
    std::vector<std::uint32_t> resolved_segments() const;
};

/// Mean vector of the caller with zero-based index c (caller id c + 1) at timeline
/// position t in [0, 1). Constant in t unless the spec is nonlinear.
std::vector<double> synth_caller_mean(const SynthSpec& spec, std::uint16_t caller, double t);

EmbeddingStore generate_store(const SynthSpec& spec);

} // namespace callerspace
