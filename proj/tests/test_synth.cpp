#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "callerspace/parallel.hpp"
#include "callerspace/synth.hpp"
#include "test_util.hpp"

using namespace callerspace;

namespace {

SynthSpec small_spec()
{
    SynthSpec spec;
    spec.num_callers = 4;
    spec.embed_dim = 5;
    spec.max_segments = 200;
    spec.seed = 17;
    return spec;
}

} // namespace

TEST_CASE("generation is deterministic per seed and thread count")
{
    const auto spec = small_spec();
    set_thread_count(1);
    const auto a = generate_store(spec);
    set_thread_count(4);
    const auto b = generate_store(spec);
    set_thread_count(0);
    CHECK(a == b);
    auto other = spec;
    other.seed = 18;
    CHECK_FALSE(generate_store(other) == a);
}

TEST_CASE("generated stores satisfy store invariants and round trip")
{
    testutil::TempDir dir("synth");
    for (bool nonlinear : {false, true}) {
        auto spec = small_spec();
        spec.nonlinear = nonlinear;
        const auto s = generate_store(spec);
        CHECK_NOTHROW(s.validate());
        write_store(s, dir / "s.store");
        CHECK(read_store(dir / "s.store") == s);
        CHECK(s.callers() == std::vector<std::uint16_t>{1, 2, 3, 4});
    }
}

TEST_CASE("default segment counts ramp down by the imbalance factor")
{
    SynthSpec spec;
    const auto counts = spec.resolved_segments();
    REQUIRE(counts.size() == 10);
    CHECK(counts.front() == 1000);
    CHECK(counts.back() == 100);
    CHECK(std::is_sorted(counts.rbegin(), counts.rend()));
    spec.segments_per_caller = {5, 6};
    spec.num_callers = 2;
    CHECK(spec.resolved_segments() == std::vector<std::uint32_t>{5, 6});
}

TEST_CASE("spec validation")
{
    auto spec = small_spec();
    spec.separation = -1.0;
    CHECK_THROWS_AS(generate_store(spec), Error);
    spec = small_spec();
    spec.embed_dim = 0;
    CHECK_THROWS_AS(generate_store(spec), Error);
    spec = small_spec();
    spec.segments_per_caller = {1, 2};
    CHECK_THROWS_AS(generate_store(spec), Error);
}

TEST_CASE("per-caller frame means match the configured means")
{
    auto spec = small_spec();
    spec.separation = 3.0;
    spec.within_std = 1.5;
    const auto s = generate_store(spec);
    for (std::uint16_t c = 0; c < spec.num_callers; ++c) {
        const auto mu = synth_caller_mean(spec, c, 0.0);
        std::vector<double> sum(spec.embed_dim, 0.0);
        std::size_t n = 0;
        for (const auto& r : s.records) {
            if (r.caller_id != c + 1) continue;
            for (std::size_t f = 0; f < r.num_frames; ++f) {
                for (std::size_t j = 0; j < spec.embed_dim; ++j) sum[j] += r.frame(f)[j];
            }
            n += r.num_frames;
        }
        for (std::size_t j = 0; j < spec.embed_dim; ++j) {
            CHECK(std::abs(sum[j] / static_cast<double>(n) - mu[j]) < 5.0 * spec.within_std / std::sqrt(static_cast<double>(n)));
        }
    }
    // Distinct callers sit separation * sigma apart.
    const auto m0 = synth_caller_mean(spec, 0, 0.0);
    const auto m1 = synth_caller_mean(spec, 1, 0.0);
    double d2 = 0;
    for (std::size_t j = 0; j < m0.size(); ++j) d2 += (m0[j] - m1[j]) * (m0[j] - m1[j]);
    CHECK(std::sqrt(d2) == doctest::Approx(spec.separation * spec.within_std));
}

TEST_CASE("nonlinear callers live on concentric shells")
{
    auto spec = small_spec();
    spec.nonlinear = true;
    spec.separation = 1.0;
    for (std::uint16_t c = 0; c < spec.num_callers; ++c) {
        for (double t : {0.0, 0.3, 0.77}) {
            const auto mu = synth_caller_mean(spec, c, t);
            double r2 = 0;
            for (double v : mu) r2 += v * v;
            CHECK(std::sqrt(r2) == doctest::Approx(c + 1.0));
        }
        // Closed path.
        const auto a = synth_caller_mean(spec, c, 0.0);
        const auto b = synth_caller_mean(spec, c, 1.0);
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == doctest::Approx(b[j]));
    }
}

TEST_CASE("segment lengths are bimodal")
{
    SynthSpec spec;
    spec.num_callers = 3;
    spec.embed_dim = 1;
    spec.max_segments = 2000;
    spec.imbalance = 1.0;
    spec.seed = 5;
    const auto s = generate_store(spec);
    // Histogram of log10 duration in 0.1 decade bins from 1 to 4.
    std::vector<int> bins(30, 0);
    for (const auto& r : s.records) {
        const double l = std::log10(static_cast<double>(r.duration_ms()));
        bins[std::clamp(static_cast<int>((l - 1.0) * 10.0), 0, 29)]++;
    }
    std::vector<int> smooth(30, 0);
    for (int i = 0; i < 30; ++i) {
        for (int k = std::max(0, i - 1); k <= std::min(29, i + 1); ++k) smooth[i] += bins[k];
    }
    int modes = 0;
    const int peak = *std::max_element(smooth.begin(), smooth.end());
    for (int i = 1; i < 29; ++i) {
        if (smooth[i] > smooth[i - 1] && smooth[i] >= smooth[i + 1] && smooth[i] > peak / 5) modes++;
    }
    CHECK(modes == 2);
    // Modes near 80 ms and 600 ms.
    CHECK(smooth[9] > smooth[14]);
    CHECK(smooth[17] > smooth[14]);
}

TEST_CASE("segments are chronological within source files")
{
    const auto s = generate_store(small_spec());
    for (std::size_t i = 1; i < s.records.size(); ++i) {
        const auto& a = s.records[i - 1];
        const auto& b = s.records[i];
        if (a.source_file == b.source_file) CHECK(b.start_ms >= a.end_ms + 200);
        CHECK(b.segment_id == a.segment_id + 1);
    }
    CHECK(s.records.front().source_file == "c001_f0000.wav");
}
