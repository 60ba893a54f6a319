#include <doctest.h>

#include <cmath>

#include "callerspace/gaussian.hpp"
#include "callerspace/parallel.hpp"
#include "callerspace/rng.hpp"
#include "callerspace/synth.hpp"
#include "test_util.hpp"

using namespace callerspace;

namespace {

DiagonalGaussian gauss(std::vector<double> mean, std::vector<double> variance)
{
    DiagonalGaussian g;
    g.mean = std::move(mean);
    g.variance = std::move(variance);
    g.sample_count = 2;
    return g;
}

DiagonalGaussian random_gauss(Rng& rng, std::size_t d)
{
    DiagonalGaussian g;
    for (std::size_t i = 0; i < d; ++i) {
        g.mean.push_back(rng.normal(0.0, 2.0));
        g.variance.push_back(std::exp(rng.normal(0.0, 1.0)));
    }
    g.sample_count = 10;
    return g;
}

} // namespace

TEST_CASE("fit_diag_gaussian hand cases")
{
    const std::vector<float> two = {0, 0, 2, 2};
    const auto g = fit_diag_gaussian(two, 2);
    CHECK(g.mean == std::vector<double>{1, 1});
    CHECK(g.variance == std::vector<double>{2, 2});
    CHECK(g.sample_count == 2);

    const std::vector<float> same = {3, -1, 3, -1, 3, -1};
    const auto c = fit_diag_gaussian(same, 2, 1e-6);
    CHECK(c.variance == std::vector<double>{1e-6, 1e-6});
    CHECK(fit_diag_gaussian(same, 2, 0.25).variance == std::vector<double>{0.25, 0.25});

    const std::vector<float> one = {1, 2};
    CHECK_ERROR_CODE(fit_diag_gaussian(one, 2), ErrorCode::TooFewSamples);
    CHECK_ERROR_CODE(fit_diag_gaussian(std::vector<float>{1, 2, 3}, 2), ErrorCode::DimensionMismatch);
}

TEST_CASE("fit_diag_gaussian recovers sampling parameters")
{
    Rng rng(2024);
    const std::vector<double> mu = {1.5, -3.0, 0.0};
    const std::vector<double> sigma = {0.5, 2.0, 1.0};
    const std::size_t n = 10000;
    std::vector<float> rows;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 3; ++j) rows.push_back(static_cast<float>(rng.normal(mu[j], sigma[j])));
    }
    const auto g = fit_diag_gaussian(rows, 3);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(std::abs(g.mean[j] - mu[j]) < 5.0 * sigma[j] / std::sqrt(static_cast<double>(n)));
        CHECK(std::abs(g.variance[j] / (sigma[j] * sigma[j]) - 1.0) < 0.1);
    }
}

TEST_CASE("KL closed form hand values")
{
    const auto n01 = gauss({0}, {1});
    CHECK(kl_divergence(n01, gauss({1}, {1})) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(kl_divergence(n01, gauss({0}, {4})) == doctest::Approx(0.5 * (std::log(4.0) + 0.25 - 1.0)).epsilon(1e-12));
    CHECK(kl_divergence(n01, gauss({0}, {4})) == doctest::Approx(0.318147).epsilon(1e-6));
    CHECK(kl_divergence(gauss({0}, {4}), n01) == doctest::Approx(0.806853).epsilon(1e-6));
    CHECK(kl_divergence(n01, n01) == 0.0);
    CHECK_ERROR_CODE(kl_divergence(n01, gauss({0, 0}, {1, 1})), ErrorCode::DimensionMismatch);
}

TEST_CASE("Bhattacharyya closed form hand values")
{
    CHECK(std::abs(bhattacharyya(gauss({0}, {1}), gauss({1}, {1})) - 0.125) < 1e-12);
    // Equal means, variances 1 and 4: 0.5 * ln(2.5 / 2).
    CHECK(bhattacharyya(gauss({0}, {1}), gauss({0}, {4})) == doctest::Approx(0.5 * std::log(1.25)).epsilon(1e-12));
    CHECK(bhattacharyya(gauss({2, 3}, {1, 2}), gauss({2, 3}, {1, 2})) == 0.0);
    CHECK_ERROR_CODE(bhattacharyya(gauss({0}, {1}), gauss({0, 0}, {1, 1})), ErrorCode::DimensionMismatch);
}

TEST_CASE("divergence properties on random pairs")
{
    Rng rng(99);
    bool saw_asymmetry = false;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t d = 1 + static_cast<std::size_t>(rng.below(8));
        const auto f = random_gauss(rng, d);
        const auto g = random_gauss(rng, d);
        CHECK(kl_divergence(f, g) >= -1e-12);
        CHECK(bhattacharyya(f, g) >= -1e-12);
        CHECK(bhattacharyya(f, g) == bhattacharyya(g, f));
        CHECK(kl_divergence(f, f) == 0.0);
        CHECK(bhattacharyya(f, f) == 0.0);
        if (std::abs(kl_divergence(f, g) - kl_divergence(g, f)) > 1e-6) saw_asymmetry = true;

        // A shared rescaling of both distributions leaves both measures unchanged.
        const double c = 0.1 + 5.0 * rng.uniform();
        auto fs = f;
        auto gs = g;
        for (std::size_t i = 0; i < d; ++i) {
            fs.mean[i] *= c;
            gs.mean[i] *= c;
            fs.variance[i] *= c * c;
            gs.variance[i] *= c * c;
        }
        CHECK(kl_divergence(fs, gs) == doctest::Approx(kl_divergence(f, g)).epsilon(1e-9));
        CHECK(bhattacharyya(fs, gs) == doctest::Approx(bhattacharyya(f, g)).epsilon(1e-9));
    }
    CHECK(saw_asymmetry);
}

TEST_CASE("extreme variance floors stay finite")
{
    const std::vector<float> rows = {0, 1e6F, 0, 1e6F, 0, -1e6F};
    for (double floor : {1e-300, 1e-6, 1.0, 1e12}) {
        const auto a = fit_diag_gaussian(rows, 2, floor);
        const auto b = fit_diag_gaussian(std::vector<float>{5, 0, 5, 1}, 2, floor);
        CHECK(std::isfinite(kl_divergence(a, b)));
        CHECK(std::isfinite(kl_divergence(b, a)));
        CHECK(std::isfinite(bhattacharyya(a, b)));
    }
}

TEST_CASE("distance matrix counts and diagonal symmetrization")
{
    Rng rng(5);
    std::vector<CallerGaussians> callers(3);
    const std::size_t sizes[3] = {4, 5, 3};
    for (std::size_t c = 0; c < 3; ++c) {
        callers[c].caller_id = static_cast<std::uint16_t>(c + 1);
        for (std::size_t k = 0; k < sizes[c]; ++k) callers[c].gaussians.push_back(random_gauss(rng, 3));
    }
    const auto kl = distance_matrix(callers, DistanceMeasure::Kl, true);
    const auto bc = distance_matrix(callers, DistanceMeasure::Bhattacharyya);
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            const std::size_t expected = a == b ? sizes[a] * (sizes[a] - 1) / 2 : sizes[a] * sizes[b];
            CHECK(kl.cell(a, b).count == expected);
            CHECK(bc.cell(a, b).count == expected);
            CHECK(kl.cell(a, b).raw.size() == expected);
            CHECK(bc.cell(a, b).raw.empty());
            CHECK(kl.cell(a, b).caller_a == a + 1);
            CHECK(kl.cell(a, b).caller_b == b + 1);
        }
        CHECK(bc.cell(a, (a + 1) % 3).mean == doctest::Approx(bc.cell((a + 1) % 3, a).mean).epsilon(1e-12));
    }
    const auto& g = callers[0].gaussians;
    const double first = 0.5 * (kl_divergence(g[0], g[1]) + kl_divergence(g[1], g[0]));
    CHECK(kl.cell(0, 0).raw[0] == first);
    CHECK(kl.cell(0, 1).raw[0] == kl_divergence(g[0], callers[1].gaussians[0]));

    // Reported std is the sample (n-1) deviation.
    const auto& raw = kl.cell(1, 2).raw;
    double m = 0;
    for (double v : raw) m += v;
    m /= static_cast<double>(raw.size());
    double ss = 0;
    for (double v : raw) ss += (v - m) * (v - m);
    CHECK(kl.cell(1, 2).mean == doctest::Approx(m));
    CHECK(kl.cell(1, 2).std == doctest::Approx(std::sqrt(ss / static_cast<double>(raw.size() - 1))));

    callers[2].gaussians.resize(1);
    CHECK_ERROR_CODE(distance_matrix(callers, DistanceMeasure::Kl), ErrorCode::TooFewGroups);
}

TEST_CASE("hundred groups per caller give the quoted pair counts")
{
    Rng rng(1);
    std::vector<CallerGaussians> callers(2);
    for (std::size_t c = 0; c < 2; ++c) {
        callers[c].caller_id = static_cast<std::uint16_t>(c);
        for (int k = 0; k < 100; ++k) callers[c].gaussians.push_back(random_gauss(rng, 2));
    }
    const auto m = distance_matrix(callers, DistanceMeasure::Kl);
    CHECK(m.cell(0, 0).count == 4950);
    CHECK(m.cell(1, 1).count == 4950);
    CHECK(m.cell(0, 1).count == 10000);
    CHECK(m.cell(1, 0).count == 10000);
}

TEST_CASE("distance matrix does not depend on the thread count")
{
    Rng rng(8);
    std::vector<CallerGaussians> callers(4);
    for (std::size_t c = 0; c < 4; ++c) {
        callers[c].caller_id = static_cast<std::uint16_t>(c);
        for (int k = 0; k < 10; ++k) callers[c].gaussians.push_back(random_gauss(rng, 4));
    }
    set_thread_count(1);
    const auto one = distance_matrix(callers, DistanceMeasure::Kl, true);
    set_thread_count(4);
    const auto four = distance_matrix(callers, DistanceMeasure::Kl, true);
    set_thread_count(0);
    for (std::size_t i = 0; i < one.cells.size(); ++i) {
        CHECK(one.cells[i].raw == four.cells[i].raw);
        CHECK(one.cells[i].mean == four.cells[i].mean);
    }
}

TEST_CASE("null model: intra and inter distances agree")
{
    SynthSpec spec;
    spec.num_callers = 4;
    spec.embed_dim = 4;
    spec.segments_per_caller = {200, 200, 200, 200};
    spec.separation = 0.0;
    spec.seed = 11;
    const auto store = generate_store(spec);
    SplitAssignment all;
    for (const auto& r : store.records) all.by_segment[r.segment_id] = Split::Train;
    const auto groups = build_caller_groups(store, all, Split::Train, 20);
    const auto m = distance_matrix(fit_caller_gaussians(groups), DistanceMeasure::Bhattacharyya);
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = 0; b < 4; ++b) {
            if (a == b) continue;
            const auto& intra = m.cell(a, a);
            const auto& inter = m.cell(a, b);
            const double se = std::sqrt(intra.std * intra.std / static_cast<double>(intra.count) +
                                        inter.std * inter.std / static_cast<double>(inter.count));
            const double pooled = std::sqrt(0.5 * (intra.std * intra.std + inter.std * inter.std));
            // Pair distances within a cell are correlated, so the naive standard
            // error understates the noise; the pooled spread bounds it.
            CHECK_MESSAGE(std::abs(intra.mean - inter.mean) < 2.0 * std::max(se, pooled / std::sqrt(20.0)),
                          "cell " << a << "," << b);
        }
    }
}

TEST_CASE("separated callers: every diagonal below every off-diagonal")
{
    SynthSpec spec;
    spec.num_callers = 5;
    spec.embed_dim = 8;
    spec.segments_per_caller = {120, 120, 120, 120, 120};
    spec.separation = 6.0;
    spec.seed = 3;
    const auto store = generate_store(spec);
    const auto assignment = split_dataset(store, {}, 0);
    const auto groups = build_caller_groups(store, assignment, Split::Train, 10);
    for (auto measure : {DistanceMeasure::Kl, DistanceMeasure::Bhattacharyya}) {
        const auto m = distance_matrix(fit_caller_gaussians(groups), measure);
        double max_diag = 0.0;
        double min_off = 1e300;
        for (std::size_t a = 0; a < 5; ++a) {
            for (std::size_t b = 0; b < 5; ++b) {
                if (a == b) max_diag = std::max(max_diag, m.cell(a, b).mean);
                else min_off = std::min(min_off, m.cell(a, b).mean);
            }
        }
        CHECK(max_diag < min_off);
    }
}

TEST_CASE("functional vectors")
{
    const auto g = gauss({1, 2}, {3, 4});
    const auto fv = functional_vector(g, 7, Split::Val, 3);
    CHECK(fv.values == std::vector<double>{1, 2, 3, 4});
    CHECK(fv.caller_id == 7);
    CHECK(fv.split == Split::Val);
    CHECK(fv.group_index == 3);

    DiagonalGaussian wide;
    wide.mean.assign(768, 0.5);
    wide.variance.assign(768, 2.0);
    CHECK(functional_vector(wide).values.size() == 1536);

    auto back = gaussian_from_functional(fv.values);
    CHECK(back.mean == g.mean);
    CHECK(back.variance == g.variance);
    CHECK_ERROR_CODE(gaussian_from_functional(std::vector<double>{1, 2, 3}), ErrorCode::DimensionMismatch);
}

TEST_CASE("measure names")
{
    CHECK(parse_measure("kl") == DistanceMeasure::Kl);
    CHECK(parse_measure("bc") == DistanceMeasure::Bhattacharyya);
    CHECK(to_string(DistanceMeasure::Bhattacharyya) == "bc");
    CHECK_THROWS_AS(parse_measure("js"), Error);
}
