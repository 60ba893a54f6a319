#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "callerspace/store.hpp"
#include "test_util.hpp"

using namespace callerspace;
using testutil::TempDir;

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <class T>
void le(std::vector<unsigned char>& out, T v)
{
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(raw[i]);
}

} // namespace

TEST_CASE("store file layout is byte-exact")
{
    TempDir dir("layout");
    ModelMeta m = testutil::meta(2);
    m.model_name = "ab";
    EmbeddingRecord r;
    r.segment_id = 7;
    r.caller_id = 3;
    r.calltype_id = 4;
    r.source_file = "f.wav";
    r.start_ms = 10;
    r.end_ms = 250;
    r.num_frames = 3;
    r.frames = {0.5F, -1.0F, 2.0F, 3.25F, 4.0F, 1e-3F};
    write_store(m, std::span(&r, 1), dir / "a.store");

    // Hand-assembled little-endian image.
    std::vector<unsigned char> expected = {'C', 'S', 'E', '1'};
    le<std::uint16_t>(expected, 1);
    le<std::uint16_t>(expected, 2);
    le<std::uint32_t>(expected, 1);
    expected.push_back(2);
    expected.push_back('a');
    expected.push_back('b');
    expected.push_back(2); // contrastive
    le<float>(expected, 1.5F);
    le<std::uint32_t>(expected, 7);
    le<std::uint16_t>(expected, 3);
    le<std::uint16_t>(expected, 4);
    le<std::uint32_t>(expected, 10);
    le<std::uint32_t>(expected, 250);
    expected.push_back(5);
    for (char c : std::string("f.wav")) expected.push_back(static_cast<unsigned char>(c));
    le<std::uint32_t>(expected, 3);
    for (float v : r.frames) le<float>(expected, v);

    CHECK(read_bytes(dir / "a.store") == expected);
}

TEST_CASE("write/read round trip")
{
    TempDir dir("roundtrip");
    SUBCASE("one record of three frames")
    {
        EmbeddingStore s;
        s.meta = testutil::meta(2);
        s.records.push_back(testutil::record(0, 1, 3, 2, "x.wav", 0, 1.25F));
        write_store(s, dir / "s.store");
        CHECK(read_store(dir / "s.store") == s);
    }
    SUBCASE("many records, odd values")
    {
        auto s = testutil::simple_store({4, 5, 3}, 3, 5);
        s.records[2].frames[1] = std::numeric_limits<float>::denorm_min();
        s.records[4].frames[0] = -0.0F;
        s.meta.param_count_millions = 94.38F;
        write_store(s, dir / "s.store");
        const auto back = read_store(dir / "s.store");
        CHECK(back == s);
        CHECK(std::signbit(back.records[4].frames[0]));
    }
}

TEST_CASE("store writer rejects invalid records")
{
    TempDir dir("invalid");
    SUBCASE("zero frames")
    {
        auto r = testutil::record(0, 1, 1, 2, "a.wav", 0);
        r.num_frames = 0;
        r.frames.clear();
        CHECK_ERROR_CODE(write_store(testutil::meta(2), std::span(&r, 1), dir / "a"), ErrorCode::DimensionOrEmpty);
    }
    SUBCASE("512-dim frames under a 768-dim header")
    {
        auto r = testutil::record(0, 1, 2, 512, "a.wav", 0);
        CHECK_ERROR_CODE(write_store(testutil::meta(768), std::span(&r, 1), dir / "a"), ErrorCode::DimensionOrEmpty);
    }
    SUBCASE("non-finite value")
    {
        auto r = testutil::record(0, 1, 2, 2, "a.wav", 0);
        r.frames[3] = std::numeric_limits<float>::quiet_NaN();
        CHECK_ERROR_CODE(write_store(testutil::meta(2), std::span(&r, 1), dir / "a"), ErrorCode::NonFiniteValue);
    }
    SUBCASE("end before start")
    {
        auto r = testutil::record(0, 1, 2, 2, "a.wav", 50);
        r.end_ms = 50;
        CHECK_ERROR_CODE(write_store(testutil::meta(2), std::span(&r, 1), dir / "a"), ErrorCode::InvalidStore);
    }
    SUBCASE("records out of (file, start) order")
    {
        std::vector<EmbeddingRecord> rs = {testutil::record(0, 1, 1, 2, "b.wav", 0),
                                           testutil::record(1, 1, 1, 2, "a.wav", 0)};
        CHECK_ERROR_CODE(write_store(testutil::meta(2), rs, dir / "a"), ErrorCode::InvalidStore);
    }
    SUBCASE("segment ids not increasing")
    {
        std::vector<EmbeddingRecord> rs = {testutil::record(5, 1, 1, 2, "a.wav", 0),
                                           testutil::record(5, 1, 1, 2, "a.wav", 500)};
        CHECK_ERROR_CODE(write_store(testutil::meta(2), rs, dir / "a"), ErrorCode::InvalidStore);
    }
    SUBCASE("meta invariants")
    {
        auto m = testutil::meta(2);
        m.param_count_millions = 0.0F;
        CHECK_THROWS_AS(m.validate(), Error);
        m = testutil::meta(0);
        CHECK_THROWS_AS(m.validate(), Error);
    }
}

TEST_CASE("store reader rejects malformed files")
{
    TempDir dir("malformed");
    const auto s = testutil::simple_store({3, 3}, 2, 3);
    write_store(s, dir / "good");
    const auto good = read_bytes(dir / "good");

    SUBCASE("bad magic")
    {
        auto bytes = good;
        bytes[0] = 'X';
        write_bytes(dir / "bad", bytes);
        CHECK_ERROR_CODE(read_store(dir / "bad"), ErrorCode::BadMagic);
    }
    SUBCASE("unsupported version")
    {
        auto bytes = good;
        bytes[4] = 2;
        write_bytes(dir / "bad", bytes);
        CHECK_ERROR_CODE(read_store(dir / "bad"), ErrorCode::UnsupportedVersion);
    }
    SUBCASE("truncated mid-record")
    {
        for (std::size_t cut : {good.size() - 1, good.size() - 13, std::size_t{20}, std::size_t{6}}) {
            auto bytes = good;
            bytes.resize(cut);
            write_bytes(dir / "bad", bytes);
            CHECK_ERROR_CODE(read_store(dir / "bad"), ErrorCode::TruncatedFile);
        }
    }
    SUBCASE("non-finite frame value")
    {
        auto bytes = good;
        const float inf = std::numeric_limits<float>::infinity();
        std::memcpy(bytes.data() + bytes.size() - 4, &inf, 4);
        write_bytes(dir / "bad", bytes);
        CHECK_ERROR_CODE(read_store(dir / "bad"), ErrorCode::NonFiniteValue);
    }
    SUBCASE("trailing bytes")
    {
        auto bytes = good;
        bytes.push_back(0);
        write_bytes(dir / "bad", bytes);
        CHECK_ERROR_CODE(read_store(dir / "bad"), ErrorCode::InvalidStore);
    }
    SUBCASE("missing file")
    {
        CHECK_ERROR_CODE(read_store(dir / "absent"), ErrorCode::Io);
    }
}

TEST_CASE("known model table matches the published model list")
{
    // Parameter counts (millions), last-layer dimension and pretext objective
    // of the eleven compared models.
    struct Row {
        const char* name;
        float params;
        std::uint32_t dim;
        PretextObjective objective;
    };
    const Row rows[] = {
        {"APC", 4.11F, 512, PretextObjective::AutoregressiveReconstruction},
        {"VQ-APC", 4.63F, 512, PretextObjective::AutoregressiveReconstruction},
        {"NPC", 19.38F, 512, PretextObjective::MaskedReconstruction},
        {"Mockingjay", 21.33F, 768, PretextObjective::MaskedReconstruction},
        {"TERA", 21.33F, 768, PretextObjective::MaskedReconstruction},
        {"Mod-CPC", 1.84F, 256, PretextObjective::Contrastive},
        {"Wav2Vec2", 95.04F, 768, PretextObjective::Contrastive},
        {"Hubert", 94.68F, 768, PretextObjective::MaskedPrediction},
        {"DistilHubert", 27.03F, 768, PretextObjective::MaskedPrediction},
        {"WavLM", 94.38F, 768, PretextObjective::MaskedPrediction},
        {"Data2Vec", 93.16F, 768, PretextObjective::MaskedPrediction},
    };
    CHECK(known_models().size() == 11);
    for (const auto& row : rows) {
        const auto m = find_known_model(row.name);
        REQUIRE_MESSAGE(m.has_value(), row.name);
        CHECK(m->param_count_millions == row.params);
        CHECK(m->embed_dim == row.dim);
        CHECK(m->pretext_objective == row.objective);
    }
    CHECK(find_known_model("Mod-CPC")->corpus_tag == "LL 60k");
    CHECK_FALSE(find_known_model("GPT").has_value());
}

TEST_CASE("objective names round trip")
{
    for (int i = 0; i < 4; ++i) {
        const auto o = static_cast<PretextObjective>(i);
        CHECK(parse_objective(to_string(o)) == o);
    }
    CHECK_THROWS_AS(parse_objective("generative"), Error);
}

TEST_CASE("sequential split of ten segments")
{
    const auto s = testutil::simple_store({10});
    const auto a = split_dataset(s, {}, 0, SplitMode::Sequential);
    for (std::uint32_t id = 0; id < 7; ++id) CHECK(a.at(id) == Split::Train);
    CHECK(a.at(7) == Split::Val);
    CHECK(a.at(8) == Split::Val);
    CHECK(a.at(9) == Split::Test);
}

TEST_CASE("split partition, ratio and determinism properties")
{
    const auto s = testutil::simple_store({50, 73, 120, 64, 3, 9});
    for (auto mode : {SplitMode::Sequential, SplitMode::Shuffled}) {
        const auto a = split_dataset(s, {}, 17, mode);
        CHECK(a.by_segment.size() == s.records.size());
        CHECK(a == split_dataset(s, {}, 17, mode));
        std::map<std::uint16_t, std::array<double, 3>> counts;
        std::map<std::uint16_t, double> totals;
        for (const auto& r : s.records) {
            counts[r.caller_id][static_cast<int>(a.at(r.segment_id))] += 1.0;
            totals[r.caller_id] += 1.0;
        }
        for (const auto& [caller, c] : counts) {
            CHECK(c[1] >= 1.0);
            CHECK(c[2] >= 1.0);
            if (totals[caller] >= 50) {
                CHECK(std::abs(c[0] / totals[caller] - 0.7) <= 0.02);
                CHECK(std::abs(c[1] / totals[caller] - 0.2) <= 0.02);
                CHECK(std::abs(c[2] / totals[caller] - 0.1) <= 0.02);
            }
        }
    }
    const auto seq = split_dataset(s, {}, 1, SplitMode::Shuffled);
    const auto other = split_dataset(s, {}, 2, SplitMode::Shuffled);
    CHECK_FALSE(seq == other);
}

TEST_CASE("sequential split keeps time order per caller")
{
    const auto s = testutil::simple_store({20, 31});
    const auto a = split_dataset(s, {}, 0);
    for (std::uint16_t caller : {1, 2}) {
        int last = 0;
        for (const auto& r : s.records) {
            if (r.caller_id != caller) continue;
            const int v = static_cast<int>(a.at(r.segment_id));
            CHECK(v >= last);
            last = v;
        }
    }
}

TEST_CASE("split sizes on a 72,921 segment corpus")
{
    // 72,921 segments over ten callers with an uneven distribution.
    const std::vector<std::uint32_t> per_caller = {14210, 11020, 9511, 8002, 7015, 6500, 5400, 4830, 3633, 2800};
    std::uint32_t total = 0;
    for (auto n : per_caller) total += n;
    REQUIRE(total == 72921);
    EmbeddingStore s;
    s.meta = testutil::meta(1);
    std::uint32_t id = 0;
    for (std::size_t c = 0; c < per_caller.size(); ++c) {
        for (std::uint32_t k = 0; k < per_caller[c]; ++k) {
            EmbeddingRecord r;
            r.segment_id = id++;
            r.caller_id = static_cast<std::uint16_t>(c);
            r.source_file = "c" + std::to_string(c);
            r.start_ms = k * 10;
            r.end_ms = k * 10 + 5;
            r.num_frames = 1;
            r.frames = {0.0F};
            s.records.push_back(std::move(r));
        }
    }
    const auto a = split_dataset(s, {}, 3);
    CHECK(std::abs(static_cast<long>(a.count(Split::Train)) - 51045) <= 1);
    CHECK(std::abs(static_cast<long>(a.count(Split::Val)) - 14584) <= 1);
    CHECK(std::abs(static_cast<long>(a.count(Split::Test)) - 7292) <= 1);
}

TEST_CASE("split preconditions")
{
    CHECK_ERROR_CODE(split_dataset(testutil::simple_store({5, 2}), {}, 0), ErrorCode::InsufficientData);
    CHECK_THROWS_AS(split_dataset(testutil::simple_store({5}), SplitRatios{0.7, 0.2, 0.3}, 0), Error);
    CHECK_THROWS_AS(parse_split_mode("random"), Error);
}

TEST_CASE("length statistics")
{
    const std::vector<double> lengths = {100, 127, 500};
    const auto st = length_stats(lengths);
    CHECK(st.median_ms == 127);
    CHECK(st.mean_ms == doctest::Approx(242.3333333333));
    CHECK(st.std_ms == doctest::Approx(std::sqrt(((100 - 727.0 / 3) * (100 - 727.0 / 3) +
                                                  (127 - 727.0 / 3) * (127 - 727.0 / 3) +
                                                  (500 - 727.0 / 3) * (500 - 727.0 / 3)) /
                                                 2.0)));
    CHECK(st.min_ms == 100);
    CHECK(st.max_ms == 500);
}

TEST_CASE("store summary counts add up")
{
    const auto s = testutil::simple_store({4, 6, 3}, 2, 2);
    const auto sum = store_summary(s, 5);
    CHECK(sum.total_records == 13);
    CHECK(sum.total_frames == 26);
    std::size_t by_caller = 0;
    for (const auto& [c, n] : sum.per_caller) by_caller += n;
    CHECK(by_caller == 13);
    std::size_t in_bins = 0;
    for (const auto& b : sum.length_histogram) in_bins += b.count;
    CHECK(in_bins == 13);
    CHECK(sum.lengths.median_ms == 100);
}
