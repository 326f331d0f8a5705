#include <doctest.h>

#include <set>

#include "ctvote/error.hpp"
#include "ctvote/sampling.hpp"

using namespace ctvote;
using namespace ctvote::sampling;

namespace {

std::vector<std::size_t> progression(std::size_t first, std::size_t last, std::size_t step) {
    std::vector<std::size_t> out;
    for (std::size_t i = first; i <= last; i += step) out.push_back(i);
    return out;
}

void check_plan_shape(const SubVolumePlan& p, std::size_t n) {
    REQUIRE(!p.indices.empty());
    CHECK(p.indices.size() + p.pad_count == p.target_len);
    CHECK(p.entries().size() == p.target_len);
    CHECK(p.indices.back() < n);
    for (std::size_t i = 1; i < p.indices.size(); ++i) CHECK(p.indices[i] == p.indices[i - 1] + p.stride);
}

}  // namespace

TEST_CASE("train crop at k=3 takes every third slice") {
    const auto p = plan_from_start(384, 0, kTrainLength);
    CHECK(p.stride == 3);
    CHECK(p.indices == progression(0, 381, 3));
    CHECK(p.indices.size() == 128);
    CHECK(p.pad_count == 0);
}

TEST_CASE("short volumes are padded with their last slice") {
    const auto p = train_sample(100, 7);
    CHECK(p.start == 0);
    CHECK(p.stride == 1);
    CHECK(p.indices == progression(0, 99, 1));
    CHECK(p.pad_count == 28);
    const auto e = p.entries();
    for (std::size_t j = 100; j < 128; ++j) CHECK(e[j] == 99);
}

TEST_CASE("k=1 with start 1 truncates to the first 128") {
    const auto p = plan_from_start(140, 1, kTrainLength);
    CHECK(p.indices == progression(1, 128, 1));
    CHECK(p.pad_count == 0);
}

TEST_CASE("inference sub-volumes") {
    const auto a = inference_subvolumes(512);
    REQUIRE(a.size() == 3);
    CHECK(a[0].indices == progression(0, 510, 2));
    CHECK(a[0].pad_count == 0);
    for (std::size_t s = 0; s < 3; ++s) CHECK(a[s].start == s);

    const auto b = inference_subvolumes(200);
    REQUIRE(b.size() == 1);
    CHECK(b[0].indices == progression(0, 199, 1));
    CHECK(b[0].pad_count == 56);

    const auto c = inference_subvolumes(256);
    REQUIRE(c.size() == 2);
    CHECK(c[1].indices.size() == 255);
    CHECK(c[1].pad_count == 1);
    CHECK(c[1].entries().back() == 255);
}

TEST_CASE("plans are well formed for every length") {
    for (std::size_t n = 1; n <= 1100; ++n) {
        const auto t = train_sample(n, n * 31);
        check_plan_shape(t, n);
        CHECK(t.target_len == 128);
        const std::size_t k = n / 128;
        if (n >= 128) {
            CHECK(t.stride == k);
            CHECK(t.start <= k);
        }
        const auto inf = inference_subvolumes(n);
        CHECK(inf.size() == (n < 256 ? 1 : n / 256 + 1));
        for (const auto& p : inf) check_plan_shape(p, n);
    }
}

TEST_CASE("each start's progression covers its own residue class") {
    for (std::size_t k = 1; k <= 4; ++k) {
        const std::size_t n = 256 * k;
        const auto plans = inference_subvolumes(n);
        std::set<std::size_t> seen;
        for (std::size_t s = 0; s < k; ++s) {
            for (std::size_t i : plans[s].indices) {
                CHECK(i % k == s);
                CHECK(seen.insert(i).second);
            }
        }
        CHECK(seen.size() == n);
    }
}

TEST_CASE("train_sample is deterministic and reaches every start") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(train_sample(700, seed) == train_sample(700, seed));
    std::set<std::size_t> starts;
    for (std::uint64_t seed = 0; seed < 400; ++seed) starts.insert(train_sample(600, seed).start);
    CHECK(starts == std::set<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("tta enumeration") {
    const auto plans = inference_subvolumes(512);
    std::size_t total = 0;
    for (const auto& p : plans) {
        const auto v = tta_variants(p);
        REQUIRE(v.size() == 8);
        CHECK(v.front().flips.is_identity());
        std::set<FlipSpec> distinct;
        for (const auto& t : v) {
            distinct.insert(t.flips);
            CHECK(t.subvolume == p);
        }
        CHECK(distinct.size() == 8);
        CHECK(v[1].flips == FlipSpec{false, false, true});
        CHECK(v[4].flips == FlipSpec{true, false, false});
        total += v.size();
    }
    CHECK(total == 24);
}

TEST_CASE("zero-length volumes are rejected") {
    CHECK_THROWS_AS(train_sample(0, 1), Error);
    CHECK_THROWS_AS(inference_subvolumes(0), Error);
    try {
        train_sample(0, 1);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ZeroLength);
    }
}
