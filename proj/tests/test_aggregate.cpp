#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ctvote/aggregate.hpp"
#include "ctvote/error.hpp"
#include "oracles.hpp"

using namespace ctvote;
using namespace ctvote::aggregate;

namespace {

constexpr Label C = Label::Covid;
constexpr Label N = Label::NonCovid;

std::vector<Vote> random_votes(std::mt19937_64& gen, std::size_t max_len) {
    std::vector<Vote> v(1 + gen() % max_len);
    for (auto& x : v) x = {gen() % 2 ? C : N, 0.05 * static_cast<double>(gen() % 21)};
    return v;
}

std::vector<Label> labels_of(const std::vector<Vote>& votes) {
    std::vector<Label> out;
    for (const auto& v : votes) out.push_back(v.label);
    return out;
}

}  // namespace

TEST_CASE("majority vote") {
    CHECK(majority_vote(std::vector{C, C, N}) == C);
    CHECK(majority_vote(std::vector{N, N, N}) == N);
    CHECK(majority_vote(std::vector{C, N}) == C);
    CHECK(majority_vote(std::vector{C, N}, N) == N);
    CHECK_THROWS_AS(majority_vote(std::vector<Label>{}), Error);
}

TEST_CASE("two-threshold vote examples") {
    const std::vector<Vote> a{{N, 0.65}, {C, 0.9}, {C, 0.55}};
    CHECK(threshold_vote(a, {0.7, 0.5}) == C);
    const std::vector<Vote> b{{C, 0.6}, {N, 0.9}};
    CHECK(threshold_vote(b, {0.0, 0.0}) == C);

    // Only the NON_COVID majority is filtered out.
    const std::vector<Vote> c{{N, 0.6}, {N, 0.6}, {C, 0.8}};
    CHECK(threshold_vote(c, {0.0, 0.0}) == N);
    CHECK(threshold_vote(c, {0.7, 0.0}) == C);
    // Everything filtered: fall back to the unfiltered mode.
    CHECK(threshold_vote(c, {0.0, 0.9}) == N);

    CHECK_THROWS_AS(threshold_vote(std::vector<Vote>{}, {}), Error);
    CHECK_THROWS_AS(threshold_vote(a, {1.5, 0.0}), Error);
}

TEST_CASE("disabled thresholds reduce to the majority vote") {
    std::mt19937_64 gen(4);
    for (int i = 0; i < 2000; ++i) {
        const auto v = random_votes(gen, 12);
        CHECK(threshold_vote(v, {0.0, 0.0}) == majority_vote(labels_of(v)));
    }
}

TEST_CASE("threshold vote matches the oracle and ignores order") {
    std::mt19937_64 gen(11);
    for (int i = 0; i < 3000; ++i) {
        auto v = random_votes(gen, 12);
        const VoteThresholds t{0.1 * static_cast<double>(gen() % 11), 0.1 * static_cast<double>(gen() % 11)};
        const Label got = threshold_vote(v, t);
        CHECK(got == oracle::threshold_vote(v, t.t_noncovid, t.t_all));
        std::shuffle(v.begin(), v.end(), gen);
        CHECK(threshold_vote(v, t) == got);
    }
}

TEST_CASE("raising t_noncovid never turns COVID into NON_COVID") {
    std::mt19937_64 gen(12);
    for (int i = 0; i < 3000; ++i) {
        const auto v = random_votes(gen, 12);
        const double t_all = 0.1 * static_cast<double>(gen() % 11);
        const bool covid_ok =
            std::all_of(v.begin(), v.end(), [&](const Vote& x) { return x.label != C || x.confidence >= t_all; });
        const bool any_covid = std::any_of(v.begin(), v.end(), [](const Vote& x) { return x.label == C; });
        if (!covid_ok || !any_covid) continue;
        Label prev = threshold_vote(v, {0.0, t_all});
        for (int k = 1; k <= 10; ++k) {
            const Label cur = threshold_vote(v, {0.1 * k, t_all});
            if (prev == C) CHECK(cur == C);
            prev = cur;
        }
    }
}

TEST_CASE("ensemble pooling") {
    const std::vector<Vote> a{{N, 0.65}, {C, 0.9}, {C, 0.55}};
    CHECK(pool_ensemble({{"only", a}}, {0.7, 0.5}) == threshold_vote(a, {0.7, 0.5}));
    CHECK(pool_ensemble({{"m1", {{C, 0.9}, {C, 0.8}}}, {"m2", {{C, 0.7}}}}, {}) == C);
    CHECK_THROWS_AS(pool_ensemble({}, {}), Error);
    CHECK_THROWS_AS(pool_ensemble({{"m", {}}}, {}), Error);

    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 500; ++trial) {
        std::map<std::string, std::vector<Vote>> per_model;
        std::vector<Vote> all;
        for (int m = 0; m < 10; ++m) {
            auto v = random_votes(gen, 6);
            all.insert(all.end(), v.begin(), v.end());
            per_model["m" + std::to_string(m)] = std::move(v);
        }
        const VoteThresholds t{0.1 * static_cast<double>(gen() % 11), 0.1 * static_cast<double>(gen() % 11)};
        CHECK(pool_ensemble(per_model, t) == oracle::threshold_vote(all, t.t_noncovid, t.t_all));
    }
}

TEST_CASE("slice filter") {
    const std::vector<SliceProbs> three{{0.05, 0.05, 0.9}, {0.25, 0.25, 0.5}, {0.45, 0.45, 0.1}};
    const auto kept = filter_slices(three, {0.2, 0.8, 1.0});
    REQUIRE(kept.size() == 2);
    CHECK(kept[0] == std::pair{std::size_t{0}, SliceClass::Healthy});
    CHECK(kept[1] == std::pair{std::size_t{2}, SliceClass::Lesion});

    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<SliceProbs> any(50);
    for (auto& p : any) {
        p[2] = u(gen);
        p[0] = 1.0 - p[2];
        p[1] = 0.0;
    }
    CHECK(filter_slices(any, {0.5, 0.5, 1.0}).size() == 50);

    std::vector<SliceProbs> healthy(96, SliceProbs{0.02, 0.03, 0.95});
    const auto central = filter_slices(healthy, {0.2, 0.8, 0.5});
    for (const auto& [i, cls] : central) {
        CHECK(i >= 24);
        CHECK(i <= 72);
        CHECK(cls == SliceClass::Healthy);
    }
    CHECK(central.front().first == 24);
    CHECK(central.size() == 49);

    CHECK_THROWS_AS(filter_slices(std::vector<SliceProbs>{}, {}), Error);
    CHECK_THROWS_AS(filter_slices(three, {0.9, 0.1, 1.0}), Error);
}

TEST_CASE("feature assembly") {
    const double third = 1.0 / 3.0;
    const auto uniform = assemble_features(std::vector<SliceProbs>(96, SliceProbs{third, third, third}));
    const auto flat = uniform.flatten();
    CHECK(flat.size() == 288);
    for (double v : flat) CHECK(v == third);
    CHECK(FeatureMatrix::from_flat(flat) == uniform);

    std::vector<SliceProbs> rows48(48);
    for (std::size_t i = 0; i < 48; ++i) rows48[i] = {0.001 * static_cast<double>(i), 0.0, 1.0 - 0.001 * static_cast<double>(i)};
    const auto up = assemble_features(rows48);
    for (std::size_t j = 0; j < 96; ++j) CHECK(up.rows[j] == rows48[j / 2]);

    std::vector<SliceProbs> rows192(192);
    for (std::size_t i = 0; i < 192; ++i) rows192[i] = {0.0, 0.001 * static_cast<double>(i), 1.0 - 0.001 * static_cast<double>(i)};
    const auto down = assemble_features(rows192);
    for (std::size_t j = 0; j < 96; ++j) CHECK(down.rows[j] == rows192[2 * j]);

    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t n : {1u, 5u, 95u, 97u, 500u}) {
        std::vector<SliceProbs> rows(n);
        for (auto& r : rows) {
            const double a = u(gen), b = u(gen), c = u(gen);
            r = {a / (a + b + c), b / (a + b + c), c / (a + b + c)};
        }
        const auto fm = assemble_features(rows);
        for (const auto& r : fm.rows) CHECK(std::abs(r[0] + r[1] + r[2] - 1.0) <= 1e-6);
    }
    CHECK_THROWS_AS(assemble_features(std::vector<SliceProbs>{}), Error);
}
