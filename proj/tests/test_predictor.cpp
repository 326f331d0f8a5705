#include <doctest.h>

#include <cmath>
#include <functional>

#include "ctvote/error.hpp"
#include "ctvote/predictor.hpp"

using namespace ctvote;
using namespace ctvote::predictor;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected ctvote::Error");
    return ErrorCode::IoFailure;
}

sampling::TtaPlan tta(std::size_t n, std::size_t start, FlipSpec f) {
    return {sampling::plan_from_start(n, start, sampling::kInferenceLength), f};
}

}  // namespace

TEST_CASE("file-backed sub-volume lookup") {
    const FlipSpec hd{true, false, true};
    const std::vector<PredictionRecord> recs{
        PredictionRecord::subvolume("p1", "m0", 0, FlipSpec{}, Label::Covid, 0.75),
        PredictionRecord::subvolume("p1", "m0", 1, hd, Label::NonCovid, 0.6),
        PredictionRecord::subvolume("p1", "m1", 0, FlipSpec{}, Label::NonCovid, 0.99),
    };
    const FileBackedPredictor m0(recs, "m0");
    const VolumeKey p1{"p1", 512, std::nullopt};

    auto v = m0.predict_subvolume(p1, tta(512, 0, FlipSpec{}));
    CHECK(v.label == Label::Covid);
    CHECK(v.confidence == 0.75);
    v = m0.predict_subvolume(p1, tta(512, 1, hd));
    CHECK(v.label == Label::NonCovid);
    CHECK(v.confidence == 0.6);
    // Repeated lookups are identical.
    CHECK(m0.predict_subvolume(p1, tta(512, 1, hd)).confidence == v.confidence);

    CHECK(code_of([&] { m0.predict_subvolume(p1, tta(512, 2, FlipSpec{})); }) == ErrorCode::MissingPrediction);
    CHECK(code_of([&] { m0.predict_subvolume({"p2", 512, {}}, tta(512, 0, FlipSpec{})); }) ==
          ErrorCode::MissingPrediction);
    CHECK(m0.patients() == std::set<std::string>{"p1"});
    CHECK(model_ids(recs) == std::vector<std::string>{"m0", "m1"});
}

TEST_CASE("file-backed slice lookup") {
    std::vector<PredictionRecord> recs;
    for (std::size_t i = 0; i < 10; ++i) {
        const double c = 0.05 * static_cast<double>(i);
        recs.push_back(PredictionRecord::slice("p", "m", 9 - i, {c, 0.1, 0.9 - c}));
    }
    const FileBackedPredictor m(recs, "m");
    const auto probs = m.predict_slices({"p", 10, {}});
    REQUIRE(probs.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(probs[i][0] == doctest::Approx(0.05 * static_cast<double>(9 - i)));
    CHECK(m.predict_slices({"p", 0, {}}).size() == 10);

    std::vector<PredictionRecord> gap;
    for (std::size_t i = 0; i < 10; ++i) {
        if (i != 5) gap.push_back(PredictionRecord::slice("p", "m", i, {0.2, 0.3, 0.5}));
    }
    const FileBackedPredictor g(gap, "m");
    CHECK(code_of([&] { g.predict_slices({"p", 10, {}}); }) == ErrorCode::IncompleteSliceSet);
    CHECK(code_of([&] { g.predict_slices({"p", 0, {}}); }) == ErrorCode::IncompleteSliceSet);
    CHECK(code_of([&] { m.predict_slices({"p", 8, {}}); }) == ErrorCode::IncompleteSliceSet);
    CHECK(code_of([&] { m.predict_slices({"q", 8, {}}); }) == ErrorCode::MissingPrediction);
}

TEST_CASE("duplicate keys are rejected") {
    const std::vector<PredictionRecord> recs{
        PredictionRecord::subvolume("p", "m", 0, FlipSpec{}, Label::Covid, 0.75),
        PredictionRecord::subvolume("p", "m", 0, FlipSpec{}, Label::Covid, 0.8),
    };
    CHECK(code_of([&] { FileBackedPredictor(recs, "m"); }) == ErrorCode::InvariantViolation);
}

TEST_CASE("synthetic predictor at zero noise is certain on clean classes") {
    SyntheticPredictorConfig cfg;
    cfg.noise_sigma = 0.0;
    cfg.lesion_prob_covid = 1.0;
    cfg.lesion_prob_noncovid = 0.0;
    const SyntheticPredictor sp(cfg);
    for (std::size_t n : {20u, 255u, 300u, 700u}) {
        for (const auto& plan : sampling::inference_subvolumes(n)) {
            for (const auto& t : sampling::tta_variants(plan)) {
                const auto c = sp.predict_subvolume({"c" + std::to_string(n), n, Label::Covid}, t);
                CHECK(c.label == Label::Covid);
                CHECK(c.confidence == 1.0);
                const auto h = sp.predict_subvolume({"h" + std::to_string(n), n, Label::NonCovid}, t);
                CHECK(h.label == Label::NonCovid);
                CHECK(h.confidence == 1.0);
            }
        }
    }
}

TEST_CASE("synthetic slices put lesion mass in the middle") {
    SyntheticPredictorConfig cfg;
    cfg.noise_sigma = 0.0;
    cfg.lesion_prob_covid = 1.0;
    const SyntheticPredictor sp(cfg);
    const VolumeKey vol{"patient", 100, Label::Covid};
    const auto probs = sp.predict_slices(vol);
    REQUIRE(probs.size() == 100);
    const auto [first, last] = sp.band(100);
    CHECK(first == 25);
    CHECK(last == 75);
    for (std::size_t i = 0; i < 100; ++i) {
        const bool central = i >= first && i < last;
        CHECK((probs[i][0] > probs[i][2]) == central);
    }
}

TEST_CASE("synthetic slice outputs are distributions and reproducible") {
    SyntheticPredictorConfig cfg;
    cfg.noise_sigma = 1.5;
    cfg.seed = 17;
    const SyntheticPredictor a(cfg, "m"), b(cfg, "m"), other(cfg, "other");
    const VolumeKey vol{"x", 64, Label::NonCovid};
    const auto pa = a.predict_slices(vol);
    CHECK(pa == b.predict_slices(vol));
    CHECK(pa != other.predict_slices(vol));
    for (const auto& p : pa) {
        CHECK(std::abs(p[0] + p[1] + p[2] - 1.0) <= 1e-9);
        for (double v : p) CHECK(v >= 0.0);
    }
    // The lesion map is shared between models.
    for (std::size_t i = 0; i < 64; ++i) CHECK(a.has_lesion(vol, i) == other.has_lesion(vol, i));

    const auto plan = tta(600, 1, FlipSpec{false, true, false});
    const auto va = a.predict_subvolume({"x", 600, Label::Covid}, plan);
    const auto vb = b.predict_subvolume({"x", 600, Label::Covid}, plan);
    CHECK(va.label == vb.label);
    CHECK(va.confidence == vb.confidence);
    CHECK(va.confidence >= 0.5);
    CHECK(va.confidence <= 1.0);
}

TEST_CASE("synthetic predictor needs ground truth") {
    const SyntheticPredictor sp(SyntheticPredictorConfig{});
    CHECK(code_of([&] { sp.predict_slices({"x", 10, std::nullopt}); }) == ErrorCode::MissingPrediction);
    CHECK(code_of([&] { sp.predict_slices({"x", 0, Label::Covid}); }) == ErrorCode::MissingPrediction);
    SyntheticPredictorConfig bad;
    bad.noise_sigma = -1.0;
    CHECK(code_of([&] { SyntheticPredictor{bad}; }) == ErrorCode::OutOfRange);
}
