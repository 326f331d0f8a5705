#include "ctvote/predictor.hpp"

#include <algorithm>
#include <cmath>

#include "ctvote/error.hpp"
#include "ctvote/rng.hpp"
#include "ctvote/text.hpp"

namespace ctvote::predictor {

// ---------------------------------------------------------------------------
// File-backed

FileBackedPredictor::FileBackedPredictor(const std::vector<PredictionRecord>& records, std::string model_id)
    : model_id_(std::move(model_id)) {
    for (const auto& r : records) {
        if (r.model_id != model_id_) continue;
        validate(r);
        if (r.kind == RecordKind::Subvolume) {
            SubvolumeKey key{r.patient_id, *r.subvolume_start, r.flips->digits()};
            if (!subvolumes_.emplace(key, Vote{*r.label, *r.confidence}).second) {
                throw Error(ErrorCode::InvariantViolation, "duplicate SUBVOLUME record for " + r.patient_id +
                                                               " start " + std::to_string(*r.subvolume_start) +
                                                               " flips " + r.flips->digits());
            }
        } else {
            if (!slices_[r.patient_id].emplace(*r.slice_index, *r.probs).second) {
                throw Error(ErrorCode::InvariantViolation,
                            "duplicate SLICE record for " + r.patient_id + " slice " + std::to_string(*r.slice_index));
            }
        }
    }
}

Vote FileBackedPredictor::predict_subvolume(const VolumeKey& volume, const sampling::TtaPlan& plan) const {
    const SubvolumeKey key{volume.patient_id, plan.subvolume.start, plan.flips.digits()};
    const auto it = subvolumes_.find(key);
    if (it == subvolumes_.end()) {
        throw Error(ErrorCode::MissingPrediction, "model " + model_id_ + " has no prediction for " +
                                                      volume.patient_id + " start " +
                                                      std::to_string(plan.subvolume.start) + " flips " +
                                                      plan.flips.digits());
    }
    return it->second;
}

std::vector<SliceProbs> FileBackedPredictor::predict_slices(const VolumeKey& volume) const {
    const auto it = slices_.find(volume.patient_id);
    if (it == slices_.end() || it->second.empty()) {
        throw Error(ErrorCode::MissingPrediction,
                    "model " + model_id_ + " has no slice predictions for " + volume.patient_id);
    }
    const auto& by_index = it->second;
    const std::size_t expected = volume.slice_count > 0 ? volume.slice_count : by_index.rbegin()->first + 1;
    std::vector<SliceProbs> out;
    out.reserve(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        const auto s = by_index.find(i);
        if (s == by_index.end()) {
            throw Error(ErrorCode::IncompleteSliceSet,
                        volume.patient_id + " is missing slice " + std::to_string(i) + " of " + std::to_string(expected));
        }
        out.push_back(s->second);
    }
    if (by_index.rbegin()->first >= expected) {
        throw Error(ErrorCode::IncompleteSliceSet, volume.patient_id + " has slice predictions beyond slice " +
                                                       std::to_string(expected - 1));
    }
    return out;
}

std::set<std::string> FileBackedPredictor::patients() const {
    std::set<std::string> out;
    for (const auto& [key, vote] : subvolumes_) out.insert(std::get<0>(key));
    for (const auto& [patient, slices] : slices_) out.insert(patient);
    return out;
}

std::vector<std::string> model_ids(const std::vector<PredictionRecord>& records) {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& r : records) {
        if (seen.insert(r.model_id).second) ids.push_back(r.model_id);
    }
    return ids;
}

// ---------------------------------------------------------------------------
// Synthetic

namespace {

constexpr SliceProbs kLesionProbs{0.80, 0.10, 0.10};
constexpr SliceProbs kHealthyProbs{0.05, 0.10, 0.85};

// Stream tags keep the lesion map, slice noise and sub-volume noise independent.
enum Stream : std::uint64_t { kLesion = 1, kSliceNoise = 2, kSubvolumeNoise = 3 };

rng::Engine stream(std::uint64_t seed, Stream tag, std::string_view patient, std::string_view model,
                   std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = rng::derive(seed, tag);
    s = rng::derive(s, rng::fnv1a(patient));
    s = rng::derive(s, rng::fnv1a(model));
    s = rng::derive(s, a);
    s = rng::derive(s, b);
    return rng::Engine(s);
}

SliceProbs noisy_softmax(const SliceProbs& base, double sigma, rng::Engine& eng) {
    std::array<double, 3> logits{};
    for (std::size_t c = 0; c < 3; ++c) logits[c] = std::log(base[c]) + (sigma > 0.0 ? sigma * rng::normal(eng) : 0.0);
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (auto& z : logits) {
        z = std::exp(z - top);
        sum += z;
    }
    SliceProbs out{};
    for (std::size_t c = 0; c < 3; ++c) out[c] = logits[c] / sum;
    return out;
}

}  // namespace

SyntheticPredictor::SyntheticPredictor(SyntheticPredictorConfig cfg, std::string model_id)
    : cfg_(cfg), model_id_(std::move(model_id)) {
    const auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob_ok(cfg_.lesion_prob_covid) || !prob_ok(cfg_.lesion_prob_noncovid)) {
        throw Error(ErrorCode::OutOfRange, "lesion probabilities must lie in [0,1]");
    }
    if (!(cfg_.noise_sigma >= 0.0)) throw Error(ErrorCode::OutOfRange, "noise_sigma must be >= 0");
    if (!(cfg_.band_fraction > 0.0 && cfg_.band_fraction <= 1.0)) {
        throw Error(ErrorCode::OutOfRange, "band_fraction must lie in (0,1]");
    }
}

void SyntheticPredictor::require_truth(const VolumeKey& volume) const {
    if (!volume.truth || volume.slice_count == 0) {
        throw Error(ErrorCode::MissingPrediction,
                    "synthetic predictor needs the label and slice count of " + volume.patient_id);
    }
}

std::pair<std::size_t, std::size_t> SyntheticPredictor::band(std::size_t n) const {
    const double c = cfg_.band_fraction;
    auto first = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - c) / 2.0));
    auto last = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * (1.0 + c) / 2.0));
    first = std::min(first, n - 1);
    last = std::clamp(last, first + 1, n);
    return {first, last};
}

bool SyntheticPredictor::has_lesion(const VolumeKey& volume, std::size_t slice) const {
    require_truth(volume);
    const auto [first, last] = band(volume.slice_count);
    if (slice < first || slice >= last) return false;
    const double p = *volume.truth == Label::Covid ? cfg_.lesion_prob_covid : cfg_.lesion_prob_noncovid;
    auto eng = stream(cfg_.seed, kLesion, volume.patient_id, "", slice);
    return rng::uniform01(eng) < p;
}

std::vector<SliceProbs> SyntheticPredictor::predict_slices(const VolumeKey& volume) const {
    require_truth(volume);
    std::vector<SliceProbs> out;
    out.reserve(volume.slice_count);
    for (std::size_t i = 0; i < volume.slice_count; ++i) {
        auto eng = stream(cfg_.seed, kSliceNoise, volume.patient_id, model_id_, i);
        out.push_back(noisy_softmax(has_lesion(volume, i) ? kLesionProbs : kHealthyProbs, cfg_.noise_sigma, eng));
    }
    return out;
}

Vote SyntheticPredictor::predict_subvolume(const VolumeKey& volume, const sampling::TtaPlan& plan) const {
    require_truth(volume);
    const auto [first, last] = band(volume.slice_count);
    std::size_t in_band = 0, lesions = 0;
    for (std::size_t idx : plan.subvolume.indices) {
        if (idx >= volume.slice_count) {
            throw Error(ErrorCode::IndexOutOfRange, "plan index " + std::to_string(idx) + " beyond volume " +
                                                        volume.patient_id);
        }
        if (idx < first || idx >= last) continue;
        ++in_band;
        lesions += has_lesion(volume, idx) ? 1 : 0;
    }
    double p = in_band == 0 ? 0.0 : static_cast<double>(lesions) / static_cast<double>(in_band);
    if (cfg_.noise_sigma > 0.0) {
        const auto flips = static_cast<std::uint64_t>(plan.flips.horizontal) << 2 |
                           static_cast<std::uint64_t>(plan.flips.vertical) << 1 |
                           static_cast<std::uint64_t>(plan.flips.depth);
        auto eng = stream(cfg_.seed, kSubvolumeNoise, volume.patient_id, model_id_, plan.subvolume.start, flips);
        p = std::clamp(p + cfg_.noise_sigma * rng::normal(eng), 0.0, 1.0);
    }
    return p >= 0.5 ? Vote{Label::Covid, p} : Vote{Label::NonCovid, 1.0 - p};
}

}  // namespace ctvote::predictor
