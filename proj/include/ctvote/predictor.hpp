#pragma once

// The classifier contract consumed by the aggregation stage. Deep networks run
// outside this harness and report through prediction files; the synthetic
// predictor stands in for them in end-to-end tests.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "ctvote/aggregate.hpp"
#include "ctvote/ct_ingest.hpp"
#include "ctvote/sampling.hpp"

namespace ctvote::predictor {

using aggregate::SliceProbs;
using aggregate::Vote;

// What a predictor is allowed to know about a volume.
struct VolumeKey {
    std::string patient_id;
    std::size_t slice_count = 0;  // 0 = unknown
    std::optional<Label> truth;   // used only by the synthetic predictor
};

class Predictor {
public:
    virtual ~Predictor() = default;

    virtual const std::string& model_id() const = 0;
    virtual Vote predict_subvolume(const VolumeKey& volume, const sampling::TtaPlan& plan) const = 0;
    virtual std::vector<SliceProbs> predict_slices(const VolumeKey& volume) const = 0;
};

// Replays one model's records from a prediction file.
class FileBackedPredictor final : public Predictor {
public:
    // Keeps only records whose model_id matches; duplicate keys are rejected.
    FileBackedPredictor(const std::vector<PredictionRecord>& records, std::string model_id);

    const std::string& model_id() const override { return model_id_; }
    Vote predict_subvolume(const VolumeKey& volume, const sampling::TtaPlan& plan) const override;

    // With slice_count == 0 the expected slice set is 0..max recorded index.
    std::vector<SliceProbs> predict_slices(const VolumeKey& volume) const override;

    std::set<std::string> patients() const;

private:
    using SubvolumeKey = std::tuple<std::string, std::size_t, std::string>;  // patient, start, flips

    std::string model_id_;
    std::map<SubvolumeKey, Vote> subvolumes_;
    std::map<std::string, std::map<std::size_t, SliceProbs>> slices_;
};

// Distinct model ids in file order of first appearance.
std::vector<std::string> model_ids(const std::vector<PredictionRecord>& records);

struct SyntheticPredictorConfig {
    double lesion_prob_covid = 0.9;
    double lesion_prob_noncovid = 0.05;
    double noise_sigma = 0.5;
    std::uint64_t seed = 0;
    double band_fraction = 0.5;  // lesions live in this central fraction of the slices
};

// Generative stand-in for a trained network. Each volume has a latent lesion
// map: slices inside the central band carry a lesion with the class-dependent
// probability, slices outside never do. The map depends only on (seed,
// patient), so every model built from the same config sees the same anatomy;
// the additive noise is additionally keyed by model id.
//
// Slices: lesion slices emit softmax(log(0.80, 0.10, 0.10) + noise), others
// softmax(log(0.05, 0.10, 0.85) + noise), noise ~ N(0, sigma) per logit.
// Sub-volumes: e = lesion fraction over the plan's slices inside the band,
// p = clamp(e + N(0, sigma), 0, 1); label COVID iff p >= 0.5, confidence is
// the probability of the emitted label.
class SyntheticPredictor final : public Predictor {
public:
    explicit SyntheticPredictor(SyntheticPredictorConfig cfg, std::string model_id = "synthetic");

    const std::string& model_id() const override { return model_id_; }
    Vote predict_subvolume(const VolumeKey& volume, const sampling::TtaPlan& plan) const override;
    std::vector<SliceProbs> predict_slices(const VolumeKey& volume) const override;

    // Half-open central band [first, last) of slice indices.
    std::pair<std::size_t, std::size_t> band(std::size_t slice_count) const;
    bool has_lesion(const VolumeKey& volume, std::size_t slice) const;

private:
    void require_truth(const VolumeKey& volume) const;

    SyntheticPredictorConfig cfg_;
    std::string model_id_;
};

}  // namespace ctvote::predictor
