#include "ctvote/aggregate.hpp"

#include <cmath>

#include "ctvote/error.hpp"
#include "ctvote/preprocess.hpp"
#include "ctvote/text.hpp"

namespace ctvote::aggregate {

namespace {

void check_probability(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorCode::OutOfRange, std::string(name) + " must lie in [0,1], got " + text::exact(v));
    }
}

Label mode_of(std::size_t covid, std::size_t noncovid, Label tie_break) {
    if (covid == noncovid) return tie_break;
    return covid > noncovid ? Label::Covid : Label::NonCovid;
}

}  // namespace

Label majority_vote(std::span<const Label> labels, Label tie_break) {
    if (labels.empty()) throw Error(ErrorCode::EmptyPredictions, "majority vote over no labels");
    std::size_t covid = 0;
    for (Label l : labels) covid += l == Label::Covid ? 1 : 0;
    return mode_of(covid, labels.size() - covid, tie_break);
}

Label threshold_vote(std::span<const Vote> votes, const VoteThresholds& t, Label tie_break) {
    if (votes.empty()) throw Error(ErrorCode::EmptyPredictions, "threshold vote over no predictions");
    check_probability(t.t_noncovid, "t_noncovid");
    check_probability(t.t_all, "t_all");

    std::size_t covid = 0, noncovid = 0;
    std::size_t all_covid = 0;
    for (const auto& v : votes) {
        if (v.label == Label::Covid) ++all_covid;
        if (v.confidence < t.t_all) continue;
        if (v.label == Label::NonCovid && v.confidence < t.t_noncovid) continue;
        (v.label == Label::Covid ? covid : noncovid) += 1;
    }
    if (covid + noncovid == 0) return mode_of(all_covid, votes.size() - all_covid, tie_break);
    return mode_of(covid, noncovid, tie_break);
}

Label pool_ensemble(const std::map<std::string, std::vector<Vote>>& per_model, const VoteThresholds& t,
                    Label tie_break) {
    std::vector<Vote> pool;
    for (const auto& [model, votes] : per_model) pool.insert(pool.end(), votes.begin(), votes.end());
    if (pool.empty()) throw Error(ErrorCode::EmptyPredictions, "ensemble has no predictions");
    return threshold_vote(pool, t, tie_break);
}

std::vector<std::pair<std::size_t, SliceClass>> filter_slices(std::span<const SliceProbs> slice_probs,
                                                              const SliceFilterConfig& cfg) {
    if (slice_probs.empty()) throw Error(ErrorCode::EmptyPredictions, "slice filter over no slices");
    check_probability(cfg.lo, "lo");
    check_probability(cfg.hi, "hi");
    if (cfg.lo > cfg.hi) throw Error(ErrorCode::OutOfRange, "lo must not exceed hi");
    if (!(cfg.central_fraction > 0.0 && cfg.central_fraction <= 1.0)) {
        throw Error(ErrorCode::OutOfRange, "central_fraction must lie in (0,1]");
    }
    const double n = static_cast<double>(slice_probs.size());
    const double band_lo = n * (1.0 - cfg.central_fraction) / 2.0;
    const double band_hi = n * (1.0 + cfg.central_fraction) / 2.0;

    std::vector<std::pair<std::size_t, SliceClass>> kept;
    for (std::size_t i = 0; i < slice_probs.size(); ++i) {
        const double healthy = slice_probs[i][2];
        const double pos = static_cast<double>(i);
        if (healthy >= cfg.hi && pos >= band_lo && pos <= band_hi) {
            kept.emplace_back(i, SliceClass::Healthy);
        } else if (healthy <= cfg.lo) {
            kept.emplace_back(i, SliceClass::Lesion);
        }
    }
    return kept;
}

std::vector<double> FeatureMatrix::flatten() const {
    std::vector<double> flat;
    flat.reserve(kFeatureSize);
    for (const auto& row : rows) flat.insert(flat.end(), row.begin(), row.end());
    return flat;
}

FeatureMatrix FeatureMatrix::from_flat(std::span<const double> flat) {
    if (flat.size() != kFeatureSize) {
        throw Error(ErrorCode::DimensionMismatch,
                    "feature vector has " + std::to_string(flat.size()) + " entries, expected 288");
    }
    FeatureMatrix m;
    for (std::size_t r = 0; r < kFeatureRows; ++r) {
        for (std::size_t c = 0; c < kFeatureCols; ++c) m.rows[r][c] = flat[r * kFeatureCols + c];
    }
    return m;
}

FeatureMatrix assemble_features(std::span<const SliceProbs> slice_probs) {
    if (slice_probs.empty()) throw Error(ErrorCode::EmptyPredictions, "no slice predictions to assemble");
    FeatureMatrix m;
    const auto idx = preprocess::depth_resize_indices(slice_probs.size(), kFeatureRows);
    for (std::size_t r = 0; r < kFeatureRows; ++r) m.rows[r] = slice_probs[idx[r]];
    return m;
}

}  // namespace ctvote::aggregate
