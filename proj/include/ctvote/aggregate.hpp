#pragma once

// Volume-level decisions from many sub-volume or slice predictions.

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctvote/label.hpp"

namespace ctvote::aggregate {

inline constexpr std::size_t kFeatureRows = 96;
inline constexpr std::size_t kFeatureCols = 3;
inline constexpr std::size_t kFeatureSize = kFeatureRows * kFeatureCols;

using SliceProbs = std::array<double, 3>;  // (p_covid, p_pneumonia, p_healthy)

struct Vote {
    Label label;
    double confidence;
};

struct VoteThresholds {
    double t_noncovid = 0.5;  // NON_COVID votes below this are dropped
    double t_all = 0.5;       // any vote below this is dropped
};

// Mode of the labels; ties go to `tie_break`.
Label majority_vote(std::span<const Label> labels, Label tie_break = Label::Covid);

// Drops NON_COVID votes under t_noncovid and all votes under t_all, then takes
// the mode of the survivors. If nothing survives, the mode of the unfiltered
// votes is returned.
Label threshold_vote(std::span<const Vote> votes, const VoteThresholds& t, Label tie_break = Label::Covid);

// Concatenates every model's votes into one pool, then threshold_vote.
Label pool_ensemble(const std::map<std::string, std::vector<Vote>>& per_model, const VoteThresholds& t,
                    Label tie_break = Label::Covid);

enum class SliceClass { Healthy, Lesion };

struct SliceFilterConfig {
    double lo = 0.2;
    double hi = 0.8;
    double central_fraction = 0.5;
};

// Keeps confident slices: HEALTHY when p_healthy >= hi and the slice lies in
// the central band [n(1-c)/2, n(1+c)/2]; LESION when p_healthy <= lo.
std::vector<std::pair<std::size_t, SliceClass>> filter_slices(std::span<const SliceProbs> slice_probs,
                                                              const SliceFilterConfig& cfg);

struct FeatureMatrix {
    std::array<SliceProbs, kFeatureRows> rows{};

    // Row-major, kFeatureSize entries.
    std::vector<double> flatten() const;
    static FeatureMatrix from_flat(std::span<const double> flat);

    bool operator==(const FeatureMatrix&) const = default;
};

// Nearest-neighbour depth resize of the slice rows to 96.
FeatureMatrix assemble_features(std::span<const SliceProbs> slice_probs);

}  // namespace ctvote::aggregate
