#pragma once

// Slice-index selection for training crops, inference sub-volumes and
// flip-based test-time augmentation.
//
// A volume of n slices with n >= k*target (k = floor(n/target)) is read as an
// arithmetic progression start, start+k, start+2k, ... with start in [0, k].
// Progressions longer than target are truncated to their first `target`
// entries; shorter ones are padded by repeating their last index.

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ctvote/flip_spec.hpp"

namespace ctvote::sampling {

inline constexpr std::size_t kTrainLength = 128;
inline constexpr std::size_t kInferenceLength = 256;

struct SubVolumePlan {
    std::size_t start = 0;
    std::size_t stride = 1;
    std::vector<std::size_t> indices;  // real slices, strictly increasing
    std::size_t pad_count = 0;
    std::size_t target_len = kTrainLength;

    // indices followed by pad_count copies of the last index
    std::vector<std::size_t> entries() const;

    bool operator==(const SubVolumePlan&) const = default;
};

struct TtaPlan {
    SubVolumePlan subvolume;
    FlipSpec flips;
};

// Plan for a given start; exposed so callers can replay a recorded start.
SubVolumePlan plan_from_start(std::size_t n, std::size_t start, std::size_t target_len);

// One random crop for training. The start is drawn uniformly from [0, k]
// with a generator seeded by `seed`.
SubVolumePlan train_sample(std::size_t n, std::uint64_t seed, std::size_t target_len = kTrainLength);

// Every start in [0, k]; a single stride-1 plan when n < target_len.
std::vector<SubVolumePlan> inference_subvolumes(std::size_t n, std::size_t target_len = kInferenceLength);

// The 8 flip combinations, (h, v, d) counted as a binary number from 000 to 111.
std::array<FlipSpec, 8> all_flips();

std::vector<TtaPlan> tta_variants(const SubVolumePlan& plan);

}  // namespace ctvote::sampling
