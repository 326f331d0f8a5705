#pragma once

// Image and volume transforms applied ahead of prediction.

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ctvote/ct_ingest.hpp"
#include "ctvote/error.hpp"
#include "ctvote/flip_spec.hpp"

namespace ctvote::preprocess {

// Inclusive pixel bounds.
struct BBox {
    std::size_t row_min = 0;
    std::size_t col_min = 0;
    std::size_t row_max = 0;
    std::size_t col_max = 0;

    bool operator==(const BBox&) const = default;
};

// Previous, current and next slice stacked as three channels.
struct MiniVolume {
    std::array<Image, 3> channels;
    std::array<std::size_t, 3> source_indices{};
};

constexpr double kDefaultForegroundThreshold = 0.05;

// Tight bounding box of pixels with intensity > fg_threshold, and the crop.
std::pair<Image, BBox> crop_body(const Image& img, double fg_threshold = kDefaultForegroundThreshold);

// Left half gets floor(w/2) columns.
std::pair<Image, Image> split_lungs(const Image& img);

// Bilinear interpolation with half-pixel-center alignment and edge clamping.
Image resize_bilinear(const Image& img, std::size_t out_w, std::size_t out_h);

Volume resize_volume(const Volume& vol, std::size_t out_w, std::size_t out_h);

// Edge slices duplicate themselves: i=0 gives (0,0,1).
MiniVolume build_minivolume(const Volume& vol, std::size_t i);

// Nearest-neighbour index map out[j] = floor(j*n/target).
std::vector<std::size_t> depth_resize_indices(std::size_t n, std::size_t target);

template <typename T>
std::vector<T> depth_resize(std::span<const T> items, std::size_t target) {
    if (items.empty()) throw Error(ErrorCode::EmptyInput, "depth_resize of an empty sequence");
    std::vector<T> out;
    out.reserve(target);
    for (auto idx : depth_resize_indices(items.size(), target)) out.push_back(items[idx]);
    return out;
}

template <typename T>
std::vector<T> depth_resize(const std::vector<T>& items, std::size_t target) {
    return depth_resize(std::span<const T>(items), target);
}

// Depth is a no-op for a single image.
Image flip(const Image& img, const FlipSpec& spec);
Volume flip(const Volume& vol, const FlipSpec& spec);

}  // namespace ctvote::preprocess
