#include "ctvote/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ctvote::preprocess {

std::pair<Image, BBox> crop_body(const Image& img, double fg_threshold) {
    if (img.empty()) throw Error(ErrorCode::EmptyInput, "crop_body of an empty image");
    bool found = false;
    BBox box{img.height, img.width, 0, 0};
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c) {
            if (img.at(r, c) > fg_threshold) {
                found = true;
                box.row_min = std::min(box.row_min, r);
                box.row_max = std::max(box.row_max, r);
                box.col_min = std::min(box.col_min, c);
                box.col_max = std::max(box.col_max, c);
            }
        }
    }
    if (!found) {
        throw Error(ErrorCode::EmptyForeground, "no pixel above threshold " + std::to_string(fg_threshold));
    }
    Image out(box.col_max - box.col_min + 1, box.row_max - box.row_min + 1);
    for (std::size_t r = 0; r < out.height; ++r) {
        for (std::size_t c = 0; c < out.width; ++c) out.at(r, c) = img.at(box.row_min + r, box.col_min + c);
    }
    return {std::move(out), box};
}

std::pair<Image, Image> split_lungs(const Image& img) {
    if (img.width < 2) throw Error(ErrorCode::TooNarrow, "cannot split an image of width " + std::to_string(img.width));
    const std::size_t half = img.width / 2;
    Image left(half, img.height);
    Image right(img.width - half, img.height);
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c) {
            if (c < half) {
                left.at(r, c) = img.at(r, c);
            } else {
                right.at(r, c - half) = img.at(r, c);
            }
        }
    }
    return {std::move(left), std::move(right)};
}

namespace {

struct Tap {
    std::size_t lo;
    std::size_t hi;
    double frac;  // weight of hi
};

// Source coordinate of output pixel i under half-pixel alignment.
Tap tap_for(std::size_t i, std::size_t in_size, std::size_t out_size) {
    const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in_size - 1);
    return {lo, hi, src - static_cast<double>(lo)};
}

}  // namespace

Image resize_bilinear(const Image& img, std::size_t out_w, std::size_t out_h) {
    if (out_w == 0 || out_h == 0) throw Error(ErrorCode::ZeroTarget, "resize target must be at least 1x1");
    if (img.empty()) throw Error(ErrorCode::EmptyInput, "resize of an empty image");
    std::vector<Tap> cols(out_w);
    for (std::size_t c = 0; c < out_w; ++c) cols[c] = tap_for(c, img.width, out_w);

    Image out(out_w, out_h);
    for (std::size_t r = 0; r < out_h; ++r) {
        const Tap ty = tap_for(r, img.height, out_h);
        for (std::size_t c = 0; c < out_w; ++c) {
            const Tap& tx = cols[c];
            const double top = img.at(ty.lo, tx.lo) + tx.frac * (img.at(ty.lo, tx.hi) - img.at(ty.lo, tx.lo));
            const double bottom = img.at(ty.hi, tx.lo) + tx.frac * (img.at(ty.hi, tx.hi) - img.at(ty.hi, tx.lo));
            out.at(r, c) = std::clamp(top + ty.frac * (bottom - top), 0.0, 1.0);
        }
    }
    return out;
}

Volume resize_volume(const Volume& vol, std::size_t out_w, std::size_t out_h) {
    Volume out{vol.patient_id, {}, vol.label};
    out.slices.reserve(vol.size());
    for (const auto& s : vol.slices) out.slices.push_back(resize_bilinear(s, out_w, out_h));
    return out;
}

MiniVolume build_minivolume(const Volume& vol, std::size_t i) {
    const std::size_t n = vol.size();
    if (i >= n) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "slice " + std::to_string(i) + " of a " + std::to_string(n) + "-slice volume");
    }
    const std::size_t prev = i == 0 ? 0 : i - 1;
    const std::size_t next = std::min(i + 1, n - 1);
    return MiniVolume{{vol.slices[prev], vol.slices[i], vol.slices[next]}, {prev, i, next}};
}

std::vector<std::size_t> depth_resize_indices(std::size_t n, std::size_t target) {
    if (n == 0) throw Error(ErrorCode::EmptyInput, "depth_resize of an empty sequence");
    if (target == 0) throw Error(ErrorCode::ZeroTarget, "depth_resize target must be >= 1");
    std::vector<std::size_t> idx(target);
    for (std::size_t j = 0; j < target; ++j) idx[j] = j * n / target;
    return idx;
}

Image flip(const Image& img, const FlipSpec& spec) {
    if (!spec.horizontal && !spec.vertical) return img;
    Image out(img.width, img.height);
    for (std::size_t r = 0; r < img.height; ++r) {
        const std::size_t sr = spec.vertical ? img.height - 1 - r : r;
        for (std::size_t c = 0; c < img.width; ++c) {
            const std::size_t sc = spec.horizontal ? img.width - 1 - c : c;
            out.at(r, c) = img.at(sr, sc);
        }
    }
    return out;
}

Volume flip(const Volume& vol, const FlipSpec& spec) {
    Volume out{vol.patient_id, {}, vol.label};
    out.slices.reserve(vol.size());
    for (const auto& s : vol.slices) out.slices.push_back(flip(s, spec));
    if (spec.depth) std::reverse(out.slices.begin(), out.slices.end());
    return out;
}

}  // namespace ctvote::preprocess
