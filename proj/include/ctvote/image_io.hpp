#pragma once

// 8-bit grayscale image codecs. Pixel p in [0,255] maps to p/255 on decode;
// encode rounds intensity*255 to the nearest integer.

#include <filesystem>

#include "ctvote/ct_ingest.hpp"

namespace ctvote::image_io {

bool is_image_path(const std::filesystem::path& path);

// Dispatches on the extension; throws UndecodableImage on any failure.
Image decode(const std::filesystem::path& path);

void write_pgm(const Image& img, const std::filesystem::path& path);
void write_png(const Image& img, const std::filesystem::path& path);
void write_jpeg(const Image& img, const std::filesystem::path& path, int quality = 95);

}  // namespace ctvote::image_io
