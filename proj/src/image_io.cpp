#include "ctvote/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "ctvote/error.hpp"

namespace ctvote::image_io {

namespace fs = std::filesystem;

namespace {

std::string lower_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

[[noreturn]] void undecodable(const fs::path& path, const std::string& why) {
    throw Error(ErrorCode::UndecodableImage, path.string() + ": " + why);
}

Image from_bytes(std::size_t w, std::size_t h, const std::vector<unsigned char>& bytes) {
    Image img(w, h);
    for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
    return img;
}

std::vector<unsigned char> to_bytes(const Image& img) {
    std::vector<unsigned char> bytes(img.data.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const double v = std::clamp(img.data[i], 0.0, 1.0) * 255.0;
        bytes[i] = static_cast<unsigned char>(v + 0.5);
    }
    return bytes;
}

// --- PGM (P2 ascii / P5 binary, maxval <= 255) ------------------------------

bool read_pgm_token(std::istream& in, std::string& token) {
    token.clear();
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!token.empty()) return true;
            continue;
        }
        token.push_back(c);
    }
    return !token.empty();
}

Image decode_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) undecodable(path, "cannot open");
    std::string magic, ws, hs, ms;
    if (!read_pgm_token(in, magic) || (magic != "P5" && magic != "P2")) undecodable(path, "not a PGM");
    if (!read_pgm_token(in, ws) || !read_pgm_token(in, hs) || !read_pgm_token(in, ms)) {
        undecodable(path, "truncated header");
    }
    long w = 0, h = 0, maxval = 0;
    try {
        w = std::stol(ws);
        h = std::stol(hs);
        maxval = std::stol(ms);
    } catch (const std::exception&) {
        undecodable(path, "bad header");
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) undecodable(path, "unsupported dimensions or depth");
    const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    std::vector<unsigned char> bytes(n);
    if (magic == "P5") {
        in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) undecodable(path, "truncated pixel data");
    } else {
        std::string tok;
        for (auto& b : bytes) {
            if (!read_pgm_token(in, tok)) undecodable(path, "truncated pixel data");
            const int v = std::stoi(tok);
            if (v < 0 || v > maxval) undecodable(path, "pixel out of range");
            b = static_cast<unsigned char>(v);
        }
    }
    if (maxval != 255) {
        for (auto& b : bytes) b = static_cast<unsigned char>((b * 255 + maxval / 2) / maxval);
    }
    return from_bytes(static_cast<std::size_t>(w), static_cast<std::size_t>(h), bytes);
}

// --- PNG via the libpng simplified API --------------------------------------

Image decode_png(const fs::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        undecodable(path, image.message);
    }
    image.format = PNG_FORMAT_GRAY;
    std::vector<unsigned char> bytes(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        undecodable(path, msg);
    }
    return from_bytes(image.width, image.height, bytes);
}

// --- JPEG via libjpeg ---------------------------------------------------------

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, mgr->message);
    std::longjmp(mgr->jump, 1);
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image decode_jpeg(const fs::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) undecodable(path, "cannot open");

    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    // Heap-held so nothing the longjmp path relies on is a local modified after setjmp.
    auto bytes = std::make_unique<std::vector<unsigned char>>();

    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        undecodable(path, err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_GRAYSCALE;
    jpeg_start_decompress(&cinfo);
    const std::size_t w = cinfo.output_width;
    const std::size_t h = cinfo.output_height;
    bytes->resize(w * h);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = bytes->data() + static_cast<std::size_t>(cinfo.output_scanline) * w;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return from_bytes(w, h, *bytes);
}

}  // namespace

bool is_image_path(const fs::path& path) {
    const auto ext = lower_extension(path);
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".pgm";
}

Image decode(const fs::path& path) {
    const auto ext = lower_extension(path);
    if (ext == ".jpg" || ext == ".jpeg") return decode_jpeg(path);
    if (ext == ".png") return decode_png(path);
    if (ext == ".pgm") {
        try {
            return decode_pgm(path);
        } catch (const std::logic_error&) {  // stoi on a garbage pixel token
            undecodable(path, "bad pixel token");
        }
    }
    undecodable(path, "unsupported extension");
}

void write_pgm(const Image& img, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    const auto bytes = to_bytes(img);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

void write_png(const Image& img, const fs::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_GRAY;
    const auto bytes = to_bytes(img);
    if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
        throw Error(ErrorCode::IoFailure, path.string() + ": " + image.message);
    }
}

void write_jpeg(const Image& img, const fs::path& path, int quality) {
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());

    jpeg_compress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    auto bytes = to_bytes(img);

    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        throw Error(ErrorCode::IoFailure, path.string() + ": " + err.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, file.get());
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = 1;
    cinfo.in_color_space = JCS_GRAYSCALE;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = bytes.data() + static_cast<std::size_t>(cinfo.next_scanline) * img.width;
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
}

}  // namespace ctvote::image_io
