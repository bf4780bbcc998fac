// File I/O: PNG and binary PGM images, plain-text kernel matrices.
// Intensities are quantized to 8 bits at the file boundary only.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <png.h>

#include "msls/image.hpp"

namespace msls {

struct ColorImage {
    std::vector<ImageBuffer> planes;  // 1 (gray) or 3 (RGB)

    int width() const { return planes.empty() ? 0 : planes[0].width(); }
    int height() const { return planes.empty() ? 0 : planes[0].height(); }

    ImageBuffer luminance() const {
        if (planes.size() == 1) return planes[0];
        ImageBuffer out(width(), height());
        for (size_t i = 0; i < out.size(); ++i)
            out.data()[i] = 0.299 * planes[0].data()[i] + 0.587 * planes[1].data()[i] +
                            0.114 * planes[2].data()[i];
        return out;
    }
};

namespace detail {

inline uint8_t to_byte(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return static_cast<uint8_t>(std::lround(v * 255.0));
}

struct PngReadCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngReadCloser() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWriteCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngWriteCloser() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

inline ColorImage load_png(const std::string& path) {
    PngReadCloser c;
    c.fp = std::fopen(path.c_str(), "rb");
    if (!c.fp) throw Error("cannot open image file: " + path);
    c.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    c.info = png_create_info_struct(c.png);
    if (setjmp(png_jmpbuf(c.png))) throw Error("corrupt or truncated PNG: " + path);
    png_init_io(c.png, c.fp);
    png_read_info(c.png, c.info);

    png_uint_32 w = png_get_image_width(c.png, c.info);
    png_uint_32 h = png_get_image_height(c.png, c.info);
    int depth = png_get_bit_depth(c.png, c.info);
    int color = png_get_color_type(c.png, c.info);
    if (depth == 16) png_set_strip_16(c.png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(c.png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(c.png);
    if (png_get_valid(c.png, c.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(c.png);
    png_set_strip_alpha(c.png);
    png_read_update_info(c.png, c.info);

    int channels = png_get_channels(c.png, c.info);
    if (channels != 1 && channels != 3) throw Error("unsupported PNG channel count: " + path);

    std::vector<uint8_t> row(static_cast<size_t>(w) * channels);
    ColorImage img;
    for (int ch = 0; ch < channels; ++ch)
        img.planes.emplace_back(static_cast<int>(w), static_cast<int>(h));
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(c.png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x)
            for (int ch = 0; ch < channels; ++ch)
                img.planes[ch].at(static_cast<int>(x), static_cast<int>(y)) =
                    row[x * channels + ch] / 255.0;
    }
    png_read_end(c.png, nullptr);
    return img;
}

inline void save_png(const ColorImage& img, const std::string& path) {
    PngWriteCloser c;
    c.fp = std::fopen(path.c_str(), "wb");
    if (!c.fp) throw Error("cannot write image file: " + path);
    c.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    c.info = png_create_info_struct(c.png);
    if (setjmp(png_jmpbuf(c.png))) throw Error("PNG write failed: " + path);
    png_init_io(c.png, c.fp);
    const int channels = static_cast<int>(img.planes.size());
    png_set_IHDR(c.png, c.info, img.width(), img.height(), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(c.png, c.info);
    std::vector<uint8_t> row(static_cast<size_t>(img.width()) * channels);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x)
            for (int ch = 0; ch < channels; ++ch)
                row[static_cast<size_t>(x) * channels + ch] = to_byte(img.planes[ch].at(x, y));
        png_write_row(c.png, row.data());
    }
    png_write_end(c.png, nullptr);
}

inline ColorImage load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image file: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw Error("unsupported PGM format (expect binary P5): " + path);
    auto next_token = [&in, &path]() {
        std::string tok;
        for (;;) {
            if (!(in >> tok)) throw Error("corrupt or truncated PGM: " + path);
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
    };
    int w = std::stoi(next_token());
    int h = std::stoi(next_token());
    int maxval = std::stoi(next_token());
    if (maxval != 255) throw Error("unsupported PGM bit depth: " + path);
    in.get();  // single whitespace after header
    std::vector<uint8_t> buf(static_cast<size_t>(w) * h);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
        throw Error("corrupt or truncated PGM: " + path);
    ColorImage img;
    img.planes.emplace_back(w, h);
    for (size_t i = 0; i < buf.size(); ++i) img.planes[0].data()[i] = buf[i] / 255.0;
    return img;
}

inline void save_pgm(const ImageBuffer& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write image file: " + path);
    out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<uint8_t> buf(img.size());
    for (size_t i = 0; i < img.size(); ++i) buf[i] = to_byte(img.data()[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline bool has_ext(const std::string& path, const char* ext) {
    auto e = std::filesystem::path(path).extension().string();
    for (auto& ch : e) ch = static_cast<char>(std::tolower(ch));
    return e == ext;
}

}  // namespace detail

inline ColorImage load_color(const std::string& path) {
    if (detail::has_ext(path, ".pgm")) return detail::load_pgm(path);
    if (detail::has_ext(path, ".png")) return detail::load_png(path);
    throw Error("unsupported image format: " + path);
}

// Loads as single-channel luminance.
inline ImageBuffer load_image(const std::string& path) {
    return load_color(path).luminance();
}

inline void save_image(const ImageBuffer& img, const std::string& path) {
    if (detail::has_ext(path, ".pgm")) {
        detail::save_pgm(img, path);
    } else if (detail::has_ext(path, ".png")) {
        detail::save_png(ColorImage{{img}}, path);
    } else {
        throw Error("unsupported image format: " + path);
    }
}

inline void save_color(const ColorImage& img, const std::string& path) {
    if (detail::has_ext(path, ".png")) {
        detail::save_png(img, path);
    } else if (detail::has_ext(path, ".pgm") && img.planes.size() == 1) {
        detail::save_pgm(img.planes[0], path);
    } else {
        throw Error("unsupported image format: " + path);
    }
}

// Kernel text format: header line "h w", then rows of decimals.
inline void save_kernel_text(const BlurKernel& k, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write kernel file: " + path);
    out << k.size() << " " << k.size() << "\n";
    out.precision(17);
    for (int v = 0; v < k.size(); ++v) {
        for (int u = 0; u < k.size(); ++u) out << k.at(u, v) << (u + 1 < k.size() ? " " : "\n");
    }
}

inline BlurKernel load_kernel_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open kernel file: " + path);
    int h = 0, w = 0;
    if (!(in >> h >> w) || h != w || h <= 0 || h % 2 == 0)
        throw Error("bad kernel header (expect odd square size): " + path);
    BlurKernel k(h);
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u)
            if (!(in >> k.at(u, v))) throw Error("corrupt or truncated kernel file: " + path);
    k.normalize();
    return k;
}

// Kernel rendered as an image, max-scaled.
inline void save_kernel_image(const BlurKernel& k, const std::string& path) {
    double mx = 0.0;
    for (double w : k.weights()) mx = std::max(mx, w);
    ImageBuffer img(k.size(), k.size());
    if (mx > 0.0)
        for (int v = 0; v < k.size(); ++v)
            for (int u = 0; u < k.size(); ++u) img.at(u, v) = k.at(u, v) / mx;
    save_image(img, path);
}

}  // namespace msls
