#include "sdan/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <vector>

namespace sdan {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    if (s.size() < suffix.size()) return false;
    std::string tail = s.substr(s.size() - suffix.size());
    for (auto& ch : tail) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return tail == suffix;
}

unsigned char quantize(float v) {
    float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    return static_cast<unsigned char>(std::lround(c * 255.f));
}

// Interleaved 8-bit RGB rows -> (1,3,h,w) tensor.
Tensor tensor_from_rgb8(const std::vector<unsigned char>& rgb, int h, int w) {
    Tensor t(1, 3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < 3; ++ch)
                t.at(0, ch, y, x) = static_cast<float>(rgb[(y * w + x) * 3 + ch]) / 255.f;
    return t;
}

std::vector<unsigned char> rgb8_from_tensor(const Tensor& img) {
    const int h = img.h, w = img.w;
    std::vector<unsigned char> rgb(static_cast<size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                int src_ch = img.c == 1 ? 0 : ch;
                rgb[(y * w + x) * 3 + ch] = quantize(img.at(0, src_ch, y, x));
            }
    return rgb;
}

int ppm_read_token(std::istream& in) {
    // skips whitespace and '#' comments
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
            continue;
        } else {
            break;
        }
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c)) return -1;
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

Tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '6') throw IoError("not a P6 PPM: " + path);
    int w = ppm_read_token(in);
    int h = ppm_read_token(in);
    int maxval = ppm_read_token(in);
    if (w <= 0 || h <= 0 || maxval != 255) throw IoError("bad P6 header in " + path);
    // header ends with exactly one whitespace byte, already consumed by the
    // token reader
    std::vector<unsigned char> rgb(static_cast<size_t>(h) * w * 3);
    in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!in) throw IoError("truncated P6 payload in " + path);
    return tensor_from_rgb8(rgb, h, w);
}

void write_ppm(const std::string& path, const Tensor& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    auto rgb = rgb8_from_tensor(img);
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!out) throw IoError("write failed: " + path);
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

Tensor read_png(const std::string& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("malformed PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    std::vector<unsigned char> rgb(static_cast<size_t>(h) * w * 3);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = rgb.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return tensor_from_rgb8(rgb, h, w);
}

void write_png(const std::string& path, const Tensor& img) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for write: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    auto rgb = rgb8_from_tensor(img);
    std::vector<png_bytep> rows(img.h);
    for (int y = 0; y < img.h; ++y) rows[y] = rgb.data() + static_cast<size_t>(y) * img.w * 3;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

Tensor read_image(const std::string& path) {
    if (ends_with(path, ".ppm")) return read_ppm(path);
    if (ends_with(path, ".png")) return read_png(path);
    throw IoError("unsupported image extension (want .png or .ppm): " + path);
}

void write_image(const std::string& path, const Tensor& img) {
    if (img.n != 1 || (img.c != 3 && img.c != 1))
        throw DimError("write_image: want (1,3,h,w) or (1,1,h,w), got " + img.shape_str());
    if (ends_with(path, ".ppm"))
        write_ppm(path, img);
    else if (ends_with(path, ".png"))
        write_png(path, img);
    else
        throw IoError("unsupported image extension (want .png or .ppm): " + path);
}

}  // namespace sdan
