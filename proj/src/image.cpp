#include "waveblur/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <png.h>

namespace waveblur {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeMismatch("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Image read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw IoError(path + ": not a binary PGM (P5) file");
    auto next_token = [&]() -> long {
        // skip whitespace and '#' comments
        int c;
        while ((c = f.peek()) != EOF) {
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(c)) {
                f.get();
            } else {
                break;
            }
        }
        long v;
        if (!(f >> v)) throw IoError(path + ": malformed PGM header");
        return v;
    };
    long w = next_token();
    long h = next_token();
    long maxval = next_token();
    f.get();  // single whitespace before raster
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw IoError(path + ": bad PGM header");

    Image img({static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
    const std::size_t n = img.size();
    if (maxval < 256) {
        std::vector<unsigned char> buf(n);
        f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        if (!f) throw IoError(path + ": truncated PGM raster");
        for (std::size_t i = 0; i < n; ++i) img[i] = buf[i] / static_cast<double>(maxval);
    } else {
        std::vector<unsigned char> buf(2 * n);
        f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
        if (!f) throw IoError(path + ": truncated PGM raster");
        for (std::size_t i = 0; i < n; ++i) {
            unsigned v = (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];  // big-endian
            img[i] = v / static_cast<double>(maxval);
        }
    }
    return img;
}

void write_pgm(const Image& img, const std::string& path, int bit_depth) {
    if (img.ndim() != 2) throw IoError("only 2D images can be written to " + path);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    const unsigned maxval = bit_depth <= 8 ? 255u : 65535u;
    f << "P5\n" << img.dims[1] << " " << img.dims[0] << "\n" << maxval << "\n";
    for (double x : img.v) {
        double c = std::clamp(x, 0.0, 1.0);
        unsigned v = static_cast<unsigned>(std::lround(c * maxval));
        if (maxval > 255) f.put(static_cast<char>((v >> 8) & 0xff));
        f.put(static_cast<char>(v & 0xff));
    }
    if (!f) throw IoError("write failed: " + path);
}

Image read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        std::fclose(fp);
        throw IoError(path + ": PNG read failed");
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(png, 1, -1, -1);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    depth = png_get_bit_depth(png, info);

    Image img({h, w});
    const double maxval = depth == 16 ? 65535.0 : 255.0;
    std::vector<unsigned char> row(png_get_rowbytes(png, info));
    for (png_uint_32 r = 0; r < h; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 c = 0; c < w; ++c) {
            unsigned v = depth == 16 ? ((static_cast<unsigned>(row[2 * c]) << 8) | row[2 * c + 1])
                                     : row[c];
            img.at(r, c) = v / maxval;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

void write_png(const Image& img, const std::string& path, int bit_depth) {
    if (img.ndim() != 2) throw IoError("only 2D images can be written to " + path);
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw IoError(path + ": PNG write failed");
    }
    const int depth = bit_depth <= 8 ? 8 : 16;
    const unsigned maxval = depth == 8 ? 255u : 65535u;
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.dims[1]),
                 static_cast<png_uint_32>(img.dims[0]), depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> row(img.dims[1] * (depth / 8));
    for (std::size_t r = 0; r < img.dims[0]; ++r) {
        for (std::size_t c = 0; c < img.dims[1]; ++c) {
            double x = std::clamp(img.at(r, c), 0.0, 1.0);
            unsigned v = static_cast<unsigned>(std::lround(x * maxval));
            if (depth == 16) {
                row[2 * c] = static_cast<unsigned char>((v >> 8) & 0xff);
                row[2 * c + 1] = static_cast<unsigned char>(v & 0xff);
            } else {
                row[c] = static_cast<unsigned char>(v);
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace

Image read_image(const std::string& path) {
    if (ends_with(path, ".png") || ends_with(path, ".PNG")) return read_png(path);
    return read_pgm(path);
}

void write_image(const Image& img, const std::string& path, int bit_depth) {
    if (ends_with(path, ".png") || ends_with(path, ".PNG"))
        write_png(img, path, bit_depth);
    else
        write_pgm(img, path, bit_depth);
}

Image synthetic_scene(std::vector<std::size_t> dims) {
    Image img(dims);
    if (dims.size() == 1) {
        const std::size_t n = dims[0];
        for (std::size_t i = 0; i < n; ++i) {
            double t = static_cast<double>(i) / static_cast<double>(n);
            double v = 0.35 + 0.25 * std::sin(2.0 * M_PI * 3.0 * t);
            if (t > 0.2 && t < 0.3) v += 0.4;                     // plateau
            if (t > 0.55 && t < 0.57) v = 1.0;                    // thin bar
            v += 0.15 * std::exp(-std::pow((t - 0.8) / 0.03, 2)); // bump
            img[i] = std::clamp(v, 0.0, 1.0);
        }
        return img;
    }
    const std::size_t h = dims[0], w = dims[1];
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            double y = static_cast<double>(r) / static_cast<double>(h);
            double x = static_cast<double>(c) / static_cast<double>(w);
            double v = 0.25 + 0.2 * std::sin(2.0 * M_PI * 2.0 * x) * std::cos(2.0 * M_PI * 1.5 * y);
            // soft disk
            double d1 = std::hypot(x - 0.3, y - 0.35);
            if (d1 < 0.16) v += 0.45 * (1.0 - d1 / 0.16);
            // sharp disk
            if (std::hypot(x - 0.72, y - 0.65) < 0.1) v += 0.5;
            // bar chart of increasing frequency
            if (y > 0.82 && y < 0.92) {
                int k = static_cast<int>(x * 24.0);
                if (k % 2 == 0) v += 0.4;
            }
            // thin diagonal line
            if (std::abs((x - y) * static_cast<double>(w)) < 1.5 && x > 0.05 && x < 0.5) v = 0.95;
            img.at(r, c) = std::clamp(v, 0.0, 1.0);
        }
    }
    return img;
}

}  // namespace waveblur
