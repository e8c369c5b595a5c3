#include "stitch/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include <jpeglib.h>
#include <png.h>

namespace stitch::io {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Tensor4 from_rgb8(const std::vector<unsigned char>& rgb, int w, int h) {
    Tensor4 t(1, 3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                t.at(0, c, y, x) = rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
    return t;
}

Tensor4 load_png_file(std::FILE* f, const std::string& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png: allocation failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("png: allocation failure");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("png: decode failed: " + path);
    }
    png_init_io(png, f);
    png_read_info(png, info);

    // normalize everything to 8-bit RGB
    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    std::vector<unsigned char> rgb(static_cast<std::size_t>(w) * h * 3);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = &rgb[static_cast<std::size_t>(y) * w * 3];
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return from_rgb8(rgb, w, h);
}

struct JpegErr {
    jpeg_error_mgr mgr;
    std::jmp_buf jmp;
};

void jpeg_error_trap(j_common_ptr cinfo) {
    std::longjmp(reinterpret_cast<JpegErr*>(cinfo->err)->jmp, 1);
}

Tensor4 load_jpeg_file(std::FILE* f, const std::string& path) {
    jpeg_decompress_struct cinfo;
    JpegErr err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_trap;
    if (setjmp(err.jmp)) {
        jpeg_destroy_decompress(&cinfo);
        throw DataError("jpeg: decode failed: " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const int w = static_cast<int>(cinfo.output_width);
    const int h = static_cast<int>(cinfo.output_height);
    std::vector<unsigned char> rgb(static_cast<std::size_t>(w) * h * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* row = &rgb[static_cast<std::size_t>(cinfo.output_scanline) * w * 3];
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return from_rgb8(rgb, w, h);
}

}  // namespace

Tensor4 load_image(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw DataError("load_image: cannot open " + path);
    unsigned char magic[4] = {};
    if (std::fread(magic, 1, 4, f.get()) != 4)
        throw DataError("load_image: truncated file " + path);
    std::rewind(f.get());
    if (magic[0] == 0x89 && magic[1] == 'P') return load_png_file(f.get(), path);
    if (magic[0] == 0xFF && magic[1] == 0xD8) return load_jpeg_file(f.get(), path);
    throw DataError("load_image: unsupported format: " + path);
}

void save_png(const Tensor4& image, const std::string& path) {
    const int C = image.shape.c;
    if (image.shape.b != 1 || (C != 1 && C != 3))
        throw std::invalid_argument("save_png: expects (1,{1|3},h,w)");
    const int w = image.shape.w, h = image.shape.h;

    std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * C);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < C; ++c) {
                const double v = std::clamp(image.at(0, c, y, x), 0.0, 1.0) * 255.0;
                bytes[(static_cast<std::size_t>(y) * w + x) * C + c] =
                    static_cast<unsigned char>(std::nearbyint(v));  // round-half-even
            }

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw DataError("save_png: cannot open for write: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png: allocation failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("png: allocation failure");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("save_png: encode failed: " + path);
    }
    png_init_io(png, f.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, w, h, 8,
                 C == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = &bytes[static_cast<std::size_t>(y) * w * C];
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace stitch::io
