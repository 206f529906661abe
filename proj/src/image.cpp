#include "csn/image.hpp"

#include <png.h>
// jpeglib.h needs FILE and size_t declared first.
#include <cstdio>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <fstream>
#include <iterator>

#include "csn/error.hpp"

namespace csn {
namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw IoError(std::string("png decode: ") + img.message);
    img.format = PNG_FORMAT_RGBA;
    Image out(static_cast<int>(img.width), static_cast<int>(img.height));
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw IoError("png decode: " + msg);
    }
    return out;
}

struct JpegErrorState {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* state = reinterpret_cast<JpegErrorState*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, state->message);
    std::longjmp(state->jump, 1);
}

// Only trivially destructible state lives between setjmp and longjmp.
bool decode_jpeg_raw(const std::uint8_t* data, unsigned long size, Image& out, JpegErrorState& err) {
    jpeg_decompress_struct cinfo;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, data, size);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_EXT_RGBA;
    jpeg_start_decompress(&cinfo);
    out.width = static_cast<int>(cinfo.output_width);
    out.height = static_cast<int>(cinfo.output_height);
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 4);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 4;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

Image decode_jpeg(std::span<const std::uint8_t> bytes) {
    Image out;
    JpegErrorState err{};
    if (!decode_jpeg_raw(bytes.data(), static_cast<unsigned long>(bytes.size()), out, err))
        throw IoError(std::string("jpeg decode: ") + err.message);
    return out;
}

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G'};
    if (bytes.size() >= 4 && std::equal(std::begin(kPng), std::end(kPng), bytes.begin()))
        return decode_png(bytes);
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
        return decode_jpeg(bytes);
    throw IoError("unrecognized image format");
}

Image read_image(const std::string& path) {
    const auto bytes = read_file(path);
    try {
        return decode_image(bytes);
    } catch (const IoError& e) {
        throw IoError(path + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const Image& image) {
    if (image.width <= 0 || image.height <= 0) throw InvalidArgument("encode_png: empty image");
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGBA;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(img, size, 0, image.pixels.data(), 0, nullptr))
        throw IoError(std::string("png encode: ") + img.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.pixels.data(), 0, nullptr))
        throw IoError(std::string("png encode: ") + img.message);
    out.resize(size);
    return out;
}

void write_png(const std::string& path, const Image& image) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {

struct Tap {
    int index;
    double weight;
};

// Overlap weights of output cell [o*scale, (o+1)*scale) with each source pixel.
std::vector<std::vector<Tap>> area_taps(int src, int dst) {
    std::vector<std::vector<Tap>> taps(dst);
    const double scale = static_cast<double>(src) / dst;
    for (int o = 0; o < dst; ++o) {
        const double lo = o * scale;
        const double hi = (o + 1) * scale;
        const int first = static_cast<int>(std::floor(lo));
        const int last = std::min(src - 1, static_cast<int>(std::ceil(hi)) - 1);
        for (int s = first; s <= last; ++s) {
            const double w = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
            if (w > 0) taps[o].push_back({s, w / scale});
        }
    }
    return taps;
}

}  // namespace

Image resample(const Image& src, int width, int height) {
    if (width <= 0 || height <= 0 || src.width <= 0 || src.height <= 0)
        throw InvalidArgument("resample: empty image");
    const auto xt = area_taps(src.width, width);
    const auto yt = area_taps(src.height, height);

    // Horizontal pass over premultiplied values.
    std::vector<double> mid(static_cast<std::size_t>(width) * src.height * 4, 0.0);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc[4] = {0, 0, 0, 0};
            for (const auto& t : xt[x]) {
                const auto* p = src.at(t.index, y);
                const double a = p[3] / 255.0;
                acc[0] += t.weight * p[0] * a;
                acc[1] += t.weight * p[1] * a;
                acc[2] += t.weight * p[2] * a;
                acc[3] += t.weight * p[3];
            }
            double* m = &mid[(static_cast<std::size_t>(y) * width + x) * 4];
            std::copy(acc, acc + 4, m);
        }
    }

    Image out(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc[4] = {0, 0, 0, 0};
            for (const auto& t : yt[y]) {
                const double* m = &mid[(static_cast<std::size_t>(t.index) * width + x) * 4];
                for (int c = 0; c < 4; ++c) acc[c] += t.weight * m[c];
            }
            auto* p = out.at(x, y);
            const double alpha = acc[3];
            auto to_byte = [](double v) {
                return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            };
            p[3] = to_byte(alpha);
            for (int c = 0; c < 3; ++c) p[c] = alpha > 0 ? to_byte(acc[c] * 255.0 / alpha) : 0;
        }
    }
    return out;
}

Image make_thumbnail(const Image& src, int side) {
    if (side <= 0) throw InvalidArgument("thumbnail side must be positive");
    const int crop = std::min(src.width, src.height);
    if (crop <= 0) throw InvalidArgument("thumbnail: empty image");
    const int x0 = (src.width - crop) / 2;
    const int y0 = (src.height - crop) / 2;
    Image square(crop, crop);
    for (int y = 0; y < crop; ++y) {
        const auto* row = src.at(x0, y0 + y);
        std::copy(row, row + static_cast<std::size_t>(crop) * 4, square.at(0, y));
    }
    if (crop == side) return square;
    return resample(square, side, side);
}

}  // namespace csn
