#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace csn {

/// 8-bit RGBA raster, row-major, no padding.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 4, 0) {}

    std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 4; }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 4;
    }
    bool operator==(const Image&) const = default;
};

/// Decodes PNG or JPEG, chosen by magic bytes.
Image decode_image(std::span<const std::uint8_t> bytes);
Image read_image(const std::string& path);

std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const std::string& path, const Image& image);

/// Area-averaging resample to an arbitrary target size.
Image resample(const Image& src, int width, int height);

/// Center square crop followed by resampling to side x side.
Image make_thumbnail(const Image& src, int side);

}  // namespace csn
