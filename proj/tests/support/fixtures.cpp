#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <jpeglib.h>
#include <json.hpp>

#include "csn/ingest.hpp"
#include "csn/rng.hpp"

namespace csn::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& prefix) {
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
        auto candidate = fs::temp_directory_path() / (prefix + "-" + std::to_string(rd()));
        if (fs::create_directory(candidate)) {
            path_ = candidate;
            return;
        }
    }
    throw std::runtime_error("cannot create temp dir");
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

Image gradient_image(int width, int height, int seed) {
    Image img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            auto* p = img.at(x, y);
            p[0] = static_cast<std::uint8_t>(width > 1 ? x * 255 / (width - 1) : 0);
            p[1] = static_cast<std::uint8_t>(height > 1 ? y * 255 / (height - 1) : 0);
            p[2] = static_cast<std::uint8_t>((seed * 37) % 256);
            p[3] = 255;
        }
    return img;
}

void write_jpeg(const fs::path& path, const Image& image, int quality) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (f == nullptr) throw std::runtime_error("cannot open " + path.string());
    jpeg_compress_struct cinfo;
    jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, f);
    cinfo.image_width = static_cast<JDIMENSION>(image.width);
    cinfo.image_height = static_cast<JDIMENSION>(image.height);
    cinfo.input_components = 4;
    cinfo.in_color_space = JCS_EXT_RGBA;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(image.at(0, static_cast<int>(cinfo.next_scanline)));
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::fclose(f);
}

DemoInputs write_demo_inputs(const fs::path& dir, std::size_t count) {
    DemoInputs in;
    in.count = count;
    in.images = dir / "images";
    in.metadata = dir / "metadata.csv";
    in.embeddings = dir / "embeddings.csv";
    in.config = dir / "config.json";
    fs::create_directories(in.images);

    Rng rng(2024);
    std::ofstream meta(in.metadata, std::ios::binary);
    std::ofstream emb(in.embeddings, std::ios::binary);
    meta << "title,style,year\r\n";
    char name[32];
    for (std::size_t i = 0; i < count; ++i) {
        std::snprintf(name, sizeof name, "img_%03zu.png", i);
        // Landscape and portrait sources exercise the center crop.
        const int w = 80 + static_cast<int>(i % 3) * 16, h = 60 + static_cast<int>(i % 5) * 10;
        write_png((in.images / name).string(), gradient_image(w, h, static_cast<int>(i)));

        const std::size_t style = i % kStyles.size();
        std::string title = "Work " + std::to_string(i);
        if (i == 5) title = "\"Still life, with pipe\"";
        else if (i == 6) title = "\"Portrait of a \"\"Lady\"\"\"";
        else title = '"' + title + '"';
        const std::string year = i == 17 ? "" : std::to_string(1850 + (i * 7) % 150);
        meta << title << ',' << kStyles[style] << ',' << year << "\r\n";

        for (int d = 0; d < 8; ++d) {
            const double center = (static_cast<int>(style) == d % 4 ? 10.0 : 0.0) + d * 0.5;
            emb << (d ? "," : "") << center + rng.normal(0.0, 1.0);
        }
        emb << '\n';
    }

    nlohmann::json dims = nlohmann::json::array();
    for (int d = 0; d < 8; ++d)
        dims.push_back({{"embedding", d}, {"name", "e" + std::to_string(d)}, {"label", "Feature " + std::to_string(d)}});
    const nlohmann::json config = {
        {"name", "demo"},
        {"metadata_path", "metadata.csv"},
        {"images_path", "images"},
        {"embeddings_path", "embeddings.csv"},
        {"dimension_columns", dims},
        {"field_kinds", {{"title", "freetext"}, {"style", "categorical"}, {"year", "info"}}},
        {"preview_column", "title"},
        {"thumb_px", 32},
        {"page_px", 512},
        {"projections",
         {{{"method", "pca"}, {"name", "pca"}},
          {{"method", "tsne"}, {"name", "tsne"}, {"perplexity", 10}, {"iterations", 300}, {"seed", 5}},
          {{"method", "axis"}, {"name", "timeline"}, {"x", "year"}, {"y", "e0"}}}},
    };
    std::ofstream(in.config) << config.dump(2);
    return in;
}

fs::path build_demo_bundle(const fs::path& dir, std::size_t count) {
    const auto in = write_demo_inputs(dir, count);
    const auto out = dir / "demo";
    ingest::run(ingest::IngestConfig::load(in.config), out);
    return out;
}

std::unique_ptr<SyntheticColumns> make_synthetic_columns(std::size_t objects, std::size_t dimensions,
                                                         std::uint64_t seed) {
    auto out = std::make_unique<SyntheticColumns>();
    out->objects = objects;
    Rng rng(seed);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::vector<int> bins;
    for (std::size_t d = 0; d < dimensions; ++d) {
        std::vector<float> v(objects);
        switch (d % 4) {
            case 0:
                for (auto& x : v) x = static_cast<float>(rng.uniform01() * 10.0 - 3.0);
                bins.push_back(30);
                break;
            case 1:
                for (auto& x : v) x = static_cast<float>(rng.uniform_below(21));
                bins.push_back(7);
                break;
            case 2:
                for (auto& x : v) x = rng.uniform01() < 0.05 ? nan : static_cast<float>(rng.normal(100.0, 15.0));
                bins.push_back(12);
                break;
            default:
                for (auto& x : v) x = rng.uniform01() < 0.02 ? nan : 4.5f;
                bins.push_back(5);
                break;
        }
        out->names.push_back("d" + std::to_string(d));
        out->data.push_back(std::move(v));
    }
    for (std::size_t d = 0; d < dimensions; ++d) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (float x : out->data[d])
            if (!std::isnan(x)) lo = std::min(lo, double(x)), hi = std::max(hi, double(x));
        out->views.push_back({out->names[d], out->data[d], {lo, hi}, bins[d]});
    }
    return out;
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    const auto s = read_text(path);
    return {s.begin(), s.end()};
}

}  // namespace csn::testing
