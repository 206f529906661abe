#pragma once

// Shared test fixtures: temporary directories, synthetic gradient images and
// the 100-object demo collection.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "csn/bundle.hpp"
#include "csn/filters.hpp"
#include "csn/image.hpp"

namespace csn::testing {

class TempDir {
public:
    explicit TempDir(const std::string& prefix = "csn-test");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

private:
    std::filesystem::path path_;
};

/// Deterministic gradient: R follows x, G follows y, B encodes `seed`.
Image gradient_image(int width, int height, int seed);

/// Writes a JPEG with libjpeg (the library itself only decodes JPEG).
void write_jpeg(const std::filesystem::path& path, const Image& image, int quality = 95);

inline const std::vector<std::string> kStyles = {"Cubism", "Impressionism", "Baroque", "Expressionism"};

struct DemoInputs {
    std::filesystem::path config;
    std::filesystem::path metadata;
    std::filesystem::path images;
    std::filesystem::path embeddings;
    std::size_t count = 0;
};

/// Writes images/, metadata.csv (title, style, year), embeddings.csv (8 dims,
/// one cluster per style) and config.json into `dir`. Object 17 has no year.
DemoInputs write_demo_inputs(const std::filesystem::path& dir, std::size_t count = 100);

/// Inputs plus an ingested bundle at `dir/demo`.
std::filesystem::path build_demo_bundle(const std::filesystem::path& dir, std::size_t count = 100);

/// In-memory filterable columns with mixed shapes: continuous, integer-valued
/// (many values sit exactly on bin edges), sparse with missing values, and a
/// constant column with a degenerate domain.
struct SyntheticColumns {
    std::size_t objects = 0;
    std::vector<std::string> names;
    std::vector<std::vector<float>> data;
    std::vector<filters::ColumnView> views;
};

std::unique_ptr<SyntheticColumns> make_synthetic_columns(std::size_t objects, std::size_t dimensions,
                                                         std::uint64_t seed);

std::string read_text(const std::filesystem::path& path);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

}  // namespace csn::testing
