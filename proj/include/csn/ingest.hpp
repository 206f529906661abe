#pragma once

// Converts a metadata table, an optional embedding matrix and a set of
// images into a dataset bundle.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "csn/bundle.hpp"
#include "csn/dimred.hpp"
#include "csn/image.hpp"

namespace csn::ingest {

/// k distinct indices from [0, n_total), sorted ascending.
///
/// Partial Fisher-Yates over the identity array: for i in [0, k), swap slot i
/// with slot i + Rng(seed).uniform_below(n_total - i). Rng is MT19937-64 with
/// the rejection-sampled bound described in rng.hpp.
std::vector<std::size_t> sample_subset(std::size_t n_total, std::size_t k, std::uint64_t seed);

struct AtlasPages {
    AtlasDescriptor descriptor;
    std::vector<Image> pages;  // transparent where no thumbnail was placed
};

AtlasPages build_atlas(std::span<const Image> thumbnails, int thumb_px, int page_px);

struct ColumnSummary {
    double min = 0.0;
    double max = 0.0;
    int bin_count = 30;
    std::size_t missing_count = 0;
    bool degenerate = false;  // no values, or a single distinct value
};

ColumnSummary summarize_column(std::span<const float> values, int bin_count = 30);

inline constexpr int kDefaultBinCount = 30;
inline constexpr std::size_t kMaxCategoricalValues = 256;

struct DimensionSource {
    std::string name;
    std::string label;
    std::optional<std::string> column;       // metadata column
    std::optional<std::size_t> embedding;    // embedding matrix column
    int bin_count = kDefaultBinCount;
};

struct ProjectionRequest {
    enum class Method { Pca, Tsne, Axis, Import };
    Method method = Method::Pca;
    std::string name;
    dimred::TsneParams tsne;
    std::string x;  // axis: column reference
    std::string y;
    std::filesystem::path path;  // import
    std::optional<std::pair<std::size_t, std::size_t>> shape;
};

ProjectionRequest::Method method_from_string(std::string_view text);

struct IngestConfig {
    std::string name = "collection";
    std::filesystem::path metadata_path;
    std::filesystem::path images_path;
    std::optional<std::string> image_column;
    std::optional<std::filesystem::path> embeddings_path;
    std::optional<std::pair<std::size_t, std::size_t>> embeddings_shape;
    std::vector<DimensionSource> dimension_columns;
    std::map<std::string, FieldKind> field_kinds;
    std::optional<std::vector<std::string>> cluster_fields;  // default: every categorical field
    std::optional<std::string> preview_column;
    int thumb_px = 64;
    int page_px = 1024;
    std::optional<std::pair<std::size_t, std::uint64_t>> subset;  // (k, seed)
    std::vector<ProjectionRequest> projections;

    /// Relative paths resolve against `base_dir`.
    static IngestConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    static IngestConfig load(const std::filesystem::path& path);
};

struct IngestReport {
    CollectionManifest manifest;
    std::vector<std::size_t> source_indices;  // bundle row i came from source row source_indices[i]
    std::map<std::string, std::vector<std::size_t>> axis_missing;  // per axis projection
};

/// Writes a complete bundle into `out_dir` (created if needed) and validates
/// it with load_manifest. Errors name the offending object or column.
IngestReport run(const IngestConfig& config, const std::filesystem::path& out_dir);

}  // namespace csn::ingest
