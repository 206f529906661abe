#pragma once

// Dataset bundle model: manifest types, validation, the on-disk layout, and
// the coordinate conventions shared by every other module.
//
// Layout of a bundle directory:
//   manifest.json
//   points/<projection>.bin    float32 LE, row-major N x dims
//   columns/<dimension>.bin    float32 LE, N values, NaN = missing
//   metadata.csv               RFC-4180, header row, row i+1 = object i
//   atlas/page_<k>.png

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace csn {

enum class FieldKind { Info, Categorical, Freetext };

std::string_view to_string(FieldKind kind);
FieldKind field_kind_from_string(std::string_view text);

struct ProjectionDescriptor {
    std::string name;
    std::string file;
    int dims = 2;
    bool operator==(const ProjectionDescriptor&) const = default;
};

struct DimensionDescriptor {
    std::string name;
    std::string label;
    std::string file;
    double min = 0.0;
    double max = 0.0;
    int bin_count = 30;
    std::size_t missing_count = 0;
    bool operator==(const DimensionDescriptor&) const = default;
};

struct FieldDescriptor {
    std::string name;
    FieldKind kind = FieldKind::Info;
    std::vector<std::string> values;  // categorical only: sorted, unique, non-empty
    bool operator==(const FieldDescriptor&) const = default;
};

/// Grid position of one object's thumbnail in the atlas.
struct AtlasCell {
    int page = 0;
    int col = 0;
    int row = 0;
    bool operator==(const AtlasCell&) const = default;
};

struct AtlasDescriptor {
    int thumb_px = 64;
    int page_px = 1024;
    int per_page = 256;
    int page_count = 0;

    int columns() const { return page_px / thumb_px; }
    /// Row-major placement: page i / per_page, then col/row within the page.
    AtlasCell cell(std::size_t index) const {
        const int cols = columns();
        const auto within = static_cast<int>(index % static_cast<std::size_t>(per_page));
        return {static_cast<int>(index / static_cast<std::size_t>(per_page)), within % cols, within / cols};
    }
    static AtlasDescriptor make(int thumb_px, int page_px, std::size_t object_count);
    bool operator==(const AtlasDescriptor&) const = default;
};

struct SubsetInfo {
    std::uint64_t seed = 0;
    std::size_t parent_count = 0;
    bool operator==(const SubsetInfo&) const = default;
};

struct CollectionManifest {
    std::string name;
    std::size_t object_count = 0;
    std::vector<ProjectionDescriptor> projections;
    std::vector<DimensionDescriptor> dimensions;
    std::vector<FieldDescriptor> metadata_fields;
    std::vector<std::string> cluster_fields;
    AtlasDescriptor atlas;
    std::optional<SubsetInfo> subset;
    std::optional<std::string> preview_field;

    const ProjectionDescriptor* find_projection(std::string_view name) const;
    const DimensionDescriptor* find_dimension(std::string_view name) const;
    const FieldDescriptor* find_field(std::string_view name) const;

    bool operator==(const CollectionManifest&) const = default;
};

/// Serializes with stable key order and formatting so identical manifests
/// produce identical bytes.
std::string manifest_to_json(const CollectionManifest& manifest);

/// Parses and checks the invariants that need no other files.
CollectionManifest parse_manifest(std::string_view json_text);

/// Loads `<dir>/manifest.json` (or the file itself when `path` names one) and
/// checks it against the bundle files: coordinate and column sizes, the
/// metadata header and row count, and atlas pages. Throws ValidationError
/// naming the first violated invariant.
CollectionManifest load_manifest(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& bundle_dir, const CollectionManifest& manifest);

std::vector<float> read_f32_file(const std::filesystem::path& path);
void write_f32_file(const std::filesystem::path& path, std::span<const float> values);

/// Sanitized file stem for a projection or dimension name.
std::string file_stem(std::string_view name);

/// N rows of (x, y[, z]); x and y normalized into [-1, 1].
struct ProjectionTable {
    std::string name;
    int dims = 2;
    std::vector<float> coords;

    std::size_t size() const { return dims > 0 ? coords.size() / static_cast<std::size_t>(dims) : 0; }
    float x(std::size_t i) const { return coords[i * dims]; }
    float y(std::size_t i) const { return coords[i * dims + 1]; }
    std::optional<float> z(std::size_t i) const {
        return dims == 3 ? std::optional<float>(coords[i * dims + 2]) : std::nullopt;
    }
    bool operator==(const ProjectionTable&) const = default;
};

/// Uniform scale plus translation that centers the x/y bounding box at the
/// origin and fits it into [-1, 1]^2. A third coordinate, if present, is
/// passed through. All-identical points map to the origin. Input that is
/// already normalized to within float rounding is returned unchanged, which
/// makes the operation exactly idempotent on its own output.
std::vector<float> normalize_projection(std::span<const double> raw, int dims = 2);
std::vector<float> normalize_projection(std::span<const float> raw, int dims = 2);

/// Bit-reversal of `index` over ceil(log2 n) bits, divided by 2^bits.
double derived_depth(std::size_t index, std::size_t n);

/// Column-oriented string table; field order matches the manifest.
struct MetadataTable {
    std::vector<std::string> fields;
    std::vector<std::vector<std::string>> columns;

    std::size_t row_count() const { return columns.empty() ? 0 : columns.front().size(); }
    std::optional<std::size_t> field_index(std::string_view name) const;
    const std::string& value(std::size_t row, std::size_t field) const { return columns[field][row]; }

    static MetadataTable from_csv(const std::string& path);
    static MetadataTable from_csv_text(std::string_view text);
    std::string to_csv() const;
};

struct DimensionColumn {
    DimensionDescriptor descriptor;
    std::vector<float> values;
};

struct ObjectRecord {
    std::size_t index = 0;
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<std::optional<float>> dimension_values;
};

/// A fully loaded, immutable bundle (atlas pages excluded; see exports).
struct Bundle {
    std::filesystem::path root;
    CollectionManifest manifest;
    MetadataTable metadata;
    std::vector<DimensionColumn> columns;
    std::map<std::string, ProjectionTable, std::less<>> projections;

    std::size_t size() const { return manifest.object_count; }
    const ProjectionTable& projection(std::string_view name) const;
    const DimensionColumn* find_column(std::string_view name) const;
    ObjectRecord object(std::size_t index) const;
    std::filesystem::path atlas_page_path(int page) const;
};

Bundle load_bundle(const std::filesystem::path& dir);

}  // namespace csn
