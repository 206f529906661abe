#include "csn/bundle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "csn/csv.hpp"
#include "csn/error.hpp"

namespace csn {

using ojson = nlohmann::ordered_json;

std::string_view to_string(FieldKind kind) {
    switch (kind) {
        case FieldKind::Info: return "info";
        case FieldKind::Categorical: return "categorical";
        case FieldKind::Freetext: return "freetext";
    }
    return "info";
}

FieldKind field_kind_from_string(std::string_view text) {
    if (text == "info") return FieldKind::Info;
    if (text == "categorical") return FieldKind::Categorical;
    if (text == "freetext") return FieldKind::Freetext;
    throw ValidationError("unknown field kind '" + std::string(text) + "'");
}

AtlasDescriptor AtlasDescriptor::make(int thumb_px, int page_px, std::size_t object_count) {
    if (thumb_px <= 0 || page_px <= 0 || page_px % thumb_px != 0)
        throw ValidationError("atlas: thumb_px must divide page_px");
    AtlasDescriptor atlas;
    atlas.thumb_px = thumb_px;
    atlas.page_px = page_px;
    const int cols = page_px / thumb_px;
    atlas.per_page = cols * cols;
    atlas.page_count = static_cast<int>((object_count + atlas.per_page - 1) / atlas.per_page);
    return atlas;
}

const ProjectionDescriptor* CollectionManifest::find_projection(std::string_view n) const {
    for (const auto& p : projections)
        if (p.name == n) return &p;
    return nullptr;
}

const DimensionDescriptor* CollectionManifest::find_dimension(std::string_view n) const {
    for (const auto& d : dimensions)
        if (d.name == n) return &d;
    return nullptr;
}

const FieldDescriptor* CollectionManifest::find_field(std::string_view n) const {
    for (const auto& f : metadata_fields)
        if (f.name == n) return &f;
    return nullptr;
}

std::string manifest_to_json(const CollectionManifest& m) {
    ojson j;
    j["name"] = m.name;
    j["object_count"] = m.object_count;
    j["projections"] = ojson::array();
    for (const auto& p : m.projections)
        j["projections"].push_back({{"name", p.name}, {"file", p.file}, {"dims", p.dims}});
    j["dimensions"] = ojson::array();
    for (const auto& d : m.dimensions)
        j["dimensions"].push_back({{"name", d.name},
                                   {"label", d.label},
                                   {"file", d.file},
                                   {"min", d.min},
                                   {"max", d.max},
                                   {"bin_count", d.bin_count},
                                   {"missing_count", d.missing_count}});
    j["metadata_fields"] = ojson::array();
    for (const auto& f : m.metadata_fields) {
        ojson field = {{"name", f.name}, {"kind", std::string(to_string(f.kind))}};
        if (f.kind == FieldKind::Categorical) field["values"] = f.values;
        j["metadata_fields"].push_back(std::move(field));
    }
    j["cluster_fields"] = m.cluster_fields;
    j["atlas"] = {{"thumb_px", m.atlas.thumb_px},
                  {"page_px", m.atlas.page_px},
                  {"per_page", m.atlas.per_page},
                  {"page_count", m.atlas.page_count}};
    if (m.subset) j["subset"] = {{"seed", m.subset->seed}, {"parent_count", m.subset->parent_count}};
    if (m.preview_field) j["preview_field"] = *m.preview_field;
    return j.dump(2) + "\n";
}

namespace {

[[noreturn]] void invalid(const std::string& what) { throw ValidationError(what); }

void check_unique(const std::vector<std::string>& names, const char* what) {
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (n.empty()) invalid(std::string(what) + " name must be non-empty");
        if (!seen.insert(n).second) invalid(std::string("duplicate ") + what + " name '" + n + "'");
    }
}

void validate(const CollectionManifest& m) {
    std::vector<std::string> names;
    for (const auto& p : m.projections) {
        if (p.dims != 2 && p.dims != 3)
            invalid("projection '" + p.name + "': dims must be 2 or 3");
        if (p.file.empty()) invalid("projection '" + p.name + "': missing file");
        names.push_back(p.name);
    }
    check_unique(names, "projection");

    names.clear();
    for (const auto& d : m.dimensions) {
        if (!std::isfinite(d.min) || !std::isfinite(d.max)) invalid("dimension '" + d.name + "': non-finite domain");
        if (d.min > d.max) invalid("dimension '" + d.name + "': min > max");
        if (d.bin_count < 1) invalid("dimension '" + d.name + "': bin_count must be positive");
        if (d.missing_count > m.object_count) invalid("dimension '" + d.name + "': missing_count exceeds object_count");
        if (d.file.empty()) invalid("dimension '" + d.name + "': missing file");
        names.push_back(d.name);
    }
    check_unique(names, "dimension");

    names.clear();
    for (const auto& f : m.metadata_fields) {
        if (f.kind == FieldKind::Categorical) {
            if (f.values.empty()) invalid("categorical field '" + f.name + "': values list is empty");
            if (!std::is_sorted(f.values.begin(), f.values.end()))
                invalid("categorical field '" + f.name + "': values not sorted");
            if (std::adjacent_find(f.values.begin(), f.values.end()) != f.values.end())
                invalid("categorical field '" + f.name + "': duplicate values");
        } else if (!f.values.empty()) {
            invalid("field '" + f.name + "': values listed for a non-categorical field");
        }
        names.push_back(f.name);
    }
    check_unique(names, "metadata field");

    for (const auto& c : m.cluster_fields) {
        const auto* f = m.find_field(c);
        if (f == nullptr || f->kind != FieldKind::Categorical)
            invalid("cluster field '" + c + "' is not a categorical metadata field");
    }
    if (m.preview_field && m.find_field(*m.preview_field) == nullptr)
        invalid("preview field '" + *m.preview_field + "' is not a metadata field");

    const auto& a = m.atlas;
    if (a.thumb_px <= 0 || a.page_px <= 0 || a.page_px % a.thumb_px != 0)
        invalid("atlas: thumb_px must divide page_px");
    const auto expected = AtlasDescriptor::make(a.thumb_px, a.page_px, m.object_count);
    if (a.per_page != expected.per_page) invalid("atlas: per_page must equal (page_px / thumb_px)^2");
    if (a.page_count != expected.page_count) invalid("atlas: page_count must equal ceil(N / per_page)");
    if (m.subset && m.subset->parent_count < m.object_count)
        invalid("subset: parent_count smaller than object_count");
}

template <typename T>
T required(const ojson& j, const char* key) {
    if (!j.contains(key)) invalid(std::string("manifest: missing key '") + key + "'");
    return j.at(key).get<T>();
}

}  // namespace

CollectionManifest parse_manifest(std::string_view json_text) {
    ojson j;
    try {
        j = ojson::parse(json_text);
    } catch (const ojson::parse_error& e) {
        throw ValidationError(std::string("manifest parse failure: ") + e.what());
    }
    CollectionManifest m;
    try {
        if (!j.is_object()) invalid("manifest: top level must be an object");
        m.name = required<std::string>(j, "name");
        const auto count = required<std::int64_t>(j, "object_count");
        if (count < 0) invalid("manifest: object_count must be non-negative");
        m.object_count = static_cast<std::size_t>(count);
        for (const auto& p : j.value("projections", ojson::array()))
            m.projections.push_back(
                {required<std::string>(p, "name"), required<std::string>(p, "file"), p.value("dims", 2)});
        for (const auto& d : j.value("dimensions", ojson::array())) {
            DimensionDescriptor dim;
            dim.name = required<std::string>(d, "name");
            dim.label = d.value("label", dim.name);
            dim.file = required<std::string>(d, "file");
            dim.min = required<double>(d, "min");
            dim.max = required<double>(d, "max");
            dim.bin_count = d.value("bin_count", 30);
            dim.missing_count = d.value("missing_count", std::size_t{0});
            m.dimensions.push_back(std::move(dim));
        }
        for (const auto& f : j.value("metadata_fields", ojson::array())) {
            FieldDescriptor field;
            field.name = required<std::string>(f, "name");
            field.kind = field_kind_from_string(f.value("kind", std::string("info")));
            field.values = f.value("values", std::vector<std::string>{});
            m.metadata_fields.push_back(std::move(field));
        }
        m.cluster_fields = j.value("cluster_fields", std::vector<std::string>{});
        if (!j.contains("atlas")) invalid("manifest: missing key 'atlas'");
        const auto& a = j.at("atlas");
        m.atlas.thumb_px = required<int>(a, "thumb_px");
        m.atlas.page_px = required<int>(a, "page_px");
        m.atlas.per_page = required<int>(a, "per_page");
        m.atlas.page_count = required<int>(a, "page_count");
        if (j.contains("subset"))
            m.subset = SubsetInfo{required<std::uint64_t>(j["subset"], "seed"),
                                  required<std::size_t>(j["subset"], "parent_count")};
        if (j.contains("preview_field")) m.preview_field = j["preview_field"].get<std::string>();
    } catch (const ojson::exception& e) {
        throw ValidationError(std::string("manifest: malformed value: ") + e.what());
    }
    validate(m);
    return m;
}

namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uintmax_t file_size_or_throw(const std::filesystem::path& path, const std::string& what) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) invalid(what + ": missing file " + path.string());
    return size;
}

}  // namespace

CollectionManifest load_manifest(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = fs::is_directory(path) ? path / "manifest.json" : path;
    const fs::path root = manifest_path.parent_path();
    auto m = parse_manifest(read_text(manifest_path));

    for (const auto& p : m.projections) {
        const auto bytes = file_size_or_throw(root / p.file, "projection '" + p.name + "'");
        const std::uintmax_t expected = m.object_count * static_cast<std::uintmax_t>(p.dims) * 4;
        if (bytes != expected)
            invalid("coordinate count mismatch: projection '" + p.name + "' holds " + std::to_string(bytes / 4) +
                    " values, expected " + std::to_string(expected / 4));
    }
    for (const auto& d : m.dimensions) {
        const auto bytes = file_size_or_throw(root / d.file, "dimension '" + d.name + "'");
        if (bytes != m.object_count * 4)
            invalid("value count mismatch: dimension '" + d.name + "' holds " + std::to_string(bytes / 4) +
                    " values, expected " + std::to_string(m.object_count));
    }
    if (!m.metadata_fields.empty()) {
        const auto meta_path = root / "metadata.csv";
        if (!fs::exists(meta_path)) invalid("metadata: missing file " + meta_path.string());
        const auto table = csv::read_table(meta_path.string());
        std::vector<std::string> names;
        for (const auto& f : m.metadata_fields) names.push_back(f.name);
        if (table.header != names) invalid("metadata header mismatch: metadata.csv columns differ from metadata_fields");
        if (table.rows.size() != m.object_count)
            invalid("metadata row count mismatch: " + std::to_string(table.rows.size()) + " rows, expected " +
                    std::to_string(m.object_count));
    }
    for (int k = 0; k < m.atlas.page_count; ++k) {
        const auto page = root / "atlas" / ("page_" + std::to_string(k) + ".png");
        if (!fs::exists(page)) invalid("atlas: missing page " + page.string());
    }
    return m;
}

void write_manifest(const std::filesystem::path& bundle_dir, const CollectionManifest& manifest) {
    validate(manifest);
    std::ofstream out(bundle_dir / "manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write " + (bundle_dir / "manifest.json").string());
    out << manifest_to_json(manifest);
}

std::vector<float> read_f32_file(const std::filesystem::path& path) {
    static_assert(std::endian::native == std::endian::little, "float32 files are little-endian");
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % 4 != 0) throw IoError(path.string() + ": size is not a multiple of 4");
    std::vector<float> values(bytes / 4);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw IoError("short read on " + path.string());
    return values;
}

void write_f32_file(const std::filesystem::path& path, std::span<const float> values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

std::string file_stem(std::string_view name) {
    std::string out;
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.';
        out.push_back(ok ? c : '_');
    }
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

namespace {

template <typename T>
std::vector<float> normalize_impl(std::span<const T> raw, int dims) {
    if (dims != 2 && dims != 3) throw InvalidArgument("normalize_projection: dims must be 2 or 3");
    if (raw.size() % dims != 0) throw InvalidArgument("normalize_projection: ragged coordinate array");
    const std::size_t n = raw.size() / dims;
    std::vector<float> out(raw.size());
    if (n == 0) return out;

    double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
    double min_y = min_x, max_y = -min_x;
    for (std::size_t i = 0; i < n; ++i) {
        for (int d = 0; d < dims; ++d)
            if (!std::isfinite(static_cast<double>(raw[i * dims + d])))
                throw InvalidArgument("normalize_projection: non-finite coordinate at row " + std::to_string(i));
        const double x = raw[i * dims], y = raw[i * dims + 1];
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
    }
    const double cx = 0.5 * (min_x + max_x);
    const double cy = 0.5 * (min_y + max_y);
    const double half = 0.5 * std::max(max_x - min_x, max_y - min_y);

    // Float rounding of a previous normalization leaves at most a few ulps of drift.
    constexpr double kSnap = 0x1.0p-22;
    const bool already = std::abs(cx) <= kSnap && std::abs(cy) <= kSnap && std::abs(half - 1.0) <= kSnap;

    for (std::size_t i = 0; i < n; ++i) {
        const double x = raw[i * dims], y = raw[i * dims + 1];
        if (already) {
            out[i * dims] = static_cast<float>(x);
            out[i * dims + 1] = static_cast<float>(y);
        } else if (half == 0.0) {
            out[i * dims] = 0.0f;
            out[i * dims + 1] = 0.0f;
        } else {
            out[i * dims] = static_cast<float>((x - cx) / half);
            out[i * dims + 1] = static_cast<float>((y - cy) / half);
        }
        if (dims == 3) out[i * dims + 2] = static_cast<float>(raw[i * dims + 2]);
    }
    return out;
}

}  // namespace

std::vector<float> normalize_projection(std::span<const double> raw, int dims) { return normalize_impl(raw, dims); }
std::vector<float> normalize_projection(std::span<const float> raw, int dims) { return normalize_impl(raw, dims); }

double derived_depth(std::size_t index, std::size_t n) {
    if (index >= n) throw InvalidArgument("derived_depth: index out of range");
    int bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    std::size_t reversed = 0;
    for (int b = 0; b < bits; ++b)
        if (index & (std::size_t{1} << b)) reversed |= std::size_t{1} << (bits - 1 - b);
    return std::ldexp(static_cast<double>(reversed), -bits);
}

std::optional<std::size_t> MetadataTable::field_index(std::string_view name) const {
    for (std::size_t i = 0; i < fields.size(); ++i)
        if (fields[i] == name) return i;
    return std::nullopt;
}

MetadataTable MetadataTable::from_csv_text(std::string_view text) {
    auto table = csv::parse_table(text);
    MetadataTable out;
    out.fields = std::move(table.header);
    out.columns.assign(out.fields.size(), {});
    for (auto& col : out.columns) col.reserve(table.rows.size());
    for (auto& row : table.rows)
        for (std::size_t f = 0; f < row.size(); ++f) out.columns[f].push_back(std::move(row[f]));
    return out;
}

MetadataTable MetadataTable::from_csv(const std::string& path) {
    try {
        return from_csv_text(read_text(path));
    } catch (const IoError& e) {
        throw IoError(path + ": " + e.what());
    }
}

std::string MetadataTable::to_csv() const {
    std::string out;
    csv::append_row(out, fields);
    csv::Row row(fields.size());
    for (std::size_t r = 0; r < row_count(); ++r) {
        for (std::size_t f = 0; f < fields.size(); ++f) row[f] = columns[f][r];
        csv::append_row(out, row);
    }
    return out;
}

const ProjectionTable& Bundle::projection(std::string_view name) const {
    const auto it = projections.find(name);
    if (it == projections.end()) throw InvalidArgument("unknown projection '" + std::string(name) + "'");
    return it->second;
}

const DimensionColumn* Bundle::find_column(std::string_view name) const {
    for (const auto& c : columns)
        if (c.descriptor.name == name) return &c;
    return nullptr;
}

ObjectRecord Bundle::object(std::size_t index) const {
    if (index >= size()) throw InvalidArgument("object index out of range");
    ObjectRecord rec;
    rec.index = index;
    for (std::size_t f = 0; f < metadata.fields.size(); ++f)
        rec.metadata.emplace_back(metadata.fields[f], metadata.value(index, f));
    for (const auto& c : columns) {
        const float v = c.values[index];
        rec.dimension_values.push_back(std::isnan(v) ? std::nullopt : std::optional<float>(v));
    }
    return rec;
}

std::filesystem::path Bundle::atlas_page_path(int page) const {
    return root / "atlas" / ("page_" + std::to_string(page) + ".png");
}

Bundle load_bundle(const std::filesystem::path& dir) {
    Bundle b;
    b.root = dir;
    b.manifest = load_manifest(dir);
    if (!b.manifest.metadata_fields.empty()) {
        b.metadata = MetadataTable::from_csv((dir / "metadata.csv").string());
    }
    for (const auto& d : b.manifest.dimensions) b.columns.push_back({d, read_f32_file(dir / d.file)});
    for (const auto& p : b.manifest.projections)
        b.projections.emplace(p.name, ProjectionTable{p.name, p.dims, read_f32_file(dir / p.file)});
    return b;
}

}  // namespace csn
