#include "csn/ingest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <thread>

#include "csn/csv.hpp"
#include "csn/error.hpp"
#include "csn/rng.hpp"

namespace csn::ingest {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<std::size_t> sample_subset(std::size_t n_total, std::size_t k, std::uint64_t seed) {
    if (k == 0) throw InvalidArgument("subset size must be positive");
    if (k > n_total)
        throw InvalidArgument("subset size " + std::to_string(k) + " exceeds " + std::to_string(n_total) + " rows");
    std::vector<std::size_t> slots(n_total);
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.uniform_below(n_total - i));
        std::swap(slots[i], slots[j]);
    }
    slots.resize(k);
    std::sort(slots.begin(), slots.end());
    return slots;
}

AtlasPages build_atlas(std::span<const Image> thumbnails, int thumb_px, int page_px) {
    AtlasPages out;
    out.descriptor = AtlasDescriptor::make(thumb_px, page_px, thumbnails.size());
    for (int p = 0; p < out.descriptor.page_count; ++p) out.pages.emplace_back(page_px, page_px);
    for (std::size_t i = 0; i < thumbnails.size(); ++i) {
        const auto& t = thumbnails[i];
        if (t.width != thumb_px || t.height != thumb_px)
            throw InvalidArgument("thumbnail " + std::to_string(i) + " is not " + std::to_string(thumb_px) + "px square");
        const auto cell = out.descriptor.cell(i);
        auto& page = out.pages[cell.page];
        for (int y = 0; y < thumb_px; ++y) {
            const auto* src = t.at(0, y);
            std::copy(src, src + static_cast<std::size_t>(thumb_px) * 4,
                      page.at(cell.col * thumb_px, cell.row * thumb_px + y));
        }
    }
    return out;
}

ColumnSummary summarize_column(std::span<const float> values, int bin_count) {
    if (values.empty()) throw InvalidArgument("summarize_column: empty column");
    ColumnSummary s;
    s.bin_count = bin_count;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (float v : values) {
        if (std::isnan(v)) {
            ++s.missing_count;
            continue;
        }
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
    }
    if (s.missing_count == values.size()) {
        s.degenerate = true;
        return s;
    }
    s.min = lo;
    s.max = hi;
    s.degenerate = lo == hi;
    return s;
}

ProjectionRequest::Method method_from_string(std::string_view text) {
    if (text == "pca") return ProjectionRequest::Method::Pca;
    if (text == "tsne") return ProjectionRequest::Method::Tsne;
    if (text == "axis") return ProjectionRequest::Method::Axis;
    if (text == "import") return ProjectionRequest::Method::Import;
    throw ValidationError("unknown projection method '" + std::string(text) + "'");
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::optional<std::pair<std::size_t, std::size_t>> parse_shape(const json& j) {
    if (j.is_null()) return std::nullopt;
    if (!j.is_array() || j.size() != 2) throw ValidationError("shape must be [rows, cols]");
    return std::pair{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace

IngestConfig IngestConfig::from_json(const json& j, const fs::path& base) {
    IngestConfig c;
    try {
        c.name = j.value("name", c.name);
        if (!j.contains("metadata_path")) throw ValidationError("config: metadata_path is required");
        c.metadata_path = resolve(base, j.at("metadata_path").get<std::string>());
        if (!j.contains("images_path")) throw ValidationError("config: images_path is required");
        c.images_path = resolve(base, j.at("images_path").get<std::string>());
        if (j.contains("image_column")) c.image_column = j.at("image_column").get<std::string>();
        if (j.contains("embeddings_path")) c.embeddings_path = resolve(base, j.at("embeddings_path").get<std::string>());
        if (j.contains("embeddings_shape")) c.embeddings_shape = parse_shape(j.at("embeddings_shape"));
        for (const auto& d : j.value("dimension_columns", json::array())) {
            DimensionSource src;
            if (d.contains("source")) src.column = d.at("source").get<std::string>();
            if (d.contains("embedding")) src.embedding = d.at("embedding").get<std::size_t>();
            if (src.column.has_value() == src.embedding.has_value())
                throw ValidationError("dimension column needs exactly one of 'source' or 'embedding'");
            const std::string fallback =
                src.column ? *src.column : "embedding_" + std::to_string(*src.embedding);
            src.name = d.value("name", fallback);
            src.label = d.value("label", src.name);
            src.bin_count = d.value("bin_count", kDefaultBinCount);
            if (src.bin_count < 1) throw ValidationError("dimension '" + src.name + "': bin_count must be positive");
            c.dimension_columns.push_back(std::move(src));
        }
        const auto kinds = j.value("field_kinds", json::object());
        for (const auto& [field, kind] : kinds.items())
            c.field_kinds[field] = field_kind_from_string(kind.get<std::string>());
        if (j.contains("cluster_fields")) c.cluster_fields = j.at("cluster_fields").get<std::vector<std::string>>();
        if (j.contains("preview_column")) c.preview_column = j.at("preview_column").get<std::string>();
        c.thumb_px = j.value("thumb_px", c.thumb_px);
        c.page_px = j.value("page_px", c.page_px);
        if (j.contains("subset")) {
            const auto& s = j.at("subset");
            c.subset = std::pair{s.at("k").get<std::size_t>(), s.value("seed", std::uint64_t{0})};
        }
        for (const auto& p : j.value("projections", json::array())) {
            ProjectionRequest r;
            r.method = method_from_string(p.at("method").get<std::string>());
            r.name = p.value("name", p.at("method").get<std::string>());
            switch (r.method) {
                case ProjectionRequest::Method::Tsne:
                    r.tsne.perplexity = p.value("perplexity", r.tsne.perplexity);
                    r.tsne.iterations = p.value("iterations", r.tsne.iterations);
                    r.tsne.learning_rate = p.value("learning_rate", r.tsne.learning_rate);
                    r.tsne.seed = p.value("seed", r.tsne.seed);
                    break;
                case ProjectionRequest::Method::Axis:
                    r.x = p.at("x").get<std::string>();
                    r.y = p.at("y").get<std::string>();
                    break;
                case ProjectionRequest::Method::Import:
                    r.path = resolve(base, p.at("path").get<std::string>());
                    if (p.contains("shape")) r.shape = parse_shape(p.at("shape"));
                    break;
                case ProjectionRequest::Method::Pca: break;
            }
            c.projections.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    if (c.thumb_px <= 0 || c.page_px <= 0 || c.page_px % c.thumb_px != 0)
        throw ValidationError("config: thumb_px must divide page_px");
    return c;
}

IngestConfig IngestConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config parse failure: " + std::string(e.what()));
    }
    return from_json(j, path.parent_path());
}

namespace {

std::vector<fs::path> image_paths(const IngestConfig& config, const csv::Table& meta) {
    std::vector<fs::path> paths;
    if (config.image_column) {
        const auto it = std::find(meta.header.begin(), meta.header.end(), *config.image_column);
        if (it == meta.header.end())
            throw ValidationError("image column '" + *config.image_column + "' not in metadata");
        const auto col = static_cast<std::size_t>(it - meta.header.begin());
        for (const auto& row : meta.rows) paths.push_back(resolve(config.images_path, row[col]));
        return paths;
    }
    if (!fs::is_directory(config.images_path))
        throw IoError("images path " + config.images_path.string() + " is not a directory");
    for (const auto& entry : fs::directory_iterator(config.images_path)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.size() != meta.rows.size())
        throw ValidationError("image count mismatch: " + std::to_string(paths.size()) + " images for " +
                              std::to_string(meta.rows.size()) + " metadata rows");
    return paths;
}

std::vector<Image> make_thumbnails(const std::vector<fs::path>& paths, int side) {
    std::vector<Image> thumbs(paths.size());
    std::vector<std::exception_ptr> errors(paths.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < paths.size(); i = next++) {
            try {
                thumbs[i] = make_thumbnail(read_image(paths[i].string()), side);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 8));
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
            throw IoError("object " + std::to_string(i) + " (" + paths[i].string() + "): " + e.what());
        }
    }
    return thumbs;
}

struct Sources {
    const csv::Table* meta;
    const dimred::Matrix* embeddings;  // already subset; may be null
    const std::vector<std::size_t>* rows;
    std::map<std::string, std::vector<double>> dimensions;
};

std::vector<double> metadata_numbers(const Sources& s, const std::string& column) {
    const auto it = std::find(s.meta->header.begin(), s.meta->header.end(), column);
    if (it == s.meta->header.end()) throw ValidationError("unknown column '" + column + "'");
    const auto col = static_cast<std::size_t>(it - s.meta->header.begin());
    std::vector<std::string> values;
    for (auto r : *s.rows) values.push_back(s.meta->rows[r][col]);
    return dimred::numeric_column(values, column);
}

std::vector<double> embedding_numbers(const Sources& s, std::size_t index) {
    if (s.embeddings == nullptr) throw ValidationError("embedding column requested but no embeddings configured");
    if (index >= s.embeddings->cols)
        throw ValidationError("embedding index " + std::to_string(index) + " out of range (D = " +
                              std::to_string(s.embeddings->cols) + ")");
    std::vector<double> out(s.embeddings->rows);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*s.embeddings)(i, index);
    return out;
}

// Column reference: dimension name, metadata column, or "embedding:<i>".
std::vector<double> resolve_reference(const Sources& s, const std::string& ref) {
    if (const auto it = s.dimensions.find(ref); it != s.dimensions.end()) return it->second;
    if (std::find(s.meta->header.begin(), s.meta->header.end(), ref) != s.meta->header.end())
        return metadata_numbers(s, ref);
    if (ref.starts_with("embedding:")) return embedding_numbers(s, std::stoul(ref.substr(10)));
    throw ValidationError("cannot resolve column reference '" + ref + "'");
}

dimred::Matrix feature_matrix(const Sources& s, std::size_t n) {
    if (s.embeddings != nullptr) return *s.embeddings;
    if (s.dimensions.empty()) throw ValidationError("pca/tsne need embeddings or dimension columns");
    dimred::Matrix m(n, s.dimensions.size());
    std::size_t c = 0;
    for (const auto& [name, values] : s.dimensions) {
        for (std::size_t i = 0; i < n; ++i) {
            if (std::isnan(values[i]))
                throw ValidationError("dimension '" + name + "' has missing values; pass embeddings for pca/tsne");
            m(i, c) = values[i];
        }
        ++c;
    }
    return m;
}

std::vector<float> to_float(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [](double d) { return static_cast<float>(d); });
    return out;
}

}  // namespace

IngestReport run(const IngestConfig& config, const fs::path& out_dir) {
    const auto meta = csv::read_table(config.metadata_path.string());
    const std::size_t source_rows = meta.rows.size();
    if (source_rows == 0) throw ValidationError("metadata has no rows");

    std::optional<dimred::Matrix> embeddings;
    if (config.embeddings_path) {
        embeddings = dimred::read_matrix(*config.embeddings_path, config.embeddings_shape);
        if (embeddings->rows != source_rows)
            throw ValidationError("row count mismatch between metadata (" + std::to_string(source_rows) +
                                  ") and embeddings (" + std::to_string(embeddings->rows) + ")");
        for (double v : embeddings->data)
            if (!std::isfinite(v)) throw ValidationError("embeddings contain non-finite values");
    }

    IngestReport report;
    if (config.subset)
        report.source_indices = sample_subset(source_rows, config.subset->first, config.subset->second);
    else {
        report.source_indices.resize(source_rows);
        std::iota(report.source_indices.begin(), report.source_indices.end(), std::size_t{0});
    }
    const auto& rows = report.source_indices;
    const std::size_t n = rows.size();

    std::optional<dimred::Matrix> sub_embeddings;
    if (embeddings) {
        sub_embeddings = dimred::Matrix(n, embeddings->cols);
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(embeddings->row(rows[i]).begin(), embeddings->cols, sub_embeddings->data.begin() + i * embeddings->cols);
    }

    CollectionManifest m;
    m.name = config.name;
    m.object_count = n;

    // Metadata, in subset order, plus the source row when subsetting.
    MetadataTable out_meta;
    out_meta.fields = meta.header;
    out_meta.columns.assign(meta.header.size(), {});
    for (std::size_t f = 0; f < meta.header.size(); ++f)
        for (auto r : rows) out_meta.columns[f].push_back(meta.rows[r][f]);
    if (config.subset) {
        if (std::find(meta.header.begin(), meta.header.end(), "parent_index") != meta.header.end())
            throw ValidationError("metadata already has a parent_index column");
        out_meta.fields.push_back("parent_index");
        std::vector<std::string> parents;
        for (auto r : rows) parents.push_back(std::to_string(r));
        out_meta.columns.push_back(std::move(parents));
        m.subset = SubsetInfo{config.subset->second, source_rows};
    }
    for (const auto& [field, kind] : config.field_kinds)
        if (!out_meta.field_index(field)) throw ValidationError("field_kinds names unknown column '" + field + "'");
    for (std::size_t f = 0; f < out_meta.fields.size(); ++f) {
        FieldDescriptor fd;
        fd.name = out_meta.fields[f];
        if (const auto it = config.field_kinds.find(fd.name); it != config.field_kinds.end()) fd.kind = it->second;
        if (fd.kind == FieldKind::Categorical) {
            std::set<std::string> distinct;
            for (const auto& v : out_meta.columns[f])
                if (!v.empty()) distinct.insert(v);
            if (distinct.empty()) throw ValidationError("categorical field '" + fd.name + "' has no values");
            if (distinct.size() > kMaxCategoricalValues)
                throw ValidationError("categorical field '" + fd.name + "' has " + std::to_string(distinct.size()) +
                                      " distinct values (limit " + std::to_string(kMaxCategoricalValues) +
                                      "); declare it freetext");
            fd.values.assign(distinct.begin(), distinct.end());
        }
        m.metadata_fields.push_back(std::move(fd));
    }
    if (config.cluster_fields) {
        m.cluster_fields = *config.cluster_fields;
    } else {
        for (const auto& f : m.metadata_fields)
            if (f.kind == FieldKind::Categorical) m.cluster_fields.push_back(f.name);
    }
    if (config.preview_column) m.preview_field = *config.preview_column;

    // Thumbnails for the selected rows only.
    const auto all_paths = image_paths(config, meta);
    std::vector<fs::path> paths;
    for (auto r : rows) paths.push_back(all_paths[r]);
    const auto thumbs = make_thumbnails(paths, config.thumb_px);
    auto atlas = build_atlas(thumbs, config.thumb_px, config.page_px);
    m.atlas = atlas.descriptor;

    fs::create_directories(out_dir / "points");
    fs::create_directories(out_dir / "columns");
    fs::create_directories(out_dir / "atlas");

    Sources sources{&meta, sub_embeddings ? &*sub_embeddings : nullptr, &rows, {}};
    std::set<std::string> stems;
    for (const auto& d : config.dimension_columns) {
        auto values = d.column ? metadata_numbers(sources, *d.column) : embedding_numbers(sources, *d.embedding);
        const auto floats = to_float(values);
        const auto summary = summarize_column(floats, d.bin_count);
        const std::string stem = file_stem(d.name);
        if (!stems.insert(stem).second) throw ValidationError("dimension name '" + d.name + "' collides with another");
        const std::string file = "columns/" + stem + ".bin";
        write_f32_file(out_dir / file, floats);
        m.dimensions.push_back({d.name, d.label, file, summary.min, summary.max, d.bin_count, summary.missing_count});
        // Axis projections see exactly the stored float values.
        std::vector<double> stored(floats.begin(), floats.end());
        sources.dimensions.emplace(d.name, std::move(stored));
    }

    stems.clear();
    for (const auto& req : config.projections) {
        ProjectionTable table;
        switch (req.method) {
            case ProjectionRequest::Method::Pca: {
                const auto x = feature_matrix(sources, n);
                const auto result = dimred::pca(x, 2);
                table = {req.name, 2, normalize_projection(std::span<const double>(result.coords.data), 2)};
                break;
            }
            case ProjectionRequest::Method::Tsne: {
                const auto x = feature_matrix(sources, n);
                const auto result = dimred::tsne(x, req.tsne);
                table = {req.name, 2, normalize_projection(std::span<const double>(result.embedding.data), 2)};
                break;
            }
            case ProjectionRequest::Method::Axis: {
                auto axis = dimred::axis_projection(req.name, resolve_reference(sources, req.x),
                                                    resolve_reference(sources, req.y));
                report.axis_missing[req.name] = std::move(axis.missing);
                table = std::move(axis.table);
                break;
            }
            case ProjectionRequest::Method::Import: {
                // Imported coordinates cover every source row.
                auto full = dimred::import_projection(req.path, req.name, source_rows, req.shape);
                if (config.subset) {
                    std::vector<double> raw;
                    for (auto r : rows)
                        for (int d = 0; d < full.dims; ++d) raw.push_back(full.coords[r * full.dims + d]);
                    full.coords = normalize_projection(std::span<const double>(raw), full.dims);
                }
                table = std::move(full);
                break;
            }
        }
        const std::string stem = file_stem(req.name);
        if (!stems.insert(stem).second) throw ValidationError("projection name '" + req.name + "' collides with another");
        const std::string file = "points/" + stem + ".bin";
        write_f32_file(out_dir / file, table.coords);
        m.projections.push_back({req.name, file, table.dims});
    }

    for (std::size_t p = 0; p < atlas.pages.size(); ++p)
        write_png((out_dir / "atlas" / ("page_" + std::to_string(p) + ".png")).string(), atlas.pages[p]);
    {
        std::ofstream out(out_dir / "metadata.csv", std::ios::binary);
        if (!out) throw IoError("cannot write metadata.csv");
        out << out_meta.to_csv();
    }
    write_manifest(out_dir, m);
    report.manifest = load_manifest(out_dir);
    return report;
}

}  // namespace csn::ingest
