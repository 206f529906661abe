// csn: ingest bundles, compute projections, query, export and serve.

#include <csignal>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csn/bench.hpp"
#include "csn/bundle.hpp"
#include "csn/dimred.hpp"
#include "csn/error.hpp"
#include "csn/exports.hpp"
#include "csn/ingest.hpp"
#include "csn/query.hpp"
#include "csn/server.hpp"
#include "csn/wire.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kFailure = 1, kInvalid = 2, kIo = 3 };

int report(std::string_view kind, std::string_view message, int code) {
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
    return code;
}

std::optional<std::pair<std::size_t, std::size_t>> parse_shape(const std::string& text) {
    if (text.empty()) return std::nullopt;
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw csn::InvalidArgument("shape must look like N,D");
    try {
        return std::pair{static_cast<std::size_t>(std::stoull(text.substr(0, comma))),
                         static_cast<std::size_t>(std::stoull(text.substr(comma + 1)))};
    } catch (const std::logic_error&) {
        throw csn::InvalidArgument("shape must look like N,D");
    }
}

json parse_json_arg(const std::string& text, std::string_view what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw csn::InvalidArgument(std::string(what) + " is not valid JSON: " + e.what());
    }
}

void write_bytes(const fs::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw csn::IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw csn::IoError("write failed for " + path.string());
}

csn::wire::FilterOutcome filter_or_throw(const csn::Bundle& bundle, const std::string& q, const std::string& ranges) {
    csn::wire::FilterRequest request;
    request.query = q;
    if (!ranges.empty()) request.ranges = csn::wire::parse_ranges(parse_json_arg(ranges, "--ranges"));
    auto outcome = csn::wire::run_filter(bundle, request);
    if (!outcome.query_errors.empty()) {
        const auto& e = outcome.query_errors.front();
        throw csn::InvalidArgument("query error: " + e.message);
    }
    return outcome;
}

// Bundle-side column reference: dimension name, then metadata column.
std::vector<double> bundle_reference(const csn::Bundle& bundle, const std::string& ref) {
    if (const auto* c = bundle.find_column(ref)) return {c->values.begin(), c->values.end()};
    if (const auto f = bundle.metadata.field_index(ref)) return csn::dimred::numeric_column(bundle.metadata.columns[*f], ref);
    throw csn::ValidationError("cannot resolve column reference '" + ref + "'");
}

csn::dimred::Matrix bundle_features(const csn::Bundle& bundle, const std::string& embeddings, const std::string& shape) {
    if (!embeddings.empty()) {
        auto m = csn::dimred::read_matrix(embeddings, parse_shape(shape));
        if (m.rows != bundle.size())
            throw csn::ValidationError("row count mismatch between bundle (" + std::to_string(bundle.size()) +
                                       ") and embeddings (" + std::to_string(m.rows) + ")");
        return m;
    }
    if (bundle.columns.empty()) throw csn::ValidationError("no embeddings given and the bundle has no dimensions");
    csn::dimred::Matrix m(bundle.size(), bundle.columns.size());
    for (std::size_t c = 0; c < bundle.columns.size(); ++c)
        for (std::size_t i = 0; i < bundle.size(); ++i) {
            const float v = bundle.columns[c].values[i];
            if (std::isnan(v))
                throw csn::ValidationError("dimension '" + bundle.columns[c].descriptor.name +
                                           "' has missing values; pass --embeddings");
            m(i, c) = v;
        }
    return m;
}

struct ProjectArgs {
    std::string bundle, method, name, x, y, path, shape, embeddings, embeddings_shape;
    csn::dimred::TsneParams tsne;
};

int run_project(const ProjectArgs& a) {
    auto bundle = csn::load_bundle(a.bundle);
    const auto method = csn::ingest::method_from_string(a.method);
    const std::string name = a.name.empty() ? a.method : a.name;
    csn::ProjectionTable table;
    json flagged = json::array();
    using M = csn::ingest::ProjectionRequest::Method;
    switch (method) {
        case M::Pca: {
            const auto r = csn::dimred::pca(bundle_features(bundle, a.embeddings, a.embeddings_shape), 2);
            table = {name, 2, csn::normalize_projection(std::span<const double>(r.coords.data), 2)};
            break;
        }
        case M::Tsne: {
            const auto r = csn::dimred::tsne(bundle_features(bundle, a.embeddings, a.embeddings_shape), a.tsne);
            table = {name, 2, csn::normalize_projection(std::span<const double>(r.embedding.data), 2)};
            break;
        }
        case M::Axis: {
            if (a.x.empty() || a.y.empty()) throw csn::InvalidArgument("axis projection needs --x and --y");
            auto r = csn::dimred::axis_projection(name, bundle_reference(bundle, a.x), bundle_reference(bundle, a.y));
            for (auto i : r.missing) flagged.push_back(i);
            table = std::move(r.table);
            break;
        }
        case M::Import:
            if (a.path.empty()) throw csn::InvalidArgument("import needs --path");
            table = csn::dimred::import_projection(a.path, name, bundle.size(), parse_shape(a.shape));
            break;
    }
    auto manifest = bundle.manifest;
    const std::string file = "points/" + csn::file_stem(name) + ".bin";
    for (const auto& p : manifest.projections)
        if (p.name != name && p.file == file)
            throw csn::ValidationError("projection name '" + name + "' collides with '" + p.name + "'");
    std::erase_if(manifest.projections, [&](const auto& p) { return p.name == name; });
    manifest.projections.push_back({name, file, table.dims});
    fs::create_directories(fs::path(a.bundle) / "points");
    csn::write_f32_file(fs::path(a.bundle) / file, table.coords);
    csn::write_manifest(a.bundle, manifest);
    std::cout << json{{"projection", name}, {"file", file}, {"dims", table.dims}, {"missing", flagged}}.dump() << '\n';
    return kOk;
}

csn::server::HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Explore image collections: build bundles, project, filter and export."};
    app.require_subcommand(1);

    std::string config_path, out_dir, shape_override;
    auto* ingest = app.add_subcommand("ingest", "Build a bundle from a JSON config");
    ingest->add_option("--config", config_path, "Ingest config (JSON)")->required();
    ingest->add_option("--out", out_dir, "Output bundle directory")->required();
    ingest->add_option("--embeddings-shape", shape_override, "N,D for raw float32 embeddings");

    ProjectArgs pa;
    auto* project = app.add_subcommand("project", "Compute a projection and register it in a bundle");
    project->add_option("--bundle", pa.bundle)->required();
    project->add_option("--method", pa.method)->required()->check(CLI::IsMember({"pca", "tsne", "axis", "import"}));
    project->add_option("--name", pa.name, "Projection name (default: the method)");
    project->add_option("--x", pa.x, "axis: x column");
    project->add_option("--y", pa.y, "axis: y column");
    project->add_option("--path", pa.path, "import: coordinates file");
    project->add_option("--shape", pa.shape, "import: N,D for raw float32");
    project->add_option("--embeddings", pa.embeddings, "pca/tsne: feature matrix (default: dimension columns)");
    project->add_option("--embeddings-shape", pa.embeddings_shape, "N,D for raw float32 embeddings");
    project->add_option("--perplexity", pa.tsne.perplexity);
    project->add_option("--iterations", pa.tsne.iterations);
    project->add_option("--learning-rate", pa.tsne.learning_rate);
    project->add_option("--seed", pa.tsne.seed);

    std::string bundle_dir, q, ranges, csv_out, png_out, view_text;
    auto* query = app.add_subcommand("query", "Print indices of objects matching a query");
    query->add_option("--bundle", bundle_dir)->required();
    query->add_option("--q", q, "Query text");
    query->add_option("--ranges", ranges, "Range filters as JSON");

    auto* exp = app.add_subcommand("export", "Export filtered metadata and/or a PNG view");
    exp->add_option("--bundle", bundle_dir)->required();
    exp->add_option("--q", q, "Query text");
    exp->add_option("--ranges", ranges, "Range filters as JSON");
    exp->add_option("--csv", csv_out, "CSV output path");
    exp->add_option("--png", png_out, "PNG output path");
    exp->add_option("--view", view_text, "View state as JSON");

    std::vector<std::string> bundle_roots;
    std::string host = "127.0.0.1", ui_dir;
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Serve bundles over HTTP");
    serve->add_option("--bundles", bundle_roots, "Bundle directories, or directories containing bundles")->required();
    serve->add_option("--port", port, "Port (0 picks a free one)");
    serve->add_option("--host", host);
    serve->add_option("--ui", ui_dir, "Directory with the built browser client");

    csn::bench::FilterBenchConfig bc;
    auto* bench = app.add_subcommand("bench", "Time the filter engine");
    bench->add_option("--objects", bc.objects);
    bench->add_option("--dimensions", bc.dimensions);
    bench->add_option("--repetitions", bc.repetitions);
    bench->add_option("--seed", bc.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report("usage", e.what(), kInvalid);
    }

    try {
        if (*ingest) {
            auto config = csn::ingest::IngestConfig::load(config_path);
            if (!shape_override.empty()) config.embeddings_shape = parse_shape(shape_override);
            const auto r = csn::ingest::run(config, out_dir);
            json missing = json::object();
            for (const auto& [name, idx] : r.axis_missing) missing[name] = idx;
            std::cout << json{{"bundle", out_dir}, {"objects", r.manifest.object_count}, {"axis_missing", missing}}.dump()
                      << '\n';
        } else if (*project) {
            return run_project(pa);
        } else if (*query) {
            const auto bundle = csn::load_bundle(bundle_dir);
            const auto outcome = filter_or_throw(bundle, q, ranges);
            std::string out;
            for (auto i : outcome.mask.indices()) out += std::to_string(i) + '\n';
            std::cout << out;
        } else if (*exp) {
            if (csv_out.empty() && png_out.empty()) throw csn::InvalidArgument("nothing to export; pass --csv and/or --png");
            const auto bundle = csn::load_bundle(bundle_dir);
            std::optional<csn::exports::ViewState> view;
            if (!png_out.empty())
                view = csn::wire::parse_view(view_text.empty() ? json::object() : parse_json_arg(view_text, "--view"),
                                             bundle.manifest);
            const auto outcome = filter_or_throw(bundle, q, ranges);
            if (!csv_out.empty()) write_bytes(csv_out, csn::exports::export_csv(bundle.metadata, outcome.mask));
            if (view) {
                const auto atlas = csn::exports::Atlas::load(bundle);
                const auto png = csn::exports::render_png(bundle.projection(view->projection), atlas, outcome.mask, *view);
                write_bytes(png_out, std::string_view(reinterpret_cast<const char*>(png.data()), png.size()));
            }
            std::cout << json{{"pass_count", outcome.mask.count()}}.dump() << '\n';
        } else if (*serve) {
            std::vector<fs::path> dirs;
            for (const auto& root : bundle_roots)
                for (auto& d : csn::server::discover_bundles(root)) dirs.push_back(std::move(d));
            csn::server::Service service(dirs, ui_dir.empty() ? std::nullopt : std::optional<fs::path>(ui_dir));
            csn::server::HttpServer http(service);
            const int bound = http.bind(host, port);
            g_server = &http;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << json{{"listening", host + ":" + std::to_string(bound)}, {"port", bound},
                              {"datasets", service.dataset_count()}}.dump()
                      << std::endl;
            http.listen();
            g_server = nullptr;
        } else if (*bench) {
            const auto r = csn::bench::run_filter_bench(bc);
            std::cout << csn::bench::to_json(r) << '\n';
            if (!r.consistent) return report("bench", "incremental mask differs from cold evaluation", kFailure);
        }
    } catch (const csn::InvalidArgument& e) {
        return report("invalid_argument", e.what(), kInvalid);
    } catch (const csn::ValidationError& e) {
        return report("validation", e.what(), kInvalid);
    } catch (const csn::IoError& e) {
        return report("io", e.what(), kIo);
    } catch (const std::exception& e) {
        return report("error", e.what(), kFailure);
    }
    return kOk;
}
