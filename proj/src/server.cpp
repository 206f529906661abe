#include "csn/server.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "csn/error.hpp"
#include "csn/wire.hpp"

namespace csn::server {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary endpoints assume a little-endian host");

namespace {

constexpr std::size_t kMaxCachedMasks = 4096;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
        const auto j = std::min(path.find('/', i), path.size());
        if (j > i) parts.emplace_back(path.substr(i, j - i));
        i = j + 1;
    }
    return parts;
}

Response json_response(const json& j, int status = 200) { return {status, "application/json", j.dump()}; }

template <class T>
Response binary_response(const std::vector<T>& values) {
    std::string body(values.size() * sizeof(T), '\0');
    if (!body.empty()) std::memcpy(body.data(), values.data(), body.size());
    return {200, "application/octet-stream", std::move(body)};
}

json floats_to_json(const std::vector<float>& values) {
    json out = json::array();
    for (float v : values) out.push_back(std::isnan(v) ? json(nullptr) : json(v));
    return out;
}

bool wants_json(const std::multimap<std::string, std::string>& params) {
    const auto it = params.find("format");
    return it != params.end() && it->second == "json";
}

json parse_body(std::string_view body) {
    if (body.empty()) return json::object();
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw InvalidArgument(std::string("malformed JSON body: ") + e.what());
    }
}

std::string content_type_for(const fs::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".html") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".png") return "image/png";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".wasm") return "application/wasm";
    return "application/octet-stream";
}

constexpr std::string_view kPlaceholderPage =
    "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>csn</title></head>\n"
    "<body><p>The browser client is not installed. Start the server with --ui pointing at a built client.</p>\n"
    "<p>API: <a href=\"/api/datasets\">/api/datasets</a></p></body></html>\n";

}  // namespace

Response error_response(int status, std::string_view message) {
    return json_response({{"error", {{"status", status}, {"message", message}}}}, status);
}

std::vector<fs::path> discover_bundles(const fs::path& root) {
    if (fs::is_regular_file(root / "manifest.json")) return {root};
    if (!fs::is_directory(root)) throw IoError("bundle root " + root.string() + " is not a directory");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory() && fs::is_regular_file(entry.path() / "manifest.json")) out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw ValidationError("no bundles found under " + root.string());
    return out;
}

Service::Service(const std::vector<fs::path>& bundle_dirs, std::optional<fs::path> ui_dir)
    : ui_dir_(std::move(ui_dir)) {
    for (const auto& dir : bundle_dirs) {
        auto ds = std::make_unique<Dataset>();
        ds->id = fs::path(dir).lexically_normal().filename().string();
        if (ds->id.empty()) ds->id = fs::absolute(dir).lexically_normal().parent_path().filename().string();
        if (find(ds->id) != nullptr) throw ValidationError("bundle " + dir.string() + ": duplicate dataset id '" + ds->id + "'");
        try {
            ds->bundle = load_bundle(dir);
            for (int k = 0; k < ds->bundle.manifest.atlas.page_count; ++k)
                ds->atlas_png.push_back(read_file(ds->bundle.atlas_page_path(k)));
            ds->atlas = std::make_unique<exports::Atlas>(exports::Atlas::load(ds->bundle));
        } catch (const std::exception& e) {
            throw ValidationError("bundle " + dir.string() + ": " + e.what());
        }
        ds->columns = filters::column_views(ds->bundle);
        datasets_.push_back(std::move(ds));
    }
    if (ui_dir_ && !fs::is_directory(*ui_dir_)) throw IoError("ui directory " + ui_dir_->string() + " does not exist");
}

const Dataset* Service::find(std::string_view id) const {
    for (const auto& d : datasets_)
        if (d->id == id) return d.get();
    return nullptr;
}

std::size_t Service::cached_masks() const {
    std::shared_lock lock(cache_mutex_);
    return cache_.size();
}

Response Service::handle(std::string_view method, std::string_view path,
                         const std::multimap<std::string, std::string>& params, std::string_view body) const {
    try {
        const auto parts = split_path(path);
        if (parts.size() >= 2 && parts[0] == "api" && parts[1] == "datasets") {
            if (parts.size() == 2) {
                if (method != "GET") return error_response(405, "method not allowed");
                return datasets();
            }
            const Dataset* ds = find(parts[2]);
            if (ds == nullptr) return error_response(404, "unknown dataset '" + parts[2] + "'");
            return dataset_route(method, *ds, {parts.begin() + 3, parts.end()}, params, body);
        }
        if (!parts.empty() && parts[0] == "api") return error_response(404, "no such endpoint");
        if (method != "GET") return error_response(405, "method not allowed");
        return static_file(path);
    } catch (const InvalidArgument& e) {
        return error_response(400, e.what());
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

Response Service::datasets() const {
    json out = json::array();
    for (const auto& d : datasets_) {
        const auto& m = d->bundle.manifest;
        json projections = json::array(), dimensions = json::array();
        for (const auto& p : m.projections) projections.push_back(p.name);
        for (const auto& dim : m.dimensions) dimensions.push_back(dim.name);
        out.push_back({{"id", d->id},
                       {"name", m.name},
                       {"object_count", m.object_count},
                       {"projections", projections},
                       {"dimensions", dimensions}});
    }
    return json_response(out);
}

Response Service::dataset_route(std::string_view method, const Dataset& ds, const std::vector<std::string>& rest,
                                const std::multimap<std::string, std::string>& params, std::string_view body) const {
    if (rest.empty()) return error_response(404, "no such endpoint");
    const auto& what = rest[0];
    const bool is_post = what == "filter" || what == "export";
    if (is_post != (method == "POST")) {
        const bool known = what == "manifest" || what == "points" || what == "columns" || what == "atlas" ||
                           what == "metadata" || is_post;
        return known ? error_response(405, "method not allowed") : error_response(404, "no such endpoint");
    }
    const auto& m = ds.bundle.manifest;

    if (what == "manifest" && rest.size() == 1) return {200, "application/json", manifest_to_json(m)};
    if (what == "metadata" && rest.size() == 1) return {200, "text/csv; charset=utf-8", ds.bundle.metadata.to_csv()};
    if (what == "points" && rest.size() == 2) {
        const auto it = ds.bundle.projections.find(rest[1]);
        if (it == ds.bundle.projections.end()) return error_response(404, "unknown projection '" + rest[1] + "'");
        if (wants_json(params))
            return json_response({{"name", it->second.name}, {"dims", it->second.dims},
                                  {"coords", floats_to_json(it->second.coords)}});
        return binary_response(it->second.coords);
    }
    if (what == "columns" && rest.size() == 2) {
        const auto* c = ds.bundle.find_column(rest[1]);
        if (c == nullptr) return error_response(404, "unknown dimension '" + rest[1] + "'");
        if (wants_json(params))
            return json_response({{"name", c->descriptor.name}, {"values", floats_to_json(c->values)}});
        return binary_response(c->values);
    }
    if (what == "atlas" && rest.size() == 2) {
        std::size_t page = 0;
        const auto& s = rest[1];
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), page);
        if (ec != std::errc{} || ptr != s.data() + s.size() || page >= ds.atlas_png.size())
            return error_response(404, "no atlas page '" + s + "'");
        return {200, "image/png", ds.atlas_png[page]};
    }
    if (what == "filter" && rest.size() == 1) return filter(ds, body);
    if (what == "export" && rest.size() == 2) {
        if (rest[1] == "csv") return export_csv(ds, body);
        if (rest[1] == "png") return export_png(ds, body);
        return error_response(404, "unknown export format '" + rest[1] + "'");
    }
    return error_response(404, "no such endpoint");
}

std::shared_ptr<const Bitmask> Service::range_bits(const Dataset& ds, const filters::ColumnView& column,
                                                   const filters::RangeFilter& range) const {
    CacheKey key{ds.id, std::string(column.name), range.lo, range.hi, range.closed_right};
    {
        std::shared_lock lock(cache_mutex_);
        if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto bits = std::make_shared<const Bitmask>(filters::range_bits(column.values, range.lo, range.hi, range.closed_right));
    std::unique_lock lock(cache_mutex_);
    if (cache_.size() >= kMaxCachedMasks) cache_.clear();
    return cache_.try_emplace(std::move(key), std::move(bits)).first->second;
}

Response Service::filter(const Dataset& ds, std::string_view body) const {
    const auto request = wire::parse_filter_request(parse_body(body));
    const auto outcome = wire::run_filter(ds.bundle, request, [&](const auto& col, const auto& r) {
        return range_bits(ds, col, r);
    });
    return json_response(wire::filter_response(outcome, filters::filtered_histograms(ds.columns, outcome.mask)));
}

Response Service::export_csv(const Dataset& ds, std::string_view body) const {
    const auto request = wire::parse_filter_request(parse_body(body));
    const auto outcome = wire::run_filter(ds.bundle, request);
    if (!outcome.query_errors.empty())
        return json_response({{"error", {{"status", 400}, {"message", "query errors"}}},
                              {"query_errors", wire::query_errors_to_json(outcome.query_errors)}},
                             400);
    return {200, "text/csv; charset=utf-8", exports::export_csv(ds.bundle.metadata, outcome.mask)};
}

Response Service::export_png(const Dataset& ds, std::string_view body) const {
    const auto j = parse_body(body);
    if (!j.is_object() || !j.contains("view")) throw InvalidArgument("png export requires a view");
    json filter_part = j;
    filter_part.erase("view");
    const auto request = wire::parse_filter_request(filter_part);
    const auto view = wire::parse_view(j.at("view"), ds.bundle.manifest);
    const auto outcome = wire::run_filter(ds.bundle, request);
    if (!outcome.query_errors.empty())
        return json_response({{"error", {{"status", 400}, {"message", "query errors"}}},
                              {"query_errors", wire::query_errors_to_json(outcome.query_errors)}},
                             400);
    const auto png = exports::render_png(ds.bundle.projection(view.projection), *ds.atlas, outcome.mask, view);
    return {200, "image/png", std::string(png.begin(), png.end())};
}

Response Service::static_file(std::string_view path) const {
    if (!ui_dir_) {
        if (path == "/" || path == "/index.html") return {200, "text/html; charset=utf-8", std::string(kPlaceholderPage)};
        return error_response(404, "not found");
    }
    fs::path rel;
    for (const auto& part : split_path(path)) {
        if (part == ".." || part == ".") return error_response(404, "not found");
        rel /= part;
    }
    if (rel.empty()) rel = "index.html";
    const auto full = *ui_dir_ / rel;
    if (!fs::is_regular_file(full)) return error_response(404, "not found");
    return {200, content_type_for(full), read_file(full)};
}

struct HttpServer::Impl {
    const Service& service;
    httplib::Server http;
    explicit Impl(const Service& s) : service(s) {}
};

HttpServer::HttpServer(const Service& service) : impl_(std::make_unique<Impl>(service)) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        std::multimap<std::string, std::string> params(req.params.begin(), req.params.end());
        const auto r = impl_->service.handle(req.method, req.path, params, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    // SO_REUSEADDR only: httplib's default also sets SO_REUSEPORT, which lets
    // a second server bind a busy port silently.
    impl_->http.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    impl_->http.Get(".*", handler);
    impl_->http.Post(".*", handler);
    impl_->http.Put(".*", handler);
    impl_->http.Delete(".*", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    int bound = -1;
    if (port == 0)
        bound = impl_->http.bind_to_any_port(host);
    else
        bound = impl_->http.bind_to_port(host, port) ? port : -1;
    if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port) + " (port busy?)");
    return bound;
}

void HttpServer::listen() { impl_->http.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->http.stop();
}

}  // namespace csn::server
