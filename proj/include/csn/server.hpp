#pragma once

// HTTP service over one or more loaded bundles. Routing lives in Service so
// it can be exercised without sockets; HttpServer binds it to cpp-httplib.

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "csn/bitmask.hpp"
#include "csn/bundle.hpp"
#include "csn/exports.hpp"
#include "csn/filters.hpp"

namespace csn::server {

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

struct Dataset {
    std::string id;
    Bundle bundle;
    std::vector<filters::ColumnView> columns;  // views into bundle
    std::unique_ptr<exports::Atlas> atlas;
    std::vector<std::string> atlas_png;  // page files as stored
};

/// Bundle directories under `root`: `root` itself when it holds a
/// manifest.json, otherwise each immediate subdirectory that does (sorted).
std::vector<std::filesystem::path> discover_bundles(const std::filesystem::path& root);

class Service {
public:
    /// Loads and validates every bundle; throws ValidationError naming the
    /// bundle on the first failure. Dataset ids are directory names.
    explicit Service(const std::vector<std::filesystem::path>& bundle_dirs,
                     std::optional<std::filesystem::path> ui_dir = std::nullopt);

    Response handle(std::string_view method, std::string_view path,
                    const std::multimap<std::string, std::string>& params, std::string_view body) const;

    const Dataset* find(std::string_view id) const;
    std::size_t dataset_count() const { return datasets_.size(); }
    std::size_t cached_masks() const;

private:
    using CacheKey = std::tuple<std::string, std::string, double, double, bool>;

    Response datasets() const;
    Response dataset_route(std::string_view method, const Dataset& ds, const std::vector<std::string>& rest,
                           const std::multimap<std::string, std::string>& params, std::string_view body) const;
    Response filter(const Dataset& ds, std::string_view body) const;
    Response export_csv(const Dataset& ds, std::string_view body) const;
    Response export_png(const Dataset& ds, std::string_view body) const;
    Response static_file(std::string_view path) const;
    std::shared_ptr<const Bitmask> range_bits(const Dataset& ds, const filters::ColumnView& column,
                                              const filters::RangeFilter& range) const;

    std::vector<std::unique_ptr<Dataset>> datasets_;
    std::optional<std::filesystem::path> ui_dir_;

    mutable std::shared_mutex cache_mutex_;
    mutable std::map<CacheKey, std::shared_ptr<const Bitmask>> cache_;
};

Response error_response(int status, std::string_view message);

class HttpServer {
public:
    explicit HttpServer(const Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds to `port` (0 picks a free one) and returns the bound port.
    /// Throws IoError when the port is unavailable.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace csn::server
