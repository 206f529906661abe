#include "csn/wire.hpp"

#include "csn/error.hpp"
#include "csn/query.hpp"

namespace csn::wire {

std::vector<filters::RangeFilter> parse_ranges(const json& ranges) {
    if (ranges.is_null()) return {};
    if (!ranges.is_array()) throw InvalidArgument("ranges must be an array");
    std::vector<filters::RangeFilter> out;
    for (const auto& r : ranges) {
        if (!r.is_object() || !r.contains("dimension") || !r.contains("lo") || !r.contains("hi"))
            throw InvalidArgument("each range needs dimension, lo and hi");
        try {
            filters::RangeFilter f;
            f.dimension = r.at("dimension").get<std::string>();
            f.lo = r.at("lo").get<double>();
            f.hi = r.at("hi").get<double>();
            f.closed_right = r.value("closed_right", true);
            out.push_back(std::move(f));
        } catch (const json::exception& e) {
            throw InvalidArgument(std::string("malformed range: ") + e.what());
        }
    }
    return out;
}

FilterRequest parse_filter_request(const json& body) {
    if (body.is_null()) return {};
    if (!body.is_object()) throw InvalidArgument("filter request must be a JSON object");
    FilterRequest req;
    if (body.contains("ranges")) req.ranges = parse_ranges(body.at("ranges"));
    if (body.contains("query")) {
        if (!body.at("query").is_string()) throw InvalidArgument("query must be a string");
        req.query = body.at("query").get<std::string>();
    }
    return req;
}

exports::ViewState parse_view(const json& view, const CollectionManifest& manifest) {
    if (!view.is_object()) throw InvalidArgument("view must be a JSON object");
    exports::ViewState v;
    try {
        if (view.contains("projection"))
            v.projection = view.at("projection").get<std::string>();
        else if (!manifest.projections.empty())
            v.projection = manifest.projections.front().name;
        if (view.contains("center")) {
            const auto& c = view.at("center");
            if (!c.is_array() || c.size() != 2) throw InvalidArgument("view center must be [x, y]");
            v.center_x = c[0].get<double>();
            v.center_y = c[1].get<double>();
        }
        v.zoom = view.value("zoom", v.zoom);
        v.canvas_px = view.value("canvas_px", v.canvas_px);
        v.thumb_size = view.value("thumb_size", v.thumb_size);
        v.thumb_scale = view.value("thumb_scale", v.thumb_scale);
        v.show_greyed = view.value("show_greyed", v.show_greyed);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed view: ") + e.what());
    }
    if (manifest.find_projection(v.projection) == nullptr)
        throw InvalidArgument("unknown projection '" + v.projection + "'");
    v.validate();
    return v;
}

FilterOutcome run_filter(const Bundle& bundle, const FilterRequest& request, const RangeBitsProvider& provider) {
    const auto columns = filters::column_views(bundle);
    const std::size_t n = bundle.size();
    FilterOutcome out;
    out.range_mask = SelectionMask(n, true);
    for (const auto& r : request.ranges) {
        const filters::ColumnView* col = nullptr;
        for (const auto& c : columns)
            if (c.name == r.dimension) col = &c;
        if (col == nullptr) throw InvalidArgument("unknown dimension '" + r.dimension + "'");
        filters::check_range(r, col->domain);
        if (!filters::is_active(r, col->domain)) continue;
        if (provider)
            out.range_mask &= *provider(*col, r);
        else
            out.range_mask &= filters::range_bits(col->values, r.lo, r.hi, r.closed_right);
    }

    out.mask = out.range_mask;
    try {
        const auto q = query::parse(request.query);
        if (!q.match_all()) {
            if (auto errors = query::validate_fields(q, bundle.metadata.fields); !errors.empty()) {
                for (auto& e : errors) out.query_errors.push_back({std::move(e), std::nullopt, "", ""});
            } else {
                out.mask &= query::evaluate(q, bundle.metadata, n);
            }
        }
    } catch (const query::ParseError& e) {
        out.query_errors.push_back({e.what(), e.position(), e.expected(), e.found()});
    }
    return out;
}

json query_errors_to_json(const std::vector<QueryError>& errors) {
    json out = json::array();
    for (const auto& e : errors) {
        json j = {{"message", e.message}};
        if (e.position) {
            j["position"] = *e.position;
            j["expected"] = e.expected;
            j["found"] = e.found;
        }
        out.push_back(std::move(j));
    }
    return out;
}

json histograms_to_json(const filters::HistogramSet& histograms) {
    json out = json::array();
    for (const auto& h : histograms)
        out.push_back({{"dimension", h.dimension},
                       {"total", h.total},
                       {"passing", h.passing},
                       {"missing", h.missing},
                       {"missing_passing", h.missing_passing}});
    return out;
}

json filter_response(const FilterOutcome& outcome, const filters::HistogramSet& histograms) {
    return {{"length", outcome.mask.size()},
            {"mask", run_length_encode(outcome.mask)},
            {"pass_count", outcome.mask.count()},
            {"histograms", histograms_to_json(histograms)},
            {"query_errors", query_errors_to_json(outcome.query_errors)}};
}

}  // namespace csn::wire
