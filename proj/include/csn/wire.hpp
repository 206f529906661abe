#pragma once

// JSON forms of filter state, views and filter results, plus the one
// evaluation path shared by the HTTP service and the CLI so both produce
// identical bytes for identical inputs.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csn/bitmask.hpp"
#include "csn/bundle.hpp"
#include "csn/exports.hpp"
#include "csn/filters.hpp"

namespace csn::wire {

using json = nlohmann::json;

struct FilterRequest {
    std::vector<filters::RangeFilter> ranges;
    std::string query;
};

/// {"ranges": [{"dimension", "lo", "hi", "closed_right"?}], "query": "..."}
/// Both keys are optional. Throws InvalidArgument on malformed input.
FilterRequest parse_filter_request(const json& body);
std::vector<filters::RangeFilter> parse_ranges(const json& ranges);

/// {"projection", "center": [x, y], "zoom", "canvas_px", "thumb_size",
///  "thumb_scale", "show_greyed"}; missing keys take ViewState defaults and
/// the projection defaults to the bundle's first one.
exports::ViewState parse_view(const json& view, const CollectionManifest& manifest);

struct QueryError {
    std::string message;
    std::optional<std::size_t> position;
    std::string expected;
    std::string found;
};

/// Source of per-filter bit arrays; lets callers plug in a cache.
using RangeBitsProvider = std::function<std::shared_ptr<const Bitmask>(const filters::ColumnView&,
                                                                       const filters::RangeFilter&)>;

struct FilterOutcome {
    SelectionMask range_mask;
    SelectionMask mask;  // range_mask AND query mask (range_mask alone on query errors)
    std::vector<QueryError> query_errors;
};

/// Range filters AND the query. Unknown dimensions and bad ranges throw
/// InvalidArgument; query parse and field errors are reported in
/// query_errors and leave the mask at the ranges-only result.
FilterOutcome run_filter(const Bundle& bundle, const FilterRequest& request,
                         const RangeBitsProvider& provider = {});

json query_errors_to_json(const std::vector<QueryError>& errors);
json histograms_to_json(const filters::HistogramSet& histograms);

/// {"length", "mask": run lengths starting with a false-run, "pass_count",
///  "histograms", "query_errors"}
json filter_response(const FilterOutcome& outcome, const filters::HistogramSet& histograms);

}  // namespace csn::wire
