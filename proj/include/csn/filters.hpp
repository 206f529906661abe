#pragma once

// Range filters over dimension columns, histograms of total vs. passing
// objects, and the bin intervals used by Bin Mode.
//
// Bin rule: with w = (max - min) / bin_count, bin b covers
// [min + b*w, min + (b+1)*w) and the last bin is closed on the right at max.
// Bin membership is decided by comparing against those same edge values, so
// a range filter built from bin_interval(b) selects exactly the objects
// counted in total[b].

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csn/bitmask.hpp"

namespace csn {
struct Bundle;
}

namespace csn::filters {

struct Domain {
    double min = 0.0;
    double max = 0.0;
    bool degenerate() const { return min == max; }
};

struct RangeFilter {
    std::string dimension;
    double lo = 0.0;
    double hi = 0.0;
    /// Whether hi itself passes. Slider ranges are closed; interior bins are not.
    bool closed_right = true;
    bool operator==(const RangeFilter&) const = default;
};

/// A filter is inactive iff it covers the whole domain; inactive filters
/// impose no constraint, so objects missing that dimension still pass.
bool is_active(const RangeFilter& filter, const Domain& domain);

/// Throws InvalidArgument unless lo <= hi and both lie in the domain
/// (with a tolerance of 1e-6 of the domain width).
void check_range(const RangeFilter& filter, const Domain& domain);

/// Non-owning view of one filterable column.
struct ColumnView {
    std::string_view name;
    std::span<const float> values;  // NaN = missing
    Domain domain;
    int bin_count = 30;
};

std::vector<ColumnView> column_views(const Bundle& bundle);

/// Bits set where lo <= value <= hi (or < hi when open); missing values fail.
Bitmask range_bits(std::span<const float> values, double lo, double hi, bool closed_right);

/// Conjunction of all active filters. Throws InvalidArgument on an unknown dimension.
SelectionMask apply_range_filters(std::span<const ColumnView> columns, std::span<const RangeFilter> ranges,
                                  std::size_t object_count);

double bin_edge(int edge, int bin_count, const Domain& domain);

/// Bin of a value under the rule above; nullopt for missing or out-of-domain values.
std::optional<int> bin_index(double value, int bin_count, const Domain& domain);

struct BinInterval {
    double lo;
    double hi;
    bool closed_right;
};

BinInterval bin_interval(const Domain& domain, int bin_count, int bin);

struct HistogramCounts {
    std::vector<std::uint64_t> counts;
    std::size_t missing = 0;
    std::size_t out_of_domain = 0;
};

HistogramCounts histogram(std::span<const float> values, int bin_count, const Domain& domain);

struct DimensionHistogram {
    std::string dimension;
    std::vector<std::uint64_t> total;
    std::vector<std::uint64_t> passing;
    std::size_t missing = 0;
    std::size_t missing_passing = 0;
    bool operator==(const DimensionHistogram&) const = default;
};

using HistogramSet = std::vector<DimensionHistogram>;

HistogramSet filtered_histograms(std::span<const ColumnView> columns, const SelectionMask& mask);

/// Incremental evaluator owned by one session.
///
/// Keeps one cached bit array per dimension filter plus precomputed bin
/// indices, so changing one slider recomputes that dimension's bits and
/// re-ANDs the cached arrays.
class FilterEngine {
public:
    FilterEngine(std::vector<ColumnView> columns, std::size_t object_count);

    std::size_t size() const { return size_; }
    std::span<const ColumnView> columns() const { return columns_; }

    /// Replaces the whole filter state; dimensions absent from `ranges` are cleared.
    const SelectionMask& set_ranges(std::span<const RangeFilter> ranges);
    const SelectionMask& set_range(const RangeFilter& range);
    const SelectionMask& clear_range(std::string_view dimension);
    const SelectionMask& mask() const { return mask_; }

    std::vector<RangeFilter> ranges() const;

    /// Histograms for an arbitrary mask, using the cached bin indices.
    HistogramSet histograms(const SelectionMask& mask) const;

    /// Number of per-dimension bit arrays recomputed since construction.
    std::size_t recomputations() const { return recomputations_; }

private:
    struct Slot {
        std::optional<RangeFilter> filter;
        bool active = false;
        Bitmask bits;
    };

    std::size_t dimension_index(std::string_view name) const;
    void assign(std::size_t dim, const std::optional<RangeFilter>& filter);
    void recombine();

    std::vector<ColumnView> columns_;
    std::size_t size_ = 0;
    std::vector<Slot> slots_;
    std::vector<std::vector<std::int32_t>> bins_;  // -1 = missing or out of domain
    std::vector<std::vector<std::uint64_t>> totals_;
    std::vector<std::size_t> missing_;
    SelectionMask mask_;
    std::size_t recomputations_ = 0;
};

}  // namespace csn::filters
