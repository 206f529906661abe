#include "csn/filters.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "csn/bundle.hpp"
#include "csn/error.hpp"

namespace csn::filters {

bool is_active(const RangeFilter& f, const Domain& d) {
    const bool covers_right = f.hi > d.max || (f.hi == d.max && f.closed_right);
    return !(f.lo <= d.min && covers_right);
}

void check_range(const RangeFilter& f, const Domain& d) {
    if (!(f.lo <= f.hi))
        throw InvalidArgument("range on '" + f.dimension + "': lo must not exceed hi");
    const double eps = 1e-6 * std::max(1.0, d.max - d.min);
    if (f.lo < d.min - eps || f.hi > d.max + eps)
        throw InvalidArgument("range on '" + f.dimension + "' lies outside the dimension domain [" +
                              std::to_string(d.min) + ", " + std::to_string(d.max) + "]");
}

std::vector<ColumnView> column_views(const Bundle& bundle) {
    std::vector<ColumnView> out;
    out.reserve(bundle.columns.size());
    for (const auto& c : bundle.columns)
        out.push_back({c.descriptor.name, c.values, {c.descriptor.min, c.descriptor.max}, c.descriptor.bin_count});
    return out;
}

Bitmask range_bits(std::span<const float> values, double lo, double hi, bool closed_right) {
    Bitmask out(values.size());
    auto words = out.words();
    const std::size_t n = values.size();
    for (std::size_t w = 0; w < words.size(); ++w) {
        const std::size_t begin = w * 64;
        const std::size_t end = std::min(n, begin + 64);
        std::uint64_t word = 0;
        if (closed_right) {
            for (std::size_t i = begin; i < end; ++i) {
                const double v = values[i];
                word |= static_cast<std::uint64_t>(v >= lo && v <= hi) << (i - begin);
            }
        } else {
            for (std::size_t i = begin; i < end; ++i) {
                const double v = values[i];
                word |= static_cast<std::uint64_t>(v >= lo && v < hi) << (i - begin);
            }
        }
        words[w] = word;
    }
    return out;
}

namespace {

const ColumnView& find_column(std::span<const ColumnView> columns, std::string_view name) {
    for (const auto& c : columns)
        if (c.name == name) return c;
    throw InvalidArgument("unknown dimension '" + std::string(name) + "'");
}

std::size_t checked_size(std::span<const ColumnView> columns, std::size_t n) {
    for (const auto& c : columns)
        if (c.values.size() != n)
            throw InvalidArgument("dimension '" + std::string(c.name) + "' has " + std::to_string(c.values.size()) +
                                  " values, expected " + std::to_string(n));
    return n;
}

}  // namespace

SelectionMask apply_range_filters(std::span<const ColumnView> columns, std::span<const RangeFilter> ranges,
                                  std::size_t object_count) {
    SelectionMask mask(checked_size(columns, object_count), true);
    for (const auto& r : ranges) {
        const auto& col = find_column(columns, r.dimension);
        check_range(r, col.domain);
        if (!is_active(r, col.domain)) continue;
        mask &= range_bits(col.values, r.lo, r.hi, r.closed_right);
    }
    return mask;
}

double bin_edge(int edge, int bin_count, const Domain& d) {
    if (edge >= bin_count) return d.max;
    const double width = (d.max - d.min) / bin_count;
    return d.min + edge * width;
}

std::optional<int> bin_index(double v, int bin_count, const Domain& d) {
    if (std::isnan(v) || v < d.min || v > d.max) return std::nullopt;
    if (d.degenerate()) return 0;
    const double width = (d.max - d.min) / bin_count;
    int b = static_cast<int>(std::floor((v - d.min) / width));
    b = std::clamp(b, 0, bin_count - 1);
    // Settle rounding disagreements against the edge values themselves.
    while (b > 0 && v < bin_edge(b, bin_count, d)) --b;
    while (b < bin_count - 1 && v >= bin_edge(b + 1, bin_count, d)) ++b;
    return b;
}

BinInterval bin_interval(const Domain& d, int bin_count, int bin) {
    if (bin_count < 1) throw InvalidArgument("bin_count must be positive");
    if (bin < 0 || bin >= bin_count)
        throw InvalidArgument("bin " + std::to_string(bin) + " out of range [0, " + std::to_string(bin_count) + ")");
    if (d.degenerate()) {
        if (bin == 0) return {d.min, d.max, true};
        return {d.max, d.max, false};
    }
    return {bin_edge(bin, bin_count, d), bin_edge(bin + 1, bin_count, d), bin == bin_count - 1};
}

HistogramCounts histogram(std::span<const float> values, int bin_count, const Domain& d) {
    if (bin_count < 1) throw InvalidArgument("bin_count must be positive");
    if (d.min > d.max) throw InvalidArgument("histogram domain min exceeds max");
    HistogramCounts out;
    out.counts.assign(bin_count, 0);
    for (float v : values) {
        if (std::isnan(v)) {
            ++out.missing;
            continue;
        }
        if (const auto b = bin_index(v, bin_count, d))
            ++out.counts[*b];
        else
            ++out.out_of_domain;
    }
    return out;
}

HistogramSet filtered_histograms(std::span<const ColumnView> columns, const SelectionMask& mask) {
    const std::size_t n = checked_size(columns, mask.size());
    HistogramSet out;
    for (const auto& c : columns) {
        DimensionHistogram h;
        h.dimension = std::string(c.name);
        h.total.assign(c.bin_count, 0);
        h.passing.assign(c.bin_count, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const float v = c.values[i];
            const bool pass = mask.test(i);
            if (std::isnan(v)) {
                ++h.missing;
                h.missing_passing += pass;
                continue;
            }
            if (const auto b = bin_index(v, c.bin_count, c.domain)) {
                ++h.total[*b];
                h.passing[*b] += pass;
            }
        }
        out.push_back(std::move(h));
    }
    return out;
}

FilterEngine::FilterEngine(std::vector<ColumnView> columns, std::size_t object_count)
    : columns_(std::move(columns)), size_(checked_size(columns_, object_count)), slots_(columns_.size()), mask_(size_, true) {
    bins_.reserve(columns_.size());
    totals_.reserve(columns_.size());
    for (const auto& c : columns_) {
        if (c.bin_count < 1) throw InvalidArgument("bin_count must be positive");
        std::vector<std::int32_t> bins(size_);
        std::vector<std::uint64_t> total(c.bin_count, 0);
        for (std::size_t i = 0; i < size_; ++i) {
            const auto b = bin_index(c.values[i], c.bin_count, c.domain);
            bins[i] = b ? *b : -1;
            if (b) ++total[*b];
        }
        std::size_t missing = 0;
        for (float v : c.values) missing += std::isnan(v);
        bins_.push_back(std::move(bins));
        totals_.push_back(std::move(total));
        missing_.push_back(missing);
    }
}

std::size_t FilterEngine::dimension_index(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return i;
    throw InvalidArgument("unknown dimension '" + std::string(name) + "'");
}

void FilterEngine::assign(std::size_t dim, const std::optional<RangeFilter>& filter) {
    auto& slot = slots_[dim];
    if (slot.filter == filter) return;
    slot.filter = filter;
    slot.active = filter && is_active(*filter, columns_[dim].domain);
    if (slot.active) {
        slot.bits = range_bits(columns_[dim].values, filter->lo, filter->hi, filter->closed_right);
        ++recomputations_;
    } else {
        slot.bits = Bitmask();
    }
}

void FilterEngine::recombine() {
    mask_.fill(true);
    for (const auto& slot : slots_)
        if (slot.active) mask_ &= slot.bits;
}

const SelectionMask& FilterEngine::set_ranges(std::span<const RangeFilter> ranges) {
    std::vector<std::optional<RangeFilter>> next(columns_.size());
    for (const auto& r : ranges) {
        const auto dim = dimension_index(r.dimension);
        check_range(r, columns_[dim].domain);
        next[dim] = r;
    }
    for (std::size_t d = 0; d < columns_.size(); ++d) assign(d, next[d]);
    recombine();
    return mask_;
}

const SelectionMask& FilterEngine::set_range(const RangeFilter& range) {
    const auto dim = dimension_index(range.dimension);
    check_range(range, columns_[dim].domain);
    assign(dim, range);
    recombine();
    return mask_;
}

const SelectionMask& FilterEngine::clear_range(std::string_view dimension) {
    assign(dimension_index(dimension), std::nullopt);
    recombine();
    return mask_;
}

std::vector<RangeFilter> FilterEngine::ranges() const {
    std::vector<RangeFilter> out;
    for (const auto& slot : slots_)
        if (slot.filter) out.push_back(*slot.filter);
    return out;
}

HistogramSet FilterEngine::histograms(const SelectionMask& mask) const {
    if (mask.size() != size_) throw InvalidArgument("mask length differs from column length");
    HistogramSet out;
    out.reserve(columns_.size());
    for (std::size_t d = 0; d < columns_.size(); ++d) {
        DimensionHistogram h;
        h.dimension = std::string(columns_[d].name);
        h.total = totals_[d];
        h.passing.assign(columns_[d].bin_count, 0);
        const auto& bins = bins_[d];
        const auto& values = columns_[d].values;
        const auto words = mask.words();
        for (std::size_t w = 0; w < words.size(); ++w) {
            std::uint64_t word = words[w];
            while (word != 0) {
                const std::size_t i = w * 64 + static_cast<std::size_t>(std::countr_zero(word));
                word &= word - 1;
                if (bins[i] >= 0)
                    ++h.passing[bins[i]];
                else if (std::isnan(values[i]))
                    ++h.missing_passing;
            }
        }
        h.missing = missing_[d];
        out.push_back(std::move(h));
    }
    return out;
}

}  // namespace csn::filters
