#pragma once

// Filter-engine timing harness: synthetic columns, cold evaluation versus
// incremental re-filtering after one slider change.

#include <cstddef>
#include <cstdint>
#include <string>

namespace csn::bench {

struct FilterBenchConfig {
    std::size_t objects = 100000;
    std::size_t dimensions = 8;
    std::size_t repetitions = 50;
    double missing_fraction = 0.01;
    std::uint64_t seed = 1;
};

struct FilterBenchResult {
    FilterBenchConfig config;
    double cold_ms_median = 0.0;     // apply_range_filters from scratch, all filters active
    double cold_ms_max = 0.0;
    double refilter_ms_median = 0.0; // FilterEngine::set_range on one dimension
    double refilter_ms_max = 0.0;
    double histogram_ms_median = 0.0;
    std::size_t last_pass_count = 0;
    bool consistent = true;  // incremental mask equals a cold evaluation of the same state
};

FilterBenchResult run_filter_bench(const FilterBenchConfig& config);

std::string to_json(const FilterBenchResult& result);

}  // namespace csn::bench
