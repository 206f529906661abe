#include "csn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "csn/filters.hpp"
#include "csn/rng.hpp"

namespace csn::bench {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

filters::RangeFilter random_range(Rng& rng, const filters::ColumnView& c) {
    double a = c.domain.min + rng.uniform01() * (c.domain.max - c.domain.min);
    double b = c.domain.min + rng.uniform01() * (c.domain.max - c.domain.min);
    if (a > b) std::swap(a, b);
    // Keep ranges wide enough that most objects survive, as with real sliders.
    a = c.domain.min + 0.2 * (a - c.domain.min);
    b = c.domain.max - 0.2 * (c.domain.max - b);
    return {std::string(c.name), a, b, true};
}

}  // namespace

FilterBenchResult run_filter_bench(const FilterBenchConfig& config) {
    FilterBenchResult result;
    result.config = config;
    Rng rng(config.seed);

    std::vector<std::string> names;
    std::vector<std::vector<float>> data(config.dimensions, std::vector<float>(config.objects));
    std::vector<filters::ColumnView> columns;
    for (std::size_t d = 0; d < config.dimensions; ++d) {
        names.push_back("dim" + std::to_string(d));
        for (auto& v : data[d])
            v = rng.uniform01() < config.missing_fraction ? std::numeric_limits<float>::quiet_NaN()
                                                          : static_cast<float>(rng.uniform01() * 100.0);
    }
    for (std::size_t d = 0; d < config.dimensions; ++d) {
        float lo = std::numeric_limits<float>::infinity(), hi = -lo;
        for (float v : data[d])
            if (!std::isnan(v)) lo = std::min(lo, v), hi = std::max(hi, v);
        columns.push_back({names[d], data[d], {lo, hi}, 30});
    }

    std::vector<filters::RangeFilter> state;
    for (const auto& c : columns) state.push_back(random_range(rng, c));

    std::vector<double> cold;
    for (std::size_t r = 0; r < config.repetitions; ++r) {
        state[r % state.size()] = random_range(rng, columns[r % columns.size()]);
        const auto start = Clock::now();
        const auto mask = filters::apply_range_filters(columns, state, config.objects);
        cold.push_back(elapsed_ms(start));
        result.last_pass_count = mask.count();
    }

    filters::FilterEngine engine(columns, config.objects);
    engine.set_ranges(state);
    std::vector<double> refilter, hist;
    for (std::size_t r = 0; r < config.repetitions; ++r) {
        const auto d = r % columns.size();
        state[d] = random_range(rng, columns[d]);
        auto start = Clock::now();
        const auto& mask = engine.set_range(state[d]);
        refilter.push_back(elapsed_ms(start));
        start = Clock::now();
        const auto h = engine.histograms(mask);
        hist.push_back(elapsed_ms(start));
        result.last_pass_count = mask.count();
    }
    result.consistent = engine.mask() == filters::apply_range_filters(columns, state, config.objects);

    if (!cold.empty()) {
        result.cold_ms_median = median(cold);
        result.cold_ms_max = *std::max_element(cold.begin(), cold.end());
        result.refilter_ms_median = median(refilter);
        result.refilter_ms_max = *std::max_element(refilter.begin(), refilter.end());
        result.histogram_ms_median = median(hist);
    }
    return result;
}

std::string to_json(const FilterBenchResult& r) {
    nlohmann::ordered_json j = {
        {"objects", r.config.objects},
        {"dimensions", r.config.dimensions},
        {"repetitions", r.config.repetitions},
        {"cold_ms_median", r.cold_ms_median},
        {"cold_ms_max", r.cold_ms_max},
        {"refilter_ms_median", r.refilter_ms_median},
        {"refilter_ms_max", r.refilter_ms_max},
        {"histogram_ms_median", r.histogram_ms_median},
        {"pass_count", r.last_pass_count},
        {"consistent", r.consistent},
    };
    return j.dump();
}

}  // namespace csn::bench
