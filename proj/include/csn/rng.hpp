#pragma once

#include <cstdint>
#include <random>

namespace csn {

/// Seeded generator with a fully pinned output sequence.
///
/// The engine is MT19937-64 (std::mt19937_64, whose output the C++ standard
/// fixes bit-for-bit). The standard library distributions are
/// implementation-defined, so bounded integers, uniform reals and normals are
/// derived here with documented recipes:
///   - uniform_below(n): rejection sampling, discard draws below
///     (2^64 - n) mod n, then take the draw mod n.
///   - uniform01(): top 53 bits of one draw times 2^-53, in [0, 1).
///   - normal(): Box-Muller on two uniform01() draws, cosine branch only.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    std::uint64_t uniform_below(std::uint64_t bound);
    double uniform01();
    double normal(double mean = 0.0, double stddev = 1.0);

private:
    std::mt19937_64 engine_;
};

}  // namespace csn
