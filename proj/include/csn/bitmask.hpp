#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace csn {

/// Packed boolean vector over all objects of a bundle.
///
/// Bits past size() in the last word are always zero, so word-wise
/// operations and popcounts never see garbage.
class Bitmask {
public:
    Bitmask() = default;
    explicit Bitmask(std::size_t size, bool value = false);

    std::size_t size() const { return size_; }
    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
    void set(std::size_t i, bool value = true) {
        const std::uint64_t bit = std::uint64_t{1} << (i & 63);
        if (value)
            words_[i >> 6] |= bit;
        else
            words_[i >> 6] &= ~bit;
    }

    void fill(bool value);
    std::size_t count() const;

    Bitmask& operator&=(const Bitmask& other);
    Bitmask& operator|=(const Bitmask& other);
    Bitmask operator~() const;

    friend Bitmask operator&(Bitmask a, const Bitmask& b) { return a &= b; }
    friend Bitmask operator|(Bitmask a, const Bitmask& b) { return a |= b; }
    bool operator==(const Bitmask& other) const = default;

    std::span<const std::uint64_t> words() const { return words_; }
    std::span<std::uint64_t> words() { return words_; }

    /// Ascending indices of the set bits.
    std::vector<std::size_t> indices() const;
    std::vector<bool> to_bools() const;
    static Bitmask from_bools(const std::vector<bool>& bools);

private:
    void clear_tail();

    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

/// Selection result: which objects pass the combined filters.
using SelectionMask = Bitmask;

/// Alternating run lengths, beginning with a (possibly empty) run of false.
std::vector<std::uint64_t> run_length_encode(const Bitmask& mask);
Bitmask run_length_decode(std::span<const std::uint64_t> runs, std::size_t size);

}  // namespace csn
