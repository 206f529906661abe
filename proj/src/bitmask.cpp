#include "csn/bitmask.hpp"

#include <bit>

#include "csn/error.hpp"

namespace csn {

Bitmask::Bitmask(std::size_t size, bool value) : size_(size), words_((size + 63) / 64, 0) {
    fill(value);
}

void Bitmask::fill(bool value) {
    for (auto& w : words_) w = value ? ~std::uint64_t{0} : 0;
    clear_tail();
}

void Bitmask::clear_tail() {
    if (size_ % 64 != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << (size_ % 64)) - 1;
}

std::size_t Bitmask::count() const {
    std::size_t total = 0;
    for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
    return total;
}

Bitmask& Bitmask::operator&=(const Bitmask& other) {
    if (other.size_ != size_) throw InvalidArgument("mask size mismatch");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= other.words_[i];
    return *this;
}

Bitmask& Bitmask::operator|=(const Bitmask& other) {
    if (other.size_ != size_) throw InvalidArgument("mask size mismatch");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
    return *this;
}

Bitmask Bitmask::operator~() const {
    Bitmask out = *this;
    for (auto& w : out.words_) w = ~w;
    out.clear_tail();
    return out;
}

std::vector<std::size_t> Bitmask::indices() const {
    std::vector<std::size_t> out;
    out.reserve(count());
    for (std::size_t wi = 0; wi < words_.size(); ++wi) {
        std::uint64_t w = words_[wi];
        while (w != 0) {
            out.push_back(wi * 64 + static_cast<std::size_t>(std::countr_zero(w)));
            w &= w - 1;
        }
    }
    return out;
}

std::vector<bool> Bitmask::to_bools() const {
    std::vector<bool> out(size_);
    for (std::size_t i = 0; i < size_; ++i) out[i] = test(i);
    return out;
}

Bitmask Bitmask::from_bools(const std::vector<bool>& bools) {
    Bitmask out(bools.size());
    for (std::size_t i = 0; i < bools.size(); ++i)
        if (bools[i]) out.set(i);
    return out;
}

std::vector<std::uint64_t> run_length_encode(const Bitmask& mask) {
    std::vector<std::uint64_t> runs;
    bool current = false;
    std::uint64_t length = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const bool bit = mask.test(i);
        if (bit != current) {
            runs.push_back(length);
            current = bit;
            length = 0;
        }
        ++length;
    }
    if (length > 0 || runs.empty()) runs.push_back(length);
    return runs;
}

Bitmask run_length_decode(std::span<const std::uint64_t> runs, std::size_t size) {
    Bitmask out(size);
    std::size_t pos = 0;
    bool value = false;
    for (auto run : runs) {
        if (run > size - pos) throw InvalidArgument("run lengths exceed mask size");
        if (value)
            for (std::size_t i = 0; i < run; ++i) out.set(pos + i);
        pos += run;
        value = !value;
    }
    if (pos != size) throw InvalidArgument("run lengths do not cover mask size");
    return out;
}

}  // namespace csn
