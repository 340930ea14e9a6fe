#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>

#include "pianoscribe/numerics/tensor.hpp"

namespace pianoscribe::decode {

/// Binary frame over at most 128 pitches. Ordering compares bit patterns
/// lexicographically from pitch 0 upward, with 0 before 1; that order breaks
/// every score tie in the decoders.
class PitchSet {
public:
    static constexpr std::size_t kCapacity = 128;

    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
    void set(std::size_t i, bool on = true)
    {
        const std::uint64_t bit = std::uint64_t{1} << (i & 63);
        words_[i >> 6] = on ? words_[i >> 6] | bit : words_[i >> 6] & ~bit;
    }
    void flip(std::size_t i) { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }
    std::size_t count() const
    {
        return static_cast<std::size_t>(std::popcount(words_[0]) + std::popcount(words_[1]));
    }
    std::size_t hash() const { return std::hash<std::uint64_t>{}(words_[0] * 0x9E3779B97F4A7C15ull ^ words_[1]); }

    bool operator==(const PitchSet&) const = default;
    friend bool operator<(const PitchSet& a, const PitchSet& b)
    {
        for (int w = 0; w < 2; ++w) {
            const std::uint64_t diff = a.words_[w] ^ b.words_[w];
            if (diff != 0) {
                return ((a.words_[w] >> std::countr_zero(diff)) & 1u) == 0;
            }
        }
        return false;
    }

    nn::Vector to_vector(std::size_t pitches) const
    {
        nn::Vector v = nn::Vector::Zero(static_cast<nn::Index>(pitches));
        for (std::size_t i = 0; i < pitches; ++i) {
            if (test(i)) v(static_cast<nn::Index>(i)) = 1.0;
        }
        return v;
    }

private:
    std::array<std::uint64_t, 2> words_{};
};

} // namespace pianoscribe::decode
