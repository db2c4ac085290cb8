#pragma once

#include <cstdint>
#include <vector>

namespace hyperpatch {

/// SplitMix64 (Steele, Lea & Flood 2014), as in Vigna's public-domain
/// reference. Part of the reproducibility contract: any implementation using
/// the same algorithm, stream derivation and range mapping reproduces fields.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t state = 0) noexcept : state_(state) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform integer in [0, bound) by rejection: draws below 2^64 mod bound
    /// are discarded, the survivor is reduced modulo bound. bound must be > 0.
    std::uint64_t uniform(std::uint64_t bound) noexcept {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t x = next();
            if (x >= threshold) return x % bound;
        }
    }

    std::uint64_t state() const noexcept { return state_; }

    friend bool operator==(const SplitMix64&, const SplitMix64&) = default;

private:
    std::uint64_t state_;
};

/// One independent stream per field cell, seeded with seed XOR cell_index
/// (cell_index = row * cols + col). Streams persist across search rounds, so
/// any partition of cells over threads draws identical numbers.
class CellRngBank {
public:
    CellRngBank(std::uint64_t seed, std::size_t cells) {
        streams_.reserve(cells);
        for (std::size_t i = 0; i < cells; ++i) streams_.emplace_back(seed ^ i);
    }

    SplitMix64& operator[](std::size_t cell) noexcept { return streams_[cell]; }
    std::size_t size() const noexcept { return streams_.size(); }

private:
    std::vector<SplitMix64> streams_;
};

}  // namespace hyperpatch
