#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library's search or composition paths: values are read by
// explicit index arithmetic and arithmetic is done in long double.

#include <cmath>
#include <cstdint>
#include <vector>

#include "hyperpatch/database.hpp"
#include "hyperpatch/raster.hpp"
#include "hyperpatch/tensor.hpp"

namespace hyperpatch::testing::oracle {

struct Match {
    std::uint32_t image = 0;
    std::uint32_t y = 0;
    std::uint32_t x = 0;
    long double distance = 0;
};

inline std::vector<long double> patch(const ActivationTensor& t, std::uint32_t y, std::uint32_t x,
                                      std::uint32_t h, std::uint32_t w) {
    std::vector<long double> out;
    const auto values = t.values();
    for (std::uint32_t r = 0; r < h; ++r)
        for (std::uint32_t c = 0; c < w; ++c)
            for (std::uint32_t k = 0; k < t.depth(); ++k)
                out.push_back(values[((y + r) * t.width() + (x + c)) * t.depth() + k]);
    return out;
}

inline long double cosine(const std::vector<long double>& a, const std::vector<long double>& b) {
    long double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (std::sqrt(na) < 1e-12L || std::sqrt(nb) < 1e-12L) return 1.0L;
    return 1.0L - dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Triple-loop brute force: for each query anchor, scan images (ascending id)
/// and anchors (row-major), keeping the first strict minimum.
inline std::vector<Match> brute_force(const ActivationTensor& query,
                                      const std::vector<const ActivationTensor*>& train,
                                      const std::vector<std::uint32_t>& ids, std::uint32_t h,
                                      std::uint32_t w) {
    std::vector<Match> field;
    for (std::uint32_t qy = 0; qy + h <= query.height(); ++qy) {
        for (std::uint32_t qx = 0; qx + w <= query.width(); ++qx) {
            const auto q = patch(query, qy, qx, h, w);
            Match best;
            bool have = false;
            for (std::size_t i = 0; i < train.size(); ++i) {
                for (std::uint32_t ty = 0; ty + h <= train[i]->height(); ++ty) {
                    for (std::uint32_t tx = 0; tx + w <= train[i]->width(); ++tx) {
                        const auto d = cosine(q, patch(*train[i], ty, tx, h, w));
                        if (!have || d < best.distance) {
                            best = Match{ids[i], ty, tx, d};
                            have = true;
                        }
                    }
                }
            }
            field.push_back(best);
        }
    }
    return field;
}

/// Straightforward copy-paste composition with per-pixel averaging.
inline Raster compose(const std::vector<Match>& field, std::uint32_t cols,
                      const std::vector<const Raster*>& images_by_id, std::uint32_t patch_size,
                      std::uint32_t scale, std::uint32_t width, std::uint32_t height) {
    std::vector<long double> sum(static_cast<std::size_t>(width) * height * 3, 0);
    std::vector<long double> count(static_cast<std::size_t>(width) * height, 0);
    for (std::size_t i = 0; i < field.size(); ++i) {
        const long long qy = static_cast<long long>(i / cols) * scale;
        const long long qx = static_cast<long long>(i % cols) * scale;
        const long long sy = static_cast<long long>(field[i].y) * scale;
        const long long sx = static_cast<long long>(field[i].x) * scale;
        const Raster& src = *images_by_id[field[i].image];
        for (long long dy = 0; dy < patch_size; ++dy) {
            for (long long dx = 0; dx < patch_size; ++dx) {
                const long long y = qy + dy, x = qx + dx, yy = sy + dy, xx = sx + dx;
                if (y >= height || x >= width || yy >= height || xx >= width) continue;
                const auto p = src.get(static_cast<std::uint32_t>(xx), static_cast<std::uint32_t>(yy));
                const auto o = static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x);
                for (int c = 0; c < 3; ++c) sum[o * 3 + c] += p[c];
                count[o] += 1;
            }
        }
    }
    Raster out(width, height);
    for (std::size_t o = 0; o < count.size(); ++o) {
        if (count[o] == 0) continue;
        for (int c = 0; c < 3; ++c) {
            out.pixels[o * 3 + c] =
                static_cast<std::uint8_t>(std::floor(sum[o * 3 + c] / count[o] + 0.5L));
        }
    }
    return out;
}

inline long double mean_channel(const Raster& r, int channel) {
    long double s = 0;
    for (std::size_t i = channel; i < r.pixels.size(); i += 3) s += r.pixels[i];
    return s / (static_cast<long double>(r.pixels.size()) / 3);
}

/// SplitMix64 written out independently from the library's class.
inline std::uint64_t splitmix_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t splitmix_uniform(std::uint64_t& state, std::uint64_t n) {
    const std::uint64_t reject_below = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
        const auto x = splitmix_next(state);
        if (x >= reject_below) return x % n;
    }
}

}  // namespace hyperpatch::testing::oracle
