#include "hyperpatch/compose.hpp"

#include <algorithm>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "hyperpatch/error.hpp"
#include "hyperpatch/metrics.hpp"

namespace hyperpatch {

namespace {

constexpr std::array<Rgb, 16> kPalette{{
    {0xe6, 0x19, 0x4b}, {0x3c, 0xb4, 0x4b}, {0xff, 0xe1, 0x19}, {0x43, 0x63, 0xd8},
    {0xf5, 0x82, 0x31}, {0x91, 0x1e, 0xb4}, {0x46, 0xf0, 0xf0}, {0xf0, 0x32, 0xe6},
    {0xbc, 0xf6, 0x0c}, {0xfa, 0xbe, 0xbe}, {0x00, 0x80, 0x80}, {0xe6, 0xbe, 0xff},
    {0x9a, 0x63, 0x24}, {0xff, 0xfa, 0xc8}, {0x80, 0x00, 0x00}, {0xaa, 0xff, 0xc3},
}};

struct Span1D {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;  // exclusive
    std::int64_t offset = 0;  // source coordinate = dest coordinate + offset
};

// Clips a patch copy along one axis so that both the destination interval
// [dst, dst + size) and the source interval stay inside [0, extent).
Span1D clip_copy(std::int64_t dst, std::int64_t src, std::uint32_t size, std::uint32_t dst_extent,
                 std::uint32_t src_extent) {
    std::int64_t lo = std::max<std::int64_t>(0, std::max(dst, dst - src));
    std::int64_t hi = std::min<std::int64_t>(dst_extent, std::min(dst + size, dst - src + src_extent));
    if (hi <= lo) return {};
    return {static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(hi), src - dst};
}

Span1D clip_rect(std::int64_t start, std::uint32_t size, std::uint32_t extent) {
    const std::int64_t lo = std::max<std::int64_t>(0, start);
    const std::int64_t hi = std::min<std::int64_t>(extent, start + size);
    if (hi <= lo) return {};
    return {static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(hi), 0};
}

const Raster& source_image(const TrainingPair& pair, ImageSource source) {
    return source == ImageSource::Input ? pair.input_image : pair.output_image;
}

}  // namespace

CompositionAccumulator::CompositionAccumulator(std::uint32_t width, std::uint32_t height)
    : width_(width),
      height_(height),
      sum_(static_cast<std::size_t>(width) * height * 3, 0),
      weight_(static_cast<std::size_t>(width) * height, 0) {}

void CompositionAccumulator::add(std::uint32_t x, std::uint32_t y, Rgb value) {
    const auto i = static_cast<std::size_t>(y) * width_ + x;
    sum_[i * 3] += value[0];
    sum_[i * 3 + 1] += value[1];
    sum_[i * 3 + 2] += value[2];
    ++weight_[i];
}

Raster CompositionAccumulator::finalize() const {
    Raster out(width_, height_);
    for (std::size_t i = 0; i < weight_.size(); ++i) {
        const std::uint64_t w = weight_[i];
        if (w == 0) continue;
        for (std::size_t c = 0; c < 3; ++c) {
            // round-half-up of sum / w in exact integer arithmetic
            out.pixels[i * 3 + c] = static_cast<std::uint8_t>((2 * sum_[i * 3 + c] + w) / (2 * w));
        }
    }
    return out;
}

std::vector<bool> CompositionAccumulator::covered() const {
    std::vector<bool> mask(weight_.size());
    for (std::size_t i = 0; i < weight_.size(); ++i) mask[i] = weight_[i] > 0;
    return mask;
}

std::uint64_t CompositionAccumulator::uncovered_count() const {
    return static_cast<std::uint64_t>(std::count(weight_.begin(), weight_.end(), 0u));
}

Reconstruction reconstruct(const NNField& field, const TrainingDatabase& db, const LayerSpec& layer,
                           ImageSource source, unsigned threads) {
    validate_field(field, db, layer);
    const auto width = db.image_width();
    const auto height = db.image_height();
    if (width == 0 || height == 0) {
        throw Error(ErrorKind::Config, "database has no images to compose from");
    }

    CompositionAccumulator acc(width, height);
    // Each worker owns a band of destination rows, so writes never overlap;
    // sums are integers, so the result does not depend on the split.
    const unsigned workers = std::max(1u, std::min(threads, height));
    const std::uint32_t band = (height + workers - 1) / workers;
    auto paint_band = [&](std::uint32_t band_begin, std::uint32_t band_end) {
        for (std::uint32_t r = 0; r < field.rows; ++r) {
            for (std::uint32_t c = 0; c < field.cols; ++c) {
                const auto& cell = field.at(r, c);
                const auto dst = layer_geometry(layer, {r, c});
                const auto src = layer_geometry(layer, cell.pos);
                const auto rows = clip_copy(dst.top, src.top, layer.patch_size, height, height);
                const auto cols = clip_copy(dst.left, src.left, layer.patch_size, width, width);
                const auto& image = source_image(db.pair(cell.image_id), source);
                const auto y0 = std::max(rows.begin, band_begin);
                const auto y1 = std::min(rows.end, band_end);
                for (std::uint32_t y = y0; y < y1; ++y) {
                    for (std::uint32_t x = cols.begin; x < cols.end; ++x) {
                        acc.add(x, y,
                                image.get(static_cast<std::uint32_t>(x + cols.offset),
                                          static_cast<std::uint32_t>(y + rows.offset)));
                    }
                }
            }
        }
    };
    if (workers == 1) {
        paint_band(0, height);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            const auto begin = std::min(height, w * band);
            const auto end = std::min(height, begin + band);
            pool.emplace_back(paint_band, begin, end);
        }
    }

    Reconstruction out;
    out.image = acc.finalize();
    out.covered = acc.covered();
    out.uncovered_pixels = acc.uncovered_count();
    return out;
}

std::vector<bool> coverage_mask(const LayerSpec& layer, std::uint32_t rows, std::uint32_t cols,
                                std::uint32_t width, std::uint32_t height) {
    std::vector<bool> mask(static_cast<std::size_t>(width) * height, false);
    for (std::uint32_t r = 0; r < rows; ++r) {
        const auto rect = layer_geometry(layer, {r, 0});
        const auto ys = clip_rect(rect.top, rect.size, height);
        for (std::uint32_t c = 0; c < cols; ++c) {
            const auto xs = clip_rect(layer_geometry(layer, {r, c}).left, rect.size, width);
            for (auto y = ys.begin; y < ys.end; ++y) {
                for (auto x = xs.begin; x < xs.end; ++x) {
                    mask[static_cast<std::size_t>(y) * width + x] = true;
                }
            }
        }
    }
    return mask;
}

std::span<const Rgb> correspondence_palette() noexcept { return kPalette; }

Rgb blend_half(Rgb base, Rgb tint) noexcept {
    Rgb out{};
    for (int c = 0; c < 3; ++c) {
        // (a + b) / 2, half rounded up
        out[c] = static_cast<std::uint8_t>((base[c] + tint[c] + 1) / 2);
    }
    return out;
}

std::string CorrespondenceMap::legend_json() const {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const auto& entry : legend) doc[entry.key] = entry.image_id;
    return doc.dump(2);
}

CorrespondenceMap correspondence_map(const NNField& field, const TrainingDatabase& db,
                                     const LayerSpec& layer, const Raster& query_image) {
    if (field.rows == 0 || field.cols == 0 || query_image.empty()) {
        throw Error(ErrorKind::Config, "correspondence map needs a non-empty field and image");
    }
    validate_field(field, db, layer);

    std::map<std::uint32_t, std::size_t> color_of;
    for (const auto& cell : field.cells) color_of.emplace(cell.image_id, 0);
    CorrespondenceMap out;
    std::size_t rank = 0;
    for (auto& [id, index] : color_of) {
        index = rank;
        const auto color = kPalette[rank % kPalette.size()];
        const auto cycle = rank / kPalette.size();
        auto key = to_hex(color);
        if (cycle > 0) key += ":" + std::to_string(cycle);
        out.legend.push_back(LegendEntry{key, color, id});
        ++rank;
    }

    // A pixel belongs to the cell anchored at or just before it, if that
    // cell's rect reaches it.
    out.query_tint = query_image;
    for (std::uint32_t py = 0; py < query_image.height; ++py) {
        const auto cy = std::min(py / layer.scale, field.rows - 1);
        if (py >= static_cast<std::uint64_t>(cy) * layer.scale + layer.patch_size) continue;
        for (std::uint32_t px = 0; px < query_image.width; ++px) {
            const auto cx = std::min(px / layer.scale, field.cols - 1);
            if (px >= static_cast<std::uint64_t>(cx) * layer.scale + layer.patch_size) continue;
            const auto& cell = field.at(cy, cx);
            const auto color = kPalette[color_of.at(cell.image_id) % kPalette.size()];
            out.query_tint.set(px, py, blend_half(query_image.get(px, py), color));
        }
    }

    for (const auto& [id, index] : color_of) {
        const auto& image = db.pair(id).input_image;
        if (image.empty()) throw Error(ErrorKind::Config, "database has no images to tint");
        std::vector<bool> mask(static_cast<std::size_t>(image.width) * image.height, false);
        for (const auto& cell : field.cells) {
            if (cell.image_id != id) continue;
            const auto rect = layer_geometry(layer, cell.pos);
            const auto ys = clip_rect(rect.top, rect.size, image.height);
            const auto xs = clip_rect(rect.left, rect.size, image.width);
            for (auto y = ys.begin; y < ys.end; ++y) {
                for (auto x = xs.begin; x < xs.end; ++x) {
                    mask[static_cast<std::size_t>(y) * image.width + x] = true;
                }
            }
        }
        Raster tinted = image;
        const auto color = kPalette[index % kPalette.size()];
        for (std::uint32_t y = 0; y < image.height; ++y) {
            for (std::uint32_t x = 0; x < image.width; ++x) {
                if (mask[static_cast<std::size_t>(y) * image.width + x]) {
                    tinted.set(x, y, blend_half(image.get(x, y), color));
                }
            }
        }
        out.sources.emplace_back(id, std::move(tinted));
    }
    return out;
}

SemanticResult semantic_correspondence(const SemanticMember& a, const SemanticMember& b,
                                       const LayerSpec& layer, const ClassPalette& palette,
                                       std::span<const std::uint32_t> classes,
                                       SearchConfig config) {
    for (const auto* member : {&a, &b}) {
        if (member->image.empty() || member->image.width != member->labels.width ||
            member->image.height != member->labels.height) {
            throw Error(ErrorKind::Config, "label raster does not align with its image");
        }
    }
    for (auto cls : classes) {
        if (cls >= palette.size()) {
            throw Error(ErrorKind::Config, "class index " + std::to_string(cls) + " not in palette");
        }
    }

    TrainingPair pair;
    pair.image_id = 0;
    pair.input_image = b.image;
    pair.output_image = b.image;
    pair.tensors.emplace(layer.name, b.tensor);
    std::vector<TrainingPair> pairs;
    pairs.push_back(std::move(pair));
    const TrainingDatabase db({layer}, "", std::move(pairs));

    config.candidate_image_ids = {0};
    SemanticResult out;
    out.field = hpm_run(a.tensor, db, layer, config);

    const auto query_classes = quantize(a.labels, palette);
    constexpr std::int64_t kNone = -1;
    std::vector<std::int64_t> mark_a(static_cast<std::size_t>(a.image.width) * a.image.height, kNone);
    std::vector<std::int64_t> mark_b(static_cast<std::size_t>(b.image.width) * b.image.height, kNone);
    auto stamp = [](std::vector<std::int64_t>& mark, const Raster& image, const ImageRect& rect,
                    std::int64_t cls) {
        const auto ys = clip_rect(rect.top, rect.size, image.height);
        const auto xs = clip_rect(rect.left, rect.size, image.width);
        for (auto y = ys.begin; y < ys.end; ++y) {
            for (auto x = xs.begin; x < xs.end; ++x) {
                mark[static_cast<std::size_t>(y) * image.width + x] = cls;
            }
        }
    };

    for (std::uint32_t r = 0; r < out.field.rows; ++r) {
        for (std::uint32_t c = 0; c < out.field.cols; ++c) {
            const auto rect = layer_geometry(layer, {r, c});
            const auto cy = std::clamp<std::int64_t>(rect.top + rect.size / 2, 0, a.image.height - 1);
            const auto cx = std::clamp<std::int64_t>(rect.left + rect.size / 2, 0, a.image.width - 1);
            const auto cls = query_classes.labels[static_cast<std::size_t>(cy) * a.image.width +
                                                  static_cast<std::size_t>(cx)];
            if (std::find(classes.begin(), classes.end(), cls) == classes.end()) continue;
            stamp(mark_a, a.image, rect, cls);
            stamp(mark_b, b.image, layer_geometry(layer, out.field.at(r, c).pos), cls);
        }
    }

    auto tint = [&](const Raster& image, const std::vector<std::int64_t>& mark) {
        Raster result = image;
        for (std::uint32_t y = 0; y < image.height; ++y) {
            for (std::uint32_t x = 0; x < image.width; ++x) {
                const auto cls = mark[static_cast<std::size_t>(y) * image.width + x];
                if (cls != kNone) {
                    result.set(x, y, blend_half(image.get(x, y),
                                                palette[static_cast<std::size_t>(cls)].color));
                }
            }
        }
        return result;
    };
    out.query = tint(a.image, mark_a);
    out.match = tint(b.image, mark_b);

    out.side_by_side = Raster(out.query.width + out.match.width,
                              std::max(out.query.height, out.match.height));
    for (std::uint32_t y = 0; y < out.query.height; ++y) {
        for (std::uint32_t x = 0; x < out.query.width; ++x) out.side_by_side.set(x, y, out.query.get(x, y));
    }
    for (std::uint32_t y = 0; y < out.match.height; ++y) {
        for (std::uint32_t x = 0; x < out.match.width; ++x) {
            out.side_by_side.set(out.query.width + x, y, out.match.get(x, y));
        }
    }
    return out;
}

}  // namespace hyperpatch
