#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyperpatch/database.hpp"
#include "hyperpatch/raster.hpp"
#include "hyperpatch/search.hpp"

namespace hyperpatch {

class ClassPalette;

enum class ImageSource { Input, Output };

/// Sum and weight buffers for averaging overlapping patch copies.
class CompositionAccumulator {
public:
    CompositionAccumulator(std::uint32_t width, std::uint32_t height);

    void add(std::uint32_t x, std::uint32_t y, Rgb value);

    /// Weighted average, round-half-up; uncovered pixels are black.
    Raster finalize() const;
    std::vector<bool> covered() const;
    std::uint64_t uncovered_count() const;

private:
    std::uint32_t width_;
    std::uint32_t height_;
    std::vector<std::uint64_t> sum_;
    std::vector<std::uint32_t> weight_;
};

struct Reconstruction {
    Raster image;
    std::vector<bool> covered;
    std::uint64_t uncovered_pixels = 0;
};

/// Copy-paste composition: every field cell pastes the matched pair's
/// patch_size x patch_size rect into the query cell's rect; overlaps average.
/// Output has the database's image size. Throws Config on a field/layer
/// mismatch or a database without images.
Reconstruction reconstruct(const NNField& field, const TrainingDatabase& db, const LayerSpec& layer,
                           ImageSource source, unsigned threads = 1);

/// Pixels a stride-1 field of `rows` x `cols` anchors covers at `layer` in a
/// width x height image.
std::vector<bool> coverage_mask(const LayerSpec& layer, std::uint32_t rows, std::uint32_t cols,
                                std::uint32_t width, std::uint32_t height);

/// Fixed 16-colour table used for correspondence maps, cycled past 16 sources.
std::span<const Rgb> correspondence_palette() noexcept;

struct LegendEntry {
    std::string key;  ///< "#rrggbb", or "#rrggbb:<cycle>" past the first cycle
    Rgb color{};
    std::uint32_t image_id = 0;
};

struct CorrespondenceMap {
    Raster query_tint;
    /// One raster per contributing training image, ascending id.
    std::vector<std::pair<std::uint32_t, Raster>> sources;
    std::vector<LegendEntry> legend;

    std::string legend_json() const;
};

/// Colour-codes which training image each query pixel was matched to and,
/// per source image, the regions it supplied. Colours are assigned by
/// ascending image id. Tints blend 50/50 with the underlying pixel.
CorrespondenceMap correspondence_map(const NNField& field, const TrainingDatabase& db,
                                     const LayerSpec& layer, const Raster& query_image);

Rgb blend_half(Rgb base, Rgb tint) noexcept;

/// One side of a semantic correspondence: activations at the chosen layer,
/// the image and its (RGB) label raster.
struct SemanticMember {
    const ActivationTensor& tensor;
    const Raster& image;
    const Raster& labels;
};

struct SemanticResult {
    NNField field;
    Raster query;
    Raster match;
    Raster side_by_side;
};

/// Searches `b` for every hyperpatch of `a` (b is the whole database), then
/// tints each query patch whose class is in `classes` and its match in b with
/// that class's palette colour.
SemanticResult semantic_correspondence(const SemanticMember& a, const SemanticMember& b,
                                       const LayerSpec& layer, const ClassPalette& palette,
                                       std::span<const std::uint32_t> classes,
                                       SearchConfig config);

}  // namespace hyperpatch
