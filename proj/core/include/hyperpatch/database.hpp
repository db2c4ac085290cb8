#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hyperpatch/raster.hpp"
#include "hyperpatch/tensor.hpp"

namespace hyperpatch {

/// Pixel-aligned (input, output) exemplar with its per-layer activations.
struct TrainingPair {
    std::uint32_t image_id = 0;
    Raster input_image;
    Raster output_image;
    std::map<std::string, ActivationTensor> tensors;
    std::vector<float> global_descriptor;
    std::vector<std::string> tags;

    friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

/// Immutable, validated training set.
///
/// The constructor enforces: ids dense 0..N-1 in order, matching input/output
/// dimensions, one shared image size, every declared layer present in every
/// pair with a tensor that fits its LayerSpec, and one tensor extent per layer.
/// When a descriptor layer is named, each pair's global descriptor is filled
/// from that layer's tensor (if not already provided).
class TrainingDatabase {
public:
    TrainingDatabase() = default;
    TrainingDatabase(std::vector<LayerSpec> layers, std::string descriptor_layer,
                     std::vector<TrainingPair> pairs);

    std::span<const TrainingPair> pairs() const noexcept { return pairs_; }
    const TrainingPair& pair(std::uint32_t id) const;
    std::size_t size() const noexcept { return pairs_.size(); }

    std::span<const LayerSpec> layers() const noexcept { return layers_; }
    const LayerSpec& layer(std::string_view name) const;
    bool has_layer(std::string_view name) const noexcept;

    const std::string& descriptor_layer() const noexcept { return descriptor_layer_; }

    std::uint32_t image_width() const noexcept { return image_width_; }
    std::uint32_t image_height() const noexcept { return image_height_; }

    /// Tensor of pair `id` at `layer`; throws Config if absent.
    const ActivationTensor& tensor(std::uint32_t id, std::string_view layer) const;

    friend bool operator==(const TrainingDatabase&, const TrainingDatabase&) = default;

private:
    std::vector<LayerSpec> layers_;
    std::string descriptor_layer_;
    std::vector<TrainingPair> pairs_;
    std::uint32_t image_width_ = 0;
    std::uint32_t image_height_ = 0;
};

/// Flattened tensor values. Throws Config when the tensor is not from
/// `descriptor_layer`.
std::vector<float> global_descriptor(const ActivationTensor& tensor,
                                     std::string_view descriptor_layer);

/// Ids of the min(k, N) pairs closest to the query by cosine distance,
/// ascending, ties by ascending id.
std::vector<std::uint32_t> top_k_neighbors(const TrainingDatabase& db,
                                           std::span<const float> query_descriptor,
                                           std::size_t k);

}  // namespace hyperpatch
