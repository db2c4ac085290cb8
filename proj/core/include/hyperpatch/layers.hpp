#pragma once

#include <cstdint>
#include <vector>

#include "hyperpatch/tensor.hpp"

namespace hyperpatch {

/// Encoder/decoder layer geometry for a 256x256 U-Net style translator.
///
/// Hyperpatch extents, depths and patch sizes follow the published table for
/// that network. Two quirks of the table are resolved here:
///   - "Encoder 7" appears twice; it is listed once.
///   - The table gives patch sizes but no cell-to-pixel scale. We set
///     scale = patch_size / hyperpatch_h, so a hyperpatch's footprint is its
///     patch and stride-1 anchors cover the whole image.
/// Note that the table's Encoder 1 patch (2x2) is smaller than what a 2x2 block
/// of stride-2 encoder cells would see (4x4); the table values are kept as-is.
std::vector<LayerSpec> default_layer_table();

/// Tensor extent (rows == cols) a layer of the default table has for a square
/// image of `image_size` pixels.
std::uint32_t default_tensor_extent(const LayerSpec& spec, std::uint32_t image_size);

}  // namespace hyperpatch
