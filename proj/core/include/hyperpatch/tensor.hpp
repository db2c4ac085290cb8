#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hyperpatch {

/// Cell coordinates inside an activation tensor (row, column).
struct Position {
    std::uint32_t y = 0;
    std::uint32_t x = 0;

    friend bool operator==(const Position&, const Position&) = default;
};

/// One layer's H x W x D activation volume for a single image.
///
/// Values are stored row-major: all D channels of cell (0,0), then (0,1), ...
/// Construction rejects empty extents, a size mismatch and non-finite values,
/// so every live instance satisfies the invariants.
class ActivationTensor {
public:
    ActivationTensor() = default;
    ActivationTensor(std::string layer_name, std::uint32_t height, std::uint32_t width,
                     std::uint32_t depth, std::vector<float> values);

    const std::string& layer_name() const noexcept { return layer_name_; }
    std::uint32_t height() const noexcept { return height_; }
    std::uint32_t width() const noexcept { return width_; }
    std::uint32_t depth() const noexcept { return depth_; }
    std::span<const float> values() const noexcept { return values_; }

    float at(std::uint32_t y, std::uint32_t x, std::uint32_t c) const {
        return values_[(static_cast<std::size_t>(y) * width_ + x) * depth_ + c];
    }

    /// Contiguous run of `cells * depth` values starting at cell (y, x).
    std::span<const float> run(std::uint32_t y, std::uint32_t x, std::uint32_t cells) const {
        return std::span<const float>(values_).subspan(
            (static_cast<std::size_t>(y) * width_ + x) * depth_,
            static_cast<std::size_t>(cells) * depth_);
    }

    friend bool operator==(const ActivationTensor&, const ActivationTensor&) = default;

private:
    std::string layer_name_;
    std::uint32_t height_ = 0;
    std::uint32_t width_ = 0;
    std::uint32_t depth_ = 0;
    std::vector<float> values_;
};

enum class LayerRole { Encoder, Decoder, Descriptor };

/// Per-layer geometry: hyperpatch extent in cells, channel depth, the square
/// image patch a hyperpatch stands for, and image pixels per tensor cell.
struct LayerSpec {
    std::string name;
    std::uint32_t hyperpatch_h = 1;
    std::uint32_t hyperpatch_w = 1;
    std::uint32_t depth = 1;
    std::uint32_t patch_size = 1;
    std::uint32_t scale = 1;
    LayerRole role = LayerRole::Encoder;

    /// Throws Config if any extent is zero.
    void validate() const;

    /// Number of stride-1 hyperpatch anchors along each axis for a tensor of
    /// the given extent (0 when the hyperpatch does not fit).
    std::uint32_t anchor_rows(std::uint32_t tensor_height) const noexcept {
        return tensor_height >= hyperpatch_h ? tensor_height - hyperpatch_h + 1 : 0;
    }
    std::uint32_t anchor_cols(std::uint32_t tensor_width) const noexcept {
        return tensor_width >= hyperpatch_w ? tensor_width - hyperpatch_w + 1 : 0;
    }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Throws ShapeMismatch when the tensor's depth differs from the layer or the
/// hyperpatch does not fit.
void check_tensor_matches(const ActivationTensor& tensor, const LayerSpec& spec);

/// Non-owning window over a hyperpatch; rows of `width * depth` floats.
class HyperPatchView {
public:
    HyperPatchView(const ActivationTensor& tensor, Position top_left, std::uint32_t height,
                   std::uint32_t width) noexcept
        : tensor_(&tensor), top_left_(top_left), height_(height), width_(width) {}

    Position top_left() const noexcept { return top_left_; }
    std::uint32_t height() const noexcept { return height_; }
    std::uint32_t width() const noexcept { return width_; }
    std::uint32_t depth() const noexcept { return tensor_->depth(); }
    std::size_t size() const noexcept {
        return static_cast<std::size_t>(height_) * width_ * tensor_->depth();
    }

    std::span<const float> row(std::uint32_t r) const {
        return tensor_->run(top_left_.y + r, top_left_.x, width_);
    }

    std::vector<float> flatten() const;

private:
    const ActivationTensor* tensor_;
    Position top_left_;
    std::uint32_t height_;
    std::uint32_t width_;
};

HyperPatchView extract_hyperpatch(const ActivationTensor& tensor, Position pos,
                                  const LayerSpec& spec);

inline constexpr double kZeroNormEpsilon = 1e-12;

/// 1 - cos(a, b) over the flattened views, in [0, 2]. Returns 1 when either
/// norm is below kZeroNormEpsilon. Throws Shape on extent or depth mismatch.
float cosine_distance(const HyperPatchView& a, const HyperPatchView& b);
float cosine_distance(std::span<const float> a, std::span<const float> b);

namespace detail {

// Shared by every distance path (views, the search's cached norms and
// descriptors) so all of them produce bit-identical results.
inline void accumulate_dot(std::span<const float> a, std::span<const float> b, double& dot) {
    for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * b[i];
}

float distance_from_parts(double dot, double norm_sq_a, double norm_sq_b) noexcept;

}  // namespace detail

/// Squared L2 norm of a view, accumulated in the same order as cosine_distance.
double squared_norm(const HyperPatchView& view);

struct ImageRect {
    std::int64_t top = 0;
    std::int64_t left = 0;
    std::uint32_t size = 0;

    friend bool operator==(const ImageRect&, const ImageRect&) = default;
};

/// Image-pixel rectangle a tensor position stands for. No clipping.
ImageRect layer_geometry(const LayerSpec& spec, Position pos) noexcept;

}  // namespace hyperpatch
