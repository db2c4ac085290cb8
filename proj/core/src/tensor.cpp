#include "hyperpatch/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hyperpatch/error.hpp"

namespace hyperpatch {

namespace {

std::string position_text(Position pos) {
    return "(" + std::to_string(pos.y) + ", " + std::to_string(pos.x) + ")";
}

}  // namespace

ActivationTensor::ActivationTensor(std::string layer_name, std::uint32_t height,
                                   std::uint32_t width, std::uint32_t depth,
                                   std::vector<float> values)
    : layer_name_(std::move(layer_name)),
      height_(height),
      width_(width),
      depth_(depth),
      values_(std::move(values)) {
    if (height_ == 0 || width_ == 0 || depth_ == 0) {
        throw Error(ErrorKind::Shape, "tensor '" + layer_name_ + "' has an empty extent");
    }
    const auto expected = static_cast<std::size_t>(height_) * width_ * depth_;
    if (values_.size() != expected) {
        throw Error(ErrorKind::Shape, "tensor '" + layer_name_ + "' holds " +
                                          std::to_string(values_.size()) + " values, expected " +
                                          std::to_string(expected));
    }
    const auto bad = std::find_if(values_.begin(), values_.end(),
                                  [](float v) { return !std::isfinite(v); });
    if (bad != values_.end()) {
        throw Error(ErrorKind::NonFinite,
                    "tensor '" + layer_name_ + "' has a non-finite value at index " +
                        std::to_string(bad - values_.begin()));
    }
}

void LayerSpec::validate() const {
    if (hyperpatch_h == 0 || hyperpatch_w == 0 || depth == 0 || patch_size == 0 || scale == 0) {
        throw Error(ErrorKind::Config, "layer '" + name + "' has a zero extent");
    }
}

void check_tensor_matches(const ActivationTensor& tensor, const LayerSpec& spec) {
    if (tensor.depth() != spec.depth || tensor.height() < spec.hyperpatch_h ||
        tensor.width() < spec.hyperpatch_w) {
        throw Error(ErrorKind::ShapeMismatch,
                    "tensor " + std::to_string(tensor.height()) + "x" +
                        std::to_string(tensor.width()) + "x" + std::to_string(tensor.depth()) +
                        " does not fit layer '" + spec.name + "' (hyperpatch " +
                        std::to_string(spec.hyperpatch_h) + "x" + std::to_string(spec.hyperpatch_w) +
                        "x" + std::to_string(spec.depth) + ")");
    }
}

std::vector<float> HyperPatchView::flatten() const {
    std::vector<float> out;
    out.reserve(size());
    for (std::uint32_t r = 0; r < height_; ++r) {
        const auto span = row(r);
        out.insert(out.end(), span.begin(), span.end());
    }
    return out;
}

HyperPatchView extract_hyperpatch(const ActivationTensor& tensor, Position pos,
                                  const LayerSpec& spec) {
    if (tensor.depth() != spec.depth) {
        throw Error(ErrorKind::Shape, "tensor depth " + std::to_string(tensor.depth()) +
                                          " does not match layer '" + spec.name + "' depth " +
                                          std::to_string(spec.depth));
    }
    if (static_cast<std::uint64_t>(pos.y) + spec.hyperpatch_h > tensor.height() ||
        static_cast<std::uint64_t>(pos.x) + spec.hyperpatch_w > tensor.width()) {
        throw Error(ErrorKind::Bounds, "hyperpatch at " + position_text(pos) +
                                           " is out of bounds for layer '" + spec.name + "'");
    }
    return HyperPatchView(tensor, pos, spec.hyperpatch_h, spec.hyperpatch_w);
}

namespace detail {

float distance_from_parts(double dot, double norm_sq_a, double norm_sq_b) noexcept {
    if (std::sqrt(norm_sq_a) < kZeroNormEpsilon || std::sqrt(norm_sq_b) < kZeroNormEpsilon) {
        return 1.0f;
    }
    const double d = 1.0 - dot / std::sqrt(norm_sq_a * norm_sq_b);
    return static_cast<float>(std::clamp(d, 0.0, 2.0));
}

}  // namespace detail

double squared_norm(const HyperPatchView& view) {
    double sum = 0.0;
    for (std::uint32_t r = 0; r < view.height(); ++r) {
        const auto span = view.row(r);
        detail::accumulate_dot(span, span, sum);
    }
    return sum;
}

float cosine_distance(const HyperPatchView& a, const HyperPatchView& b) {
    if (a.height() != b.height() || a.width() != b.width() || a.depth() != b.depth()) {
        throw Error(ErrorKind::Shape, "hyperpatch extents differ");
    }
    double dot = 0.0;
    for (std::uint32_t r = 0; r < a.height(); ++r) detail::accumulate_dot(a.row(r), b.row(r), dot);
    return detail::distance_from_parts(dot, squared_norm(a), squared_norm(b));
}

float cosine_distance(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::Shape, "vector lengths differ: " + std::to_string(a.size()) +
                                          " vs " + std::to_string(b.size()));
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    detail::accumulate_dot(a, b, dot);
    detail::accumulate_dot(a, a, na);
    detail::accumulate_dot(b, b, nb);
    return detail::distance_from_parts(dot, na, nb);
}

ImageRect layer_geometry(const LayerSpec& spec, Position pos) noexcept {
    return ImageRect{static_cast<std::int64_t>(pos.y) * spec.scale,
                     static_cast<std::int64_t>(pos.x) * spec.scale, spec.patch_size};
}

}  // namespace hyperpatch
