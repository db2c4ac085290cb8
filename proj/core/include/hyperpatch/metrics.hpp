#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperpatch/raster.hpp"

namespace hyperpatch {

/// Ordered (class name, label colour) list; colours pairwise distinct.
class ClassPalette {
public:
    struct Entry {
        std::string name;
        Rgb color{};
    };

    ClassPalette() = default;
    explicit ClassPalette(std::vector<Entry> entries);

    /// JSON list of {"name": ..., "rgb_hex": "#rrggbb"}.
    static ClassPalette from_json(const nlohmann::json& doc);
    static ClassPalette load(const std::filesystem::path& path);

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const Entry& operator[](std::size_t i) const { return entries_[i]; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }

    /// Index of the class called `name`; throws Config if unknown.
    std::uint32_t index_of(std::string_view name) const;

    /// Nearest class by Euclidean RGB distance, ties to the lower index.
    std::uint32_t nearest(Rgb color) const;

private:
    std::vector<Entry> entries_;
};

struct ClassRaster {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint32_t> labels;

    friend bool operator==(const ClassRaster&, const ClassRaster&) = default;
};

/// Throws Config on an empty palette.
ClassRaster quantize(const Raster& raster, const ClassPalette& palette);

/// Paints each class index with its palette colour.
Raster render_labels(const ClassRaster& labels, const ClassPalette& palette);

/// Rows are ground truth, columns prediction.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes);
    ConfusionMatrix(std::initializer_list<std::initializer_list<std::uint64_t>> rows);

    std::size_t classes() const noexcept { return classes_; }
    std::uint64_t& at(std::size_t gt, std::size_t pred) { return counts_[gt * classes_ + pred]; }
    std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * classes_ + pred]; }
    std::uint64_t row_sum(std::size_t gt) const;
    std::uint64_t col_sum(std::size_t pred) const;
    std::uint64_t total() const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t classes_;
    std::vector<std::uint64_t> counts_;
};

/// Throws Shape on a size mismatch. `classes` is the palette size; labels
/// outside it are a Config error.
ConfusionMatrix confusion(const ClassRaster& gt, const ClassRaster& pred, std::size_t classes);

/// Class-mean recall over classes with ground-truth pixels.
double mean_pixel_accuracy(const ConfusionMatrix& m);

/// Class-mean IoU over classes with a non-empty union.
double mean_iou(const ConfusionMatrix& m);

/// recon - baseline; negative means the reconstruction scores lower.
double compare_to_baseline(double metric_recon, double metric_cnn) noexcept;

/// Signed four-decimal rendering, e.g. "-0.0102", "+0.0217"; zero is "0.0000".
std::string format_delta(double delta);

struct MetricReport {
    double mpa = 0.0;
    double miou = 0.0;
    ConfusionMatrix matrix = ConfusionMatrix(std::size_t{1});
    std::optional<double> baseline_mpa;
    std::optional<double> baseline_miou;

    nlohmann::ordered_json to_json(const ClassPalette& palette) const;
};

/// Quantizes both rasters and scores `prediction` against `ground_truth`.
MetricReport evaluate_labels(const Raster& prediction, const Raster& ground_truth,
                             const ClassPalette& palette,
                             const Raster* baseline = nullptr);

}  // namespace hyperpatch
