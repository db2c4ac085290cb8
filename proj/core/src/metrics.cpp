#include "hyperpatch/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "hyperpatch/error.hpp"

namespace hyperpatch {

ClassPalette::ClassPalette(std::vector<Entry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (entries_[i].color == entries_[j].color) {
                throw Error(ErrorKind::Config, "palette classes '" + entries_[j].name + "' and '" +
                                                   entries_[i].name + "' share a colour");
            }
        }
    }
}

ClassPalette ClassPalette::from_json(const nlohmann::json& doc) {
    if (!doc.is_array()) throw Error(ErrorKind::Parse, "palette must be a JSON list");
    std::vector<Entry> entries;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("name") || !item.contains("rgb_hex") ||
            !item["name"].is_string() || !item["rgb_hex"].is_string()) {
            throw Error(ErrorKind::Parse, "palette entries need string 'name' and 'rgb_hex'");
        }
        entries.push_back({item["name"].get<std::string>(),
                           parse_hex_color(item["rgb_hex"].get<std::string>())});
    }
    return ClassPalette(std::move(entries));
}

ClassPalette ClassPalette::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, "cannot open palette " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, "palette " + path.string() + ": " + e.what());
    }
}

std::uint32_t ClassPalette::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name == name) return static_cast<std::uint32_t>(i);
    }
    throw Error(ErrorKind::Config, "unknown class '" + std::string(name) + "'");
}

std::uint32_t ClassPalette::nearest(Rgb color) const {
    if (entries_.empty()) throw Error(ErrorKind::Config, "palette is empty");
    std::uint32_t best = 0;
    int best_dist = -1;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        int dist = 0;
        for (int c = 0; c < 3; ++c) {
            const int d = int(color[c]) - int(entries_[i].color[c]);
            dist += d * d;
        }
        if (best_dist < 0 || dist < best_dist) {
            best_dist = dist;
            best = static_cast<std::uint32_t>(i);
        }
    }
    return best;
}

ClassRaster quantize(const Raster& raster, const ClassPalette& palette) {
    if (palette.empty()) throw Error(ErrorKind::Config, "palette is empty");
    ClassRaster out{raster.width, raster.height, {}};
    out.labels.resize(static_cast<std::size_t>(raster.width) * raster.height);
    for (std::uint32_t y = 0; y < raster.height; ++y) {
        for (std::uint32_t x = 0; x < raster.width; ++x) {
            out.labels[static_cast<std::size_t>(y) * raster.width + x] =
                palette.nearest(raster.get(x, y));
        }
    }
    return out;
}

Raster render_labels(const ClassRaster& labels, const ClassPalette& palette) {
    Raster out(labels.width, labels.height);
    for (std::uint32_t y = 0; y < labels.height; ++y) {
        for (std::uint32_t x = 0; x < labels.width; ++x) {
            out.set(x, y, palette[labels.labels[static_cast<std::size_t>(y) * labels.width + x]].color);
        }
    }
    return out;
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes)
    : classes_(classes), counts_(classes * classes, 0) {
    if (classes == 0) throw Error(ErrorKind::Config, "confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::initializer_list<std::initializer_list<std::uint64_t>> rows)
    : ConfusionMatrix(rows.size()) {
    std::size_t g = 0;
    for (const auto& row : rows) {
        if (row.size() != classes_) throw Error(ErrorKind::Shape, "confusion matrix must be square");
        std::size_t p = 0;
        for (auto v : row) at(g, p++) = v;
        ++g;
    }
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t gt) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < classes_; ++p) s += at(gt, p);
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t pred) const {
    std::uint64_t s = 0;
    for (std::size_t g = 0; g < classes_; ++g) s += at(g, pred);
    return s;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (auto v : counts_) s += v;
    return s;
}

ConfusionMatrix confusion(const ClassRaster& gt, const ClassRaster& pred, std::size_t classes) {
    if (gt.width != pred.width || gt.height != pred.height) {
        throw Error(ErrorKind::Shape, "label rasters differ in size: " + std::to_string(gt.width) +
                                          "x" + std::to_string(gt.height) + " vs " +
                                          std::to_string(pred.width) + "x" +
                                          std::to_string(pred.height));
    }
    ConfusionMatrix m(classes);
    for (std::size_t i = 0; i < gt.labels.size(); ++i) {
        if (gt.labels[i] >= classes || pred.labels[i] >= classes) {
            throw Error(ErrorKind::Config, "label index outside the palette");
        }
        ++m.at(gt.labels[i], pred.labels[i]);
    }
    return m;
}

double mean_pixel_accuracy(const ConfusionMatrix& m) {
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < m.classes(); ++c) {
        const auto row = m.row_sum(c);
        if (row == 0) continue;
        sum += static_cast<double>(m.at(c, c)) / static_cast<double>(row);
        ++counted;
    }
    if (counted == 0) throw Error(ErrorKind::UndefinedMetric, "no class has ground-truth pixels");
    return sum / static_cast<double>(counted);
}

double mean_iou(const ConfusionMatrix& m) {
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < m.classes(); ++c) {
        const auto uni = m.row_sum(c) + m.col_sum(c) - m.at(c, c);
        if (uni == 0) continue;
        sum += static_cast<double>(m.at(c, c)) / static_cast<double>(uni);
        ++counted;
    }
    if (counted == 0) throw Error(ErrorKind::UndefinedMetric, "every class has an empty union");
    return sum / static_cast<double>(counted);
}

double compare_to_baseline(double metric_recon, double metric_cnn) noexcept {
    return metric_recon - metric_cnn;
}

std::string format_delta(double delta) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.4f", delta);
    std::string text = buf;
    if (text == "+0.0000" || text == "-0.0000") return "0.0000";
    return text;
}

nlohmann::ordered_json MetricReport::to_json(const ClassPalette& palette) const {
    nlohmann::ordered_json doc;
    doc["mpa"] = mpa;
    doc["miou"] = miou;
    nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < matrix.classes(); ++c) {
        nlohmann::ordered_json entry;
        const auto row = matrix.row_sum(c);
        const auto uni = row + matrix.col_sum(c) - matrix.at(c, c);
        entry["gt_pixels"] = row;
        entry["pixel_accuracy"] =
            row == 0 ? nlohmann::ordered_json(nullptr)
                     : nlohmann::ordered_json(static_cast<double>(matrix.at(c, c)) / row);
        entry["iou"] = uni == 0 ? nlohmann::ordered_json(nullptr)
                                : nlohmann::ordered_json(static_cast<double>(matrix.at(c, c)) / uni);
        per_class[palette[c].name] = entry;
    }
    doc["per_class"] = per_class;
    doc["zero_gt_classes"] = "excluded";
    if (baseline_mpa && baseline_miou) {
        doc["baseline"] = {{"mpa", *baseline_mpa}, {"miou", *baseline_miou}};
        const double d_mpa = compare_to_baseline(mpa, *baseline_mpa);
        const double d_miou = compare_to_baseline(miou, *baseline_miou);
        doc["delta_vs_baseline"] = {
            {"mpa", d_mpa}, {"miou", d_miou},
            {"mpa_text", format_delta(d_mpa)}, {"miou_text", format_delta(d_miou)}};
    }
    return doc;
}

MetricReport evaluate_labels(const Raster& prediction, const Raster& ground_truth,
                             const ClassPalette& palette, const Raster* baseline) {
    const auto gt = quantize(ground_truth, palette);
    MetricReport report;
    report.matrix = confusion(gt, quantize(prediction, palette), palette.size());
    report.mpa = mean_pixel_accuracy(report.matrix);
    report.miou = mean_iou(report.matrix);
    if (baseline != nullptr) {
        const auto m = confusion(gt, quantize(*baseline, palette), palette.size());
        report.baseline_mpa = mean_pixel_accuracy(m);
        report.baseline_miou = mean_iou(m);
    }
    return report;
}

}  // namespace hyperpatch
