#include "hyperpatch/database.hpp"

#include <algorithm>
#include <numeric>

#include "hyperpatch/error.hpp"

namespace hyperpatch {

namespace {

std::string pair_text(std::uint32_t id) { return "pair " + std::to_string(id); }

}  // namespace

TrainingDatabase::TrainingDatabase(std::vector<LayerSpec> layers, std::string descriptor_layer,
                                   std::vector<TrainingPair> pairs)
    : layers_(std::move(layers)),
      descriptor_layer_(std::move(descriptor_layer)),
      pairs_(std::move(pairs)) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i].validate();
        for (std::size_t j = 0; j < i; ++j) {
            if (layers_[j].name == layers_[i].name) {
                throw Error(ErrorKind::Config, "layer '" + layers_[i].name + "' declared twice");
            }
        }
    }
    if (!descriptor_layer_.empty() && !has_layer(descriptor_layer_)) {
        throw Error(ErrorKind::Config,
                    "descriptor layer '" + descriptor_layer_ + "' is not a declared layer");
    }

    for (std::size_t i = 0; i < pairs_.size(); ++i) {
        auto& pair = pairs_[i];
        if (pair.image_id != i) {
            throw Error(ErrorKind::Config, "image ids must be dense from 0; found " +
                                               pair_text(pair.image_id) + " at index " +
                                               std::to_string(i));
        }
        if (pair.input_image.width != pair.output_image.width ||
            pair.input_image.height != pair.output_image.height) {
            throw Error(ErrorKind::ShapeMismatch,
                        pair_text(pair.image_id) + ": input and output images differ in size");
        }
        if (i == 0) {
            image_width_ = pair.input_image.width;
            image_height_ = pair.input_image.height;
        } else if (pair.input_image.width != image_width_ ||
                   pair.input_image.height != image_height_) {
            throw Error(ErrorKind::ShapeMismatch,
                        pair_text(pair.image_id) + ": image size differs from pair 0");
        }

        for (const auto& spec : layers_) {
            const auto it = pair.tensors.find(spec.name);
            if (it == pair.tensors.end()) {
                throw Error(ErrorKind::Config,
                            pair_text(pair.image_id) + " lacks layer '" + spec.name + "'");
            }
            try {
                check_tensor_matches(it->second, spec);
            } catch (const Error& e) {
                throw Error(e.kind(), pair_text(pair.image_id) + ", layer '" + spec.name +
                                          "': " + e.what());
            }
            const auto& first = pairs_.front().tensors.at(spec.name);
            if (it->second.height() != first.height() || it->second.width() != first.width()) {
                throw Error(ErrorKind::ShapeMismatch,
                            pair_text(pair.image_id) + ", layer '" + spec.name +
                                "': tensor extent differs from pair 0");
            }
        }

        if (!descriptor_layer_.empty() && pair.global_descriptor.empty()) {
            pair.global_descriptor =
                global_descriptor(pair.tensors.at(descriptor_layer_), descriptor_layer_);
        }
    }
}

const TrainingPair& TrainingDatabase::pair(std::uint32_t id) const {
    if (id >= pairs_.size()) {
        throw Error(ErrorKind::Bounds, "no " + pair_text(id) + " in a database of " +
                                           std::to_string(pairs_.size()));
    }
    return pairs_[id];
}

const LayerSpec& TrainingDatabase::layer(std::string_view name) const {
    for (const auto& spec : layers_) {
        if (spec.name == name) return spec;
    }
    throw Error(ErrorKind::Config, "unknown layer '" + std::string(name) + "'");
}

bool TrainingDatabase::has_layer(std::string_view name) const noexcept {
    return std::any_of(layers_.begin(), layers_.end(),
                       [&](const LayerSpec& s) { return s.name == name; });
}

const ActivationTensor& TrainingDatabase::tensor(std::uint32_t id, std::string_view layer) const {
    const auto& tensors = pair(id).tensors;
    const auto it = tensors.find(std::string(layer));
    if (it == tensors.end()) {
        throw Error(ErrorKind::Config,
                    pair_text(id) + " has no tensor for layer '" + std::string(layer) + "'");
    }
    return it->second;
}

std::vector<float> global_descriptor(const ActivationTensor& tensor,
                                     std::string_view descriptor_layer) {
    if (tensor.layer_name() != descriptor_layer) {
        throw Error(ErrorKind::Config, "tensor from layer '" + tensor.layer_name() +
                                           "' is not the descriptor layer '" +
                                           std::string(descriptor_layer) + "'");
    }
    const auto values = tensor.values();
    return {values.begin(), values.end()};
}

std::vector<std::uint32_t> top_k_neighbors(const TrainingDatabase& db,
                                           std::span<const float> query_descriptor,
                                           std::size_t k) {
    if (k == 0) throw Error(ErrorKind::Config, "top_k must be ≥ 1");
    if (db.size() == 0) throw Error(ErrorKind::EmptySet, "database is empty");

    std::vector<std::pair<float, std::uint32_t>> ranked;
    ranked.reserve(db.size());
    for (const auto& pair : db.pairs()) {
        if (pair.global_descriptor.empty()) {
            throw Error(ErrorKind::Config, "database has no global descriptors");
        }
        ranked.emplace_back(cosine_distance(query_descriptor, pair.global_descriptor),
                            pair.image_id);
    }
    std::sort(ranked.begin(), ranked.end());

    const auto n = std::min(k, ranked.size());
    std::vector<std::uint32_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = ranked[i].second;
    return ids;
}

}  // namespace hyperpatch
