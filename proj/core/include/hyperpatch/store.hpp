#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperpatch/database.hpp"
#include "hyperpatch/search.hpp"
#include "hyperpatch/tensor.hpp"

namespace hyperpatch {

// Tensor file layout, all little-endian:
//   "CHPT" | u32 version (=1) | u32 H | u32 W | u32 D | H*W*D binary32, row-major
inline constexpr char kTensorMagic[4] = {'C', 'H', 'P', 'T'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 20;

std::vector<std::uint8_t> encode_tensor(const ActivationTensor& tensor);
/// Throws BadMagic, BadVersion, Truncated (short or oversized payload) or
/// NonFinite. `layer_name` is stamped on the result; the file does not carry it.
ActivationTensor decode_tensor(std::span<const std::uint8_t> bytes, std::string layer_name);

/// Throws Io with the path on failure.
void write_tensor(const ActivationTensor& tensor, const std::filesystem::path& path);
/// As decode_tensor; MissingFile when absent, Io when unreadable.
ActivationTensor read_tensor(const std::filesystem::path& path, std::string layer_name = {});

// Field dump layout, all little-endian:
//   "CHPF" | u32 version (=1) | u32 rows | u32 cols |
//   rows*cols cells of (u32 image_id, u32 y, u32 x, f32 distance), row-major
inline constexpr char kFieldMagic[4] = {'C', 'H', 'P', 'F'};
inline constexpr std::uint32_t kFieldVersion = 1;

std::vector<std::uint8_t> encode_field(const NNField& field);
NNField decode_field(std::span<const std::uint8_t> bytes, std::string layer_name);
void write_field(const NNField& field, const std::filesystem::path& path);
NNField read_field(const std::filesystem::path& path, std::string layer_name);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// In-memory form of the dataset manifest (schemas/manifest.schema.json).
/// Relative paths are resolved against `base_dir`.
struct Manifest {
    struct Layer {
        std::string name;
        std::uint32_t hyperpatch_h = 0;
        std::uint32_t hyperpatch_w = 0;
        std::uint32_t depth = 0;
        std::uint32_t patch_size = 0;
        std::uint32_t scale = 0;
        LayerRole role = LayerRole::Encoder;
    };
    struct Pair {
        std::int64_t id = 0;
        std::string input_png;
        std::string output_png;
        std::map<std::string, std::string> tensors;
        std::vector<std::string> tags;
    };

    std::uint32_t image_width = 0;
    std::uint32_t image_height = 0;
    std::vector<Layer> layers;
    std::vector<Pair> pairs;
    std::optional<std::string> palette;
    std::filesystem::path base_dir;
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();

    std::filesystem::path resolve(const std::string& relative) const;
    std::vector<LayerSpec> layer_specs() const;
    /// Name of the layer with role "descriptor", or empty.
    std::string descriptor_layer() const;

    static Manifest parse(const nlohmann::json& doc, std::filesystem::path base_dir);
    static Manifest load(const std::filesystem::path& path);
    nlohmann::ordered_json to_json() const;
    void save(const std::filesystem::path& path) const;
};

std::string to_string(LayerRole role);
LayerRole parse_layer_role(const std::string& text);

struct IngestReport {
    std::size_t pairs = 0;
    std::vector<std::string> layers;
    std::uint64_t bytes = 0;
    std::string descriptor_layer;
    std::uint32_t image_width = 0;
    std::uint32_t image_height = 0;

    nlohmann::ordered_json to_json() const;
};

struct IngestResult {
    TrainingDatabase db;
    IngestReport report;
    Manifest manifest;
};

/// Loads and validates every referenced file. Errors name the offending pair,
/// layer or path: MissingFile, ShapeMismatch, DuplicateId, Parse or Config.
IngestResult ingest(const std::filesystem::path& manifest_path);

}  // namespace hyperpatch
