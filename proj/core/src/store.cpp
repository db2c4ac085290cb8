#include "hyperpatch/store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

#include "hyperpatch/error.hpp"

namespace hyperpatch {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
    return v;
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

float get_f32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    return std::bit_cast<float>(get_u32(bytes, offset));
}

void check_header(std::span<const std::uint8_t> bytes, const char (&magic)[4],
                  std::uint32_t version, const char* what) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), magic, 4) != 0) {
        throw Error(ErrorKind::BadMagic, std::string(what) + ": bad magic");
    }
    if (bytes.size() < 8) throw Error(ErrorKind::Truncated, std::string(what) + ": truncated header");
    if (get_u32(bytes, 4) != version) {
        throw Error(ErrorKind::BadVersion,
                    std::string(what) + ": unsupported version " + std::to_string(get_u32(bytes, 4)));
    }
}

template <typename Fn>
auto with_path(const std::filesystem::path& path, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

std::uint32_t json_u32(const nlohmann::json& v, const std::string& what) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0 ||
        v.get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorKind::Parse, what + " must be a non-negative integer");
    }
    return v.get<std::uint32_t>();
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw Error(ErrorKind::Parse, where + " is missing '" + key + "'");
    }
    return obj.at(key);
}

std::string require_string(const nlohmann::json& obj, const char* key, const std::string& where) {
    const auto& v = require(obj, key, where);
    if (!v.is_string()) throw Error(ErrorKind::Parse, where + "." + key + " must be a string");
    return v.get<std::string>();
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const ActivationTensor& tensor) {
    std::vector<std::uint8_t> out;
    out.reserve(kTensorHeaderBytes + tensor.values().size() * 4);
    out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
    put_u32(out, kTensorVersion);
    put_u32(out, tensor.height());
    put_u32(out, tensor.width());
    put_u32(out, tensor.depth());
    for (float v : tensor.values()) put_f32(out, v);
    return out;
}

ActivationTensor decode_tensor(std::span<const std::uint8_t> bytes, std::string layer_name) {
    check_header(bytes, kTensorMagic, kTensorVersion, "tensor file");
    if (bytes.size() < kTensorHeaderBytes) {
        throw Error(ErrorKind::Truncated, "tensor file: truncated header");
    }
    const auto h = get_u32(bytes, 8);
    const auto w = get_u32(bytes, 12);
    const auto d = get_u32(bytes, 16);
    const std::uint64_t count = static_cast<std::uint64_t>(h) * w * d;
    if (count == 0) throw Error(ErrorKind::Truncated, "tensor file: empty extent");
    const std::uint64_t expected = kTensorHeaderBytes + count * 4;
    if (bytes.size() != expected) {
        throw Error(ErrorKind::Truncated, "tensor file: " + std::to_string(bytes.size()) +
                                              " bytes, header implies " + std::to_string(expected));
    }
    std::vector<float> values(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = get_f32(bytes, kTensorHeaderBytes + i * 4);
        if (!std::isfinite(values[i])) {
            throw Error(ErrorKind::NonFinite,
                        "tensor file: non-finite value at index " + std::to_string(i));
        }
    }
    return ActivationTensor(std::move(layer_name), h, w, d, std::move(values));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
        throw Error(ErrorKind::MissingFile, "missing file: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorKind::Io, "cannot read " + path.string());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
}

void write_tensor(const ActivationTensor& tensor, const std::filesystem::path& path) {
    write_file_bytes(path, encode_tensor(tensor));
}

ActivationTensor read_tensor(const std::filesystem::path& path, std::string layer_name) {
    const auto bytes = read_file_bytes(path);
    return with_path(path, [&] { return decode_tensor(bytes, std::move(layer_name)); });
}

std::vector<std::uint8_t> encode_field(const NNField& field) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + field.cells.size() * 16);
    out.insert(out.end(), std::begin(kFieldMagic), std::end(kFieldMagic));
    put_u32(out, kFieldVersion);
    put_u32(out, field.rows);
    put_u32(out, field.cols);
    for (const auto& cell : field.cells) {
        put_u32(out, cell.image_id);
        put_u32(out, cell.pos.y);
        put_u32(out, cell.pos.x);
        put_f32(out, cell.distance);
    }
    return out;
}

NNField decode_field(std::span<const std::uint8_t> bytes, std::string layer_name) {
    check_header(bytes, kFieldMagic, kFieldVersion, "field dump");
    if (bytes.size() < 16) throw Error(ErrorKind::Truncated, "field dump: truncated header");
    const auto rows = get_u32(bytes, 8);
    const auto cols = get_u32(bytes, 12);
    const std::uint64_t expected = 16 + static_cast<std::uint64_t>(rows) * cols * 16;
    if (bytes.size() != expected) {
        throw Error(ErrorKind::Truncated, "field dump: " + std::to_string(bytes.size()) +
                                              " bytes, header implies " + std::to_string(expected));
    }
    NNField field(std::move(layer_name), rows, cols);
    for (std::size_t i = 0; i < field.cells.size(); ++i) {
        const auto off = 16 + i * 16;
        auto& cell = field.cells[i];
        cell.image_id = get_u32(bytes, off);
        cell.pos = Position{get_u32(bytes, off + 4), get_u32(bytes, off + 8)};
        cell.distance = get_f32(bytes, off + 12);
        if (!std::isfinite(cell.distance)) {
            throw Error(ErrorKind::NonFinite, "field dump: non-finite distance at cell " +
                                                  std::to_string(i));
        }
    }
    return field;
}

void write_field(const NNField& field, const std::filesystem::path& path) {
    write_file_bytes(path, encode_field(field));
}

NNField read_field(const std::filesystem::path& path, std::string layer_name) {
    const auto bytes = read_file_bytes(path);
    return with_path(path, [&] { return decode_field(bytes, std::move(layer_name)); });
}

std::string to_string(LayerRole role) {
    switch (role) {
        case LayerRole::Encoder: return "encoder";
        case LayerRole::Decoder: return "decoder";
        case LayerRole::Descriptor: return "descriptor";
    }
    return "encoder";
}

LayerRole parse_layer_role(const std::string& text) {
    if (text == "encoder") return LayerRole::Encoder;
    if (text == "decoder") return LayerRole::Decoder;
    if (text == "descriptor") return LayerRole::Descriptor;
    throw Error(ErrorKind::Parse, "unknown layer role '" + text + "'");
}

std::filesystem::path Manifest::resolve(const std::string& relative) const {
    const std::filesystem::path p(relative);
    return p.is_absolute() ? p : base_dir / p;
}

std::vector<LayerSpec> Manifest::layer_specs() const {
    std::vector<LayerSpec> specs;
    for (const auto& l : layers) {
        specs.push_back(LayerSpec{l.name, l.hyperpatch_h, l.hyperpatch_w, l.depth, l.patch_size,
                                  l.scale, l.role});
    }
    return specs;
}

std::string Manifest::descriptor_layer() const {
    for (const auto& l : layers) {
        if (l.role == LayerRole::Descriptor) return l.name;
    }
    return {};
}

Manifest Manifest::parse(const nlohmann::json& doc, std::filesystem::path base_dir) {
    if (!doc.is_object()) throw Error(ErrorKind::Parse, "manifest must be a JSON object");
    Manifest m;
    m.base_dir = std::move(base_dir);
    if (doc.contains("format_version") && json_u32(doc["format_version"], "format_version") != 1) {
        throw Error(ErrorKind::Parse, "unsupported manifest format_version");
    }

    const auto& size = require(doc, "image_size", "manifest");
    m.image_width = json_u32(require(size, "w", "image_size"), "image_size.w");
    m.image_height = json_u32(require(size, "h", "image_size"), "image_size.h");

    const auto& layers = require(doc, "layers", "manifest");
    if (!layers.is_array()) throw Error(ErrorKind::Parse, "manifest.layers must be a list");
    std::set<std::string> layer_names;
    std::size_t descriptor_count = 0;
    for (const auto& item : layers) {
        Layer l;
        l.name = require_string(item, "name", "layer");
        const std::string where = "layer '" + l.name + "'";
        const auto& hp = require(item, "hyperpatch", where);
        if (!hp.is_array() || hp.size() != 3) {
            throw Error(ErrorKind::Parse, where + ".hyperpatch must be [h, w, d]");
        }
        l.hyperpatch_h = json_u32(hp[0], where + ".hyperpatch[0]");
        l.hyperpatch_w = json_u32(hp[1], where + ".hyperpatch[1]");
        l.depth = json_u32(hp[2], where + ".hyperpatch[2]");
        l.patch_size = json_u32(require(item, "patch_size", where), where + ".patch_size");
        l.scale = json_u32(require(item, "scale", where), where + ".scale");
        l.role = parse_layer_role(require_string(item, "role", where));
        if (l.role == LayerRole::Descriptor) ++descriptor_count;
        if (!layer_names.insert(l.name).second) {
            throw Error(ErrorKind::Config, where + " declared twice");
        }
        m.layers.push_back(std::move(l));
    }
    if (descriptor_count > 1) {
        throw Error(ErrorKind::Config, "at most one layer may have role 'descriptor'");
    }

    const auto& pairs = require(doc, "pairs", "manifest");
    if (!pairs.is_array()) throw Error(ErrorKind::Parse, "manifest.pairs must be a list");
    for (const auto& item : pairs) {
        Pair p;
        const auto& id = require(item, "id", "pair");
        if (!id.is_number_integer()) throw Error(ErrorKind::Parse, "pair id must be an integer");
        p.id = id.get<std::int64_t>();
        const std::string where = "pair " + std::to_string(p.id);
        p.input_png = require_string(item, "input_png", where);
        p.output_png = require_string(item, "output_png", where);
        const auto& tensors = require(item, "tensors", where);
        if (!tensors.is_object()) throw Error(ErrorKind::Parse, where + ".tensors must be an object");
        for (const auto& [layer, path] : tensors.items()) {
            if (!path.is_string()) throw Error(ErrorKind::Parse, where + ".tensors values must be paths");
            p.tensors.emplace(layer, path.get<std::string>());
        }
        if (item.contains("tags")) {
            if (!item["tags"].is_array()) throw Error(ErrorKind::Parse, where + ".tags must be a list");
            for (const auto& t : item["tags"]) {
                if (!t.is_string()) throw Error(ErrorKind::Parse, where + ".tags must be strings");
                p.tags.push_back(t.get<std::string>());
            }
        }
        m.pairs.push_back(std::move(p));
    }
    if (doc.contains("palette")) {
        if (!doc["palette"].is_string()) throw Error(ErrorKind::Parse, "manifest.palette must be a path");
        m.palette = doc["palette"].get<std::string>();
    }
    for (const auto& [key, value] : doc.items()) {
        if (key != "format_version" && key != "image_size" && key != "layers" && key != "pairs" &&
            key != "palette") {
            m.extra[key] = value;
        }
    }
    return m;
}

Manifest Manifest::load(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
        throw Error(ErrorKind::MissingFile, "missing file: " + path.string());
    }
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
    }
    return with_path(path, [&] { return parse(doc, path.parent_path()); });
}

nlohmann::ordered_json Manifest::to_json() const {
    nlohmann::ordered_json doc;
    doc["format_version"] = 1;
    doc["image_size"] = {{"w", image_width}, {"h", image_height}};
    doc["layers"] = nlohmann::ordered_json::array();
    for (const auto& l : layers) {
        nlohmann::ordered_json item;
        item["name"] = l.name;
        item["hyperpatch"] = {l.hyperpatch_h, l.hyperpatch_w, l.depth};
        item["patch_size"] = l.patch_size;
        item["scale"] = l.scale;
        item["role"] = hyperpatch::to_string(l.role);
        doc["layers"].push_back(item);
    }
    doc["pairs"] = nlohmann::ordered_json::array();
    for (const auto& p : pairs) {
        nlohmann::ordered_json item;
        item["id"] = p.id;
        item["input_png"] = p.input_png;
        item["output_png"] = p.output_png;
        item["tensors"] = nlohmann::ordered_json::object();
        for (const auto& [layer, path] : p.tensors) item["tensors"][layer] = path;
        if (!p.tags.empty()) item["tags"] = p.tags;
        doc["pairs"].push_back(item);
    }
    if (palette) doc["palette"] = *palette;
    for (const auto& [key, value] : extra.items()) doc[key] = value;
    return doc;
}

void Manifest::save(const std::filesystem::path& path) const {
    const auto text = to_json().dump(2) + "\n";
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

nlohmann::ordered_json IngestReport::to_json() const {
    nlohmann::ordered_json doc;
    doc["pairs"] = pairs;
    doc["layers"] = layers;
    doc["bytes"] = bytes;
    doc["descriptor_layer"] = descriptor_layer.empty() ? nlohmann::ordered_json(nullptr)
                                                       : nlohmann::ordered_json(descriptor_layer);
    doc["image_size"] = {{"w", image_width}, {"h", image_height}};
    return doc;
}

IngestResult ingest(const std::filesystem::path& manifest_path) {
    Manifest manifest = Manifest::load(manifest_path);

    std::set<std::int64_t> seen;
    for (const auto& p : manifest.pairs) {
        if (p.id < 0) throw Error(ErrorKind::Config, "pair id " + std::to_string(p.id) + " is negative");
        if (!seen.insert(p.id).second) {
            throw Error(ErrorKind::DuplicateId, "duplicate pair id " + std::to_string(p.id));
        }
    }
    std::vector<const Manifest::Pair*> ordered;
    for (const auto& p : manifest.pairs) ordered.push_back(&p);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->id < b->id; });
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        if (ordered[i]->id != static_cast<std::int64_t>(i)) {
            throw Error(ErrorKind::Config, "pair ids must be dense from 0; missing id " +
                                               std::to_string(i));
        }
    }

    const auto specs = manifest.layer_specs();
    for (const auto& s : specs) s.validate();

    IngestReport report;
    std::vector<TrainingPair> pairs;
    for (const auto* entry : ordered) {
        const std::string where = "pair " + std::to_string(entry->id);
        TrainingPair pair;
        pair.image_id = static_cast<std::uint32_t>(entry->id);
        pair.tags = entry->tags;
        for (auto [png, target] : {std::pair{&entry->input_png, &pair.input_image},
                                   std::pair{&entry->output_png, &pair.output_image}}) {
            const auto path = manifest.resolve(*png);
            try {
                *target = read_png(path);
            } catch (const Error& e) {
                throw Error(e.kind(), where + ": " + e.what());
            }
            report.bytes += std::filesystem::file_size(path);
            if (target->width != manifest.image_width || target->height != manifest.image_height) {
                throw Error(ErrorKind::ShapeMismatch,
                            where + ": " + path.string() + " is " + std::to_string(target->width) +
                                "x" + std::to_string(target->height) + ", manifest says " +
                                std::to_string(manifest.image_width) + "x" +
                                std::to_string(manifest.image_height));
            }
        }
        for (const auto& spec : specs) {
            const auto it = entry->tensors.find(spec.name);
            if (it == entry->tensors.end()) {
                throw Error(ErrorKind::Config, where + " provides no tensor for layer '" + spec.name + "'");
            }
            const auto path = manifest.resolve(it->second);
            ActivationTensor tensor;
            try {
                tensor = read_tensor(path, spec.name);
                check_tensor_matches(tensor, spec);
            } catch (const Error& e) {
                throw Error(e.kind(), where + ", layer '" + spec.name + "': " + e.what());
            }
            report.bytes += std::filesystem::file_size(path);
            pair.tensors.emplace(spec.name, std::move(tensor));
        }
        pairs.push_back(std::move(pair));
    }

    IngestResult result{
        TrainingDatabase(specs, manifest.descriptor_layer(), std::move(pairs)), {}, manifest};
    report.pairs = result.db.size();
    for (const auto& s : specs) report.layers.push_back(s.name);
    report.descriptor_layer = manifest.descriptor_layer();
    report.image_width = manifest.image_width;
    report.image_height = manifest.image_height;
    result.report = report;
    return result;
}

}  // namespace hyperpatch
