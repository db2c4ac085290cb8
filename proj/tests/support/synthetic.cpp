#include "synthetic.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "hyperpatch/store.hpp"

namespace hyperpatch::testing {

namespace fs = std::filesystem;

fs::path write_dataset(const fs::path& dir, const LayerSpec& layer, const LayerSpec& descriptor_layer,
                       const std::vector<DiskPair>& pairs, const std::string& palette_json) {
    fs::create_directories(dir);
    nlohmann::ordered_json doc;
    doc["format_version"] = 1;
    doc["image_size"] = {{"w", pairs.front().input.width}, {"h", pairs.front().input.height}};
    doc["layers"] = nlohmann::ordered_json::array();
    for (const auto* spec : {&layer, &descriptor_layer}) {
        doc["layers"].push_back({{"name", spec->name},
                                 {"hyperpatch", {spec->hyperpatch_h, spec->hyperpatch_w, spec->depth}},
                                 {"patch_size", spec->patch_size},
                                 {"scale", spec->scale},
                                 {"role", to_string(spec->role)}});
    }
    doc["pairs"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto stem = "p" + std::to_string(i);
        write_tensor(pairs[i].tensor, dir / (stem + "_" + layer.name + ".chpt"));
        write_tensor(pairs[i].descriptor, dir / (stem + "_" + descriptor_layer.name + ".chpt"));
        write_png(pairs[i].input, dir / (stem + "_in.png"));
        write_png(pairs[i].output, dir / (stem + "_out.png"));
        nlohmann::ordered_json item;
        item["id"] = i;
        item["input_png"] = stem + "_in.png";
        item["output_png"] = stem + "_out.png";
        item["tensors"] = {{layer.name, stem + "_" + layer.name + ".chpt"},
                           {descriptor_layer.name, stem + "_" + descriptor_layer.name + ".chpt"}};
        if (!pairs[i].tags.empty()) item["tags"] = pairs[i].tags;
        doc["pairs"].push_back(item);
    }
    if (!palette_json.empty()) {
        std::ofstream(dir / "palette.json") << palette_json;
        doc["palette"] = "palette.json";
    }
    const auto path = dir / "manifest.json";
    std::ofstream(path) << doc.dump(2) << "\n";
    return path;
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("hyperpatch_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace hyperpatch::testing
