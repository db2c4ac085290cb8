#include "hyperpatch/layers.hpp"

namespace hyperpatch {

namespace {

LayerSpec table_row(const char* name, std::uint32_t depth, std::uint32_t patch, LayerRole role) {
    LayerSpec spec;
    spec.name = name;
    spec.hyperpatch_h = 2;
    spec.hyperpatch_w = 2;
    spec.depth = depth;
    spec.patch_size = patch;
    spec.scale = patch / 2 == 0 ? 1 : patch / 2;
    spec.role = role;
    return spec;
}

}  // namespace

std::vector<LayerSpec> default_layer_table() {
    using enum LayerRole;
    return {
        table_row("encoder1", 64, 2, Encoder),
        table_row("encoder2", 128, 4, Encoder),
        table_row("encoder3", 256, 8, Encoder),
        table_row("encoder4", 512, 16, Encoder),
        table_row("encoder5", 512, 32, Encoder),
        table_row("encoder6", 512, 64, Encoder),
        table_row("encoder7", 512, 128, Encoder),
        table_row("decoder8", 1024, 128, Decoder),
        table_row("decoder7", 1024, 64, Descriptor),
        table_row("decoder6", 1024, 32, Decoder),
        table_row("decoder5", 1024, 16, Decoder),
        table_row("decoder4", 512, 8, Decoder),
        table_row("decoder3", 256, 4, Decoder),
        table_row("decoder2", 128, 2, Decoder),
    };
}

std::uint32_t default_tensor_extent(const LayerSpec& spec, std::uint32_t image_size) {
    return image_size / spec.scale;
}

}  // namespace hyperpatch
