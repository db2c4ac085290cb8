#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hyperpatch {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB image, row-major, 3 bytes per pixel.
struct Raster {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> pixels;

    Raster() = default;
    Raster(std::uint32_t w, std::uint32_t h, Rgb fill = {0, 0, 0});

    bool empty() const noexcept { return width == 0 || height == 0; }

    Rgb get(std::uint32_t x, std::uint32_t y) const {
        const auto i = index(x, y);
        return {pixels[i], pixels[i + 1], pixels[i + 2]};
    }
    void set(std::uint32_t x, std::uint32_t y, Rgb c) {
        const auto i = index(x, y);
        pixels[i] = c[0];
        pixels[i + 1] = c[1];
        pixels[i + 2] = c[2];
    }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    std::size_t index(std::uint32_t x, std::uint32_t y) const {
        return (static_cast<std::size_t>(y) * width + x) * 3;
    }
};

/// Reads any PNG as 8-bit RGB (alpha dropped, gray expanded, 16-bit reduced).
/// Throws MissingFile, Io or Parse.
Raster read_png(const std::filesystem::path& path);

/// Writes a deterministic 8-bit RGB PNG. Throws Io.
void write_png(const Raster& raster, const std::filesystem::path& path);

/// Round-half-up quantization of a non-negative float to 0..255.
std::uint8_t round_to_byte(double v) noexcept;

/// "#rrggbb" and back. parse_hex_color throws Parse on malformed input.
std::string to_hex(Rgb color);
Rgb parse_hex_color(const std::string& text);

}  // namespace hyperpatch
