#include "hyperpatch/raster.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>

#include "hyperpatch/error.hpp"

namespace hyperpatch {

Raster::Raster(std::uint32_t w, std::uint32_t h, Rgb fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3) {
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        pixels[i] = fill[0];
        pixels[i + 1] = fill[1];
        pixels[i + 2] = fill[2];
    }
}

Raster read_png(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
        throw Error(ErrorKind::MissingFile, "missing file: " + path.string());
    }
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        const std::string message = image.message;
        png_image_free(&image);
        throw Error(ErrorKind::Parse, "cannot decode " + path.string() + ": " + message);
    }
    image.format = PNG_FORMAT_RGB;
    Raster out(image.width, image.height);
    const png_color black{0, 0, 0};
    if (!png_image_finish_read(&image, &black, out.pixels.data(), 0, nullptr)) {
        const std::string message = image.message;
        png_image_free(&image);
        throw Error(ErrorKind::Parse, "cannot decode " + path.string() + ": " + message);
    }
    return out;
}

void write_png(const Raster& raster, const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = raster.width;
    image.height = raster.height;
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, raster.pixels.data(), 0,
                                 nullptr)) {
        const std::string message = image.message;
        png_image_free(&image);
        throw Error(ErrorKind::Io, "cannot write " + path.string() + ": " + message);
    }
}

std::uint8_t round_to_byte(double v) noexcept {
    const double r = std::floor(v + 0.5);
    if (r <= 0.0) return 0;
    if (r >= 255.0) return 255;
    return static_cast<std::uint8_t>(r);
}

std::string to_hex(Rgb color) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", color[0], color[1], color[2]);
    return buf;
}

Rgb parse_hex_color(const std::string& text) {
    std::string digits = text;
    if (!digits.empty() && digits.front() == '#') digits.erase(0, 1);
    if (digits.size() != 6 ||
        digits.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos) {
        throw Error(ErrorKind::Parse, "malformed color '" + text + "'");
    }
    Rgb out{};
    for (int c = 0; c < 3; ++c) {
        out[c] = static_cast<std::uint8_t>(std::stoi(digits.substr(c * 2, 2), nullptr, 16));
    }
    return out;
}

}  // namespace hyperpatch
