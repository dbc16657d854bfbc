#pragma once

#include <string>

#include "sos/image.hpp"

namespace sos {

// Loads a PNG or SOSF image, dispatching on the file's magic bytes.
// RGB inputs gain alpha = 1. Throws IoError if the file cannot be read,
// FormatError if the content is not a supported image.
RasterImage load_image(const std::string& path);

// Saves by extension: ".png" (8-bit RGBA) or ".sosf" (raw 32-bit floats).
void save_image(const RasterImage& img, const std::string& path);

// Raw float format: magic "SOSF", u32 width, u32 height, u32 channels,
// then little-endian 32-bit floats row-major. Bit-exact round trip.
RasterImage load_sosf(const std::string& path);
void save_sosf(const RasterImage& img, const std::string& path);

RasterImage load_png(const std::string& path);
void save_png(const RasterImage& img, const std::string& path);

}  // namespace sos
