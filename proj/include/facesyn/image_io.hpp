#pragma once

#include "facesyn/render.hpp"

#include <string>

namespace facesyn {

// 8-bit sRGB PNG; channel values map linearly between bytes and [0,1]
// (v = byte/255 on read, byte = round(clamp(v)*255) on write). Encoder
// settings are fixed so identical images produce identical files.
Image read_png(const std::string& path);
void write_png(const Image& img, const std::string& path);

// Binary PPM (P6), same value mapping; dependency-free fallback.
Image read_ppm(const std::string& path);
void write_ppm(const Image& img, const std::string& path);

// Dispatch by file extension (.png / .ppm).
Image read_image(const std::string& path);
void write_image(const Image& img, const std::string& path);

} // namespace facesyn
