#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rqi/image/image.h"
#include "rqi/util/file.h"

namespace rqi {

// Decodes PNG (8/16-bit gray or RGB; alpha is dropped, palettes expanded) or
// binary PNM (P5/P6). 16-bit samples are reduced with a right shift by 8.
// Throws IoError when the file cannot be read and FormatError otherwise.
ImageBuffer load_image(const std::filesystem::path& path);
ImageBuffer decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const ImageBuffer& img);
std::vector<std::uint8_t> encode_pnm(const ImageBuffer& img);

// Format is chosen from the extension: .png, .ppm or .pgm.
void save_image(const ImageBuffer& img, const std::filesystem::path& path);

}  // namespace rqi
