#pragma once

#include <cstdint>
#include <filesystem>

#include "rqi/image/image.h"

namespace rqi {

// Procedural RGB content: multi-octave 1/f texture, hard-edged shapes and
// slowly varying colour. Deterministic in (seed, width, height).
ImageBuffer synthetic_content(std::uint64_t seed, int width = 128, int height = 128);

// Writes content_00.png ... as PNG; content i uses seed derive_seed(seed, i).
void write_synthetic_corpus(const std::filesystem::path& dir, int count, std::uint64_t seed, int width = 128,
                            int height = 128);

}  // namespace rqi
