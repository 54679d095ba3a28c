#include "rqi/image/image.h"

#include <cmath>
#include <string>

#include "rqi/error.h"

namespace rqi {

namespace {

void check_extent(int width, int height) {
  if (width < 1 || height < 1) {
    throw DimensionError("image extent must be at least 1x1, got " + std::to_string(width) +
                         "x" + std::to_string(height));
  }
}

}  // namespace

ImageBuffer::ImageBuffer(int width, int height, int channels)
    : width_(width), height_(height), channels_(channels) {
  check_extent(width, height);
  if (channels != 1 && channels != 3) {
    throw DimensionError("channels must be 1 or 3, got " + std::to_string(channels));
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, 0);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<std::uint8_t> data)
    : ImageBuffer(width, height, channels) {
  if (data.size() != data_.size()) {
    throw DimensionError("buffer holds " + std::to_string(data.size()) + " samples, expected " +
                         std::to_string(data_.size()));
  }
  data_ = std::move(data);
}

ImagePlane::ImagePlane(int width, int height, double fill) : width_(width), height_(height) {
  check_extent(width, height);
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

ImagePlane::ImagePlane(int width, int height, std::vector<double> data)
    : ImagePlane(width, height) {
  if (data.size() != data_.size()) {
    throw DimensionError("plane holds " + std::to_string(data.size()) + " samples, expected " +
                         std::to_string(data_.size()));
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw DimensionError("plane samples must be finite");
  }
  data_ = std::move(data);
}

}  // namespace rqi
