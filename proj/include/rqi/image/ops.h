#pragma once

#include <cstdint>
#include <vector>

#include "rqi/image/image.h"

namespace rqi {

// BT.601 luma, unrounded. Single-channel buffers are copied.
ImagePlane to_luma(const ImageBuffer& img);
// One channel of an interleaved buffer as a plane.
ImagePlane channel_plane(const ImageBuffer& img, int channel);
// Rounds half away from zero and clamps to [0, 255].
std::uint8_t to_sample(double v);
ImageBuffer plane_to_buffer(const ImagePlane& p);
void store_channel(const ImagePlane& p, ImageBuffer& img, int channel);

// Taps exp(-t^2 / 2 sigma^2) for t in [-radius, radius], normalised to sum 1.
std::vector<double> gaussian_kernel(double sigma, int radius);

// Separable Gaussian blur with half-sample symmetric borders (edge sample
// repeated). Throws DimensionError if radius >= min(width, height).
ImagePlane gaussian_filter(const ImagePlane& p, double sigma, int radius);

// 2x2 box mean; a trailing odd row/column is dropped.
ImagePlane downscale_half(const ImagePlane& p);
// Pixel replication by an integer factor.
ImagePlane upsample_replicate(const ImagePlane& p, int factor);

// Area-weighted box resampling to an arbitrary (smaller) size.
ImagePlane resize_area(const ImagePlane& p, int width, int height);
// Bilinear resampling with pixel-centre alignment and clamped borders.
ImagePlane resize_bilinear(const ImagePlane& p, int width, int height);

ImagePlane crop(const ImagePlane& p, const CropRect& r);
ImageBuffer crop(const ImageBuffer& img, const CropRect& r);
CropRect center_crop_rect(int width, int height, int size);

// `count` square rects of side `size`, offsets uniform over every valid
// position, drawn from SplitMix64(seed): x first, then y, per rect.
std::vector<CropRect> random_crops(const ImagePlane& p, int size, int count, std::uint64_t seed);
std::vector<CropRect> random_crops(int width, int height, int size, int count, std::uint64_t seed);

ImagePlane rotate90(const ImagePlane& p);
ImagePlane mirror_horizontal(const ImagePlane& p);
ImageBuffer mirror_horizontal(const ImageBuffer& img);

double plane_mean(const ImagePlane& p);

}  // namespace rqi
