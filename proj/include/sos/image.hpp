#pragma once

#include <cstdint>
#include <vector>

namespace sos {

// RGBA raster with float intensities in [0,1], row-major, 4 channels.
// alpha = 1 means fully opaque.
struct RasterImage {
  int width = 0;
  int height = 0;
  static constexpr int channels = 4;
  std::vector<float> pixels;  // height * width * 4

  RasterImage() = default;
  RasterImage(int w, int h);

  float& at(int x, int y, int c) { return pixels[(static_cast<size_t>(y) * width + x) * 4 + c]; }
  float at(int x, int y, int c) const { return pixels[(static_cast<size_t>(y) * width + x) * 4 + c]; }

  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

  // Sum of the alpha channel.
  double alpha_mass() const;
  void fill(float r, float g, float b, float a);
};

// Axis-aligned box, top-left origin, in pixels.
struct BoundingBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;
};

// Bilinear resize with half-pixel-centered sampling. All four channels are
// interpolated; results are clamped to [0,1]. Throws std::invalid_argument
// on a zero output dimension.
RasterImage resize_bilinear(const RasterImage& img, int out_w, int out_h);

// Horizontal flip first, then uniform scale, then rotation about the center.
// The output canvas is the tight bound of the transformed source rectangle;
// bilinear taps outside the source contribute transparent black.
RasterImage transform_cutout(const RasterImage& img, double scale, double rotation_deg, bool hflip);

// Standard over-operator: out = a*src + (1-a)*dst per color channel. The
// canvas must be opaque; cutout pixels outside the canvas are clipped.
// (x, y) is the position of the cutout's top-left pixel on the canvas and
// may be negative.
RasterImage alpha_composite(const RasterImage& canvas, const RasterImage& cutout, int x, int y);

// In-place variant used by the compositor loop.
void alpha_composite_inplace(RasterImage& canvas, const RasterImage& cutout, int x, int y);

RasterImage hflip_image(const RasterImage& img);

// Crop with clamping to the image bounds. w,h >= 1 required.
RasterImage crop(const RasterImage& img, int x, int y, int w, int h);

}  // namespace sos
