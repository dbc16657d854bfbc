#include "sos/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sos {

namespace {

constexpr double kPi = 3.14159265358979323846;

inline float clamp01(float v) {
  return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
}

// Bilinear tap at continuous pixel-index coordinates (px, py); indices
// outside the source contribute transparent black.
inline void sample_bilinear_zero(const RasterImage& img, double px, double py, float out[4]) {
  double fx = std::floor(px);
  double fy = std::floor(py);
  int x0 = static_cast<int>(fx);
  int y0 = static_cast<int>(fy);
  double dx = px - fx;
  double dy = py - fy;
  double w00 = (1.0 - dx) * (1.0 - dy);
  double w10 = dx * (1.0 - dy);
  double w01 = (1.0 - dx) * dy;
  double w11 = dx * dy;
  for (int c = 0; c < 4; ++c) out[c] = 0.0f;
  auto add = [&](int x, int y, double w) {
    if (w == 0.0 || !img.in_bounds(x, y)) return;
    for (int c = 0; c < 4; ++c) out[c] += static_cast<float>(w * img.at(x, y, c));
  };
  add(x0, y0, w00);
  add(x0 + 1, y0, w10);
  add(x0, y0 + 1, w01);
  add(x0 + 1, y0 + 1, w11);
}

}  // namespace

RasterImage::RasterImage(int w, int h) : width(w), height(h) {
  if (w < 1 || h < 1) throw std::invalid_argument("RasterImage: dimensions must be >= 1");
  pixels.assign(static_cast<size_t>(w) * h * 4, 0.0f);
}

double RasterImage::alpha_mass() const {
  double s = 0.0;
  for (size_t i = 3; i < pixels.size(); i += 4) s += pixels[i];
  return s;
}

void RasterImage::fill(float r, float g, float b, float a) {
  for (size_t i = 0; i < pixels.size(); i += 4) {
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
    pixels[i + 3] = a;
  }
}

RasterImage resize_bilinear(const RasterImage& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw std::invalid_argument("resize_bilinear: zero dimension");
  RasterImage out(out_w, out_h);
  double sx = static_cast<double>(img.width) / out_w;
  double sy = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    // half-pixel centers, taps clamped to the source border
    double py = (y + 0.5) * sy - 0.5;
    double fy = std::floor(py);
    int y0 = static_cast<int>(fy);
    double dy = py - fy;
    int y0c = std::clamp(y0, 0, img.height - 1);
    int y1c = std::clamp(y0 + 1, 0, img.height - 1);
    for (int x = 0; x < out_w; ++x) {
      double px = (x + 0.5) * sx - 0.5;
      double fx = std::floor(px);
      int x0 = static_cast<int>(fx);
      double dx = px - fx;
      int x0c = std::clamp(x0, 0, img.width - 1);
      int x1c = std::clamp(x0 + 1, 0, img.width - 1);
      for (int c = 0; c < 4; ++c) {
        double top = (1.0 - dx) * img.at(x0c, y0c, c) + dx * img.at(x1c, y0c, c);
        double bot = (1.0 - dx) * img.at(x0c, y1c, c) + dx * img.at(x1c, y1c, c);
        out.at(x, y, c) = clamp01(static_cast<float>((1.0 - dy) * top + dy * bot));
      }
    }
  }
  return out;
}

RasterImage hflip_image(const RasterImage& img) {
  RasterImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 4; ++c) out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
  return out;
}

RasterImage transform_cutout(const RasterImage& img, double scale, double rotation_deg, bool hflip) {
  if (scale <= 0.0) throw std::invalid_argument("transform_cutout: scale must be > 0");
  RasterImage flipped;
  const RasterImage* s = &img;
  if (hflip) {
    flipped = hflip_image(img);
    s = &flipped;
  }

  double theta = rotation_deg * kPi / 180.0;
  double ct = std::cos(theta);
  double st = std::sin(theta);

  // forward map: rotate(scale(p - center)) for the source rectangle;
  // the output box is the tight bound of the transformed corners
  double w = s->width;
  double h = s->height;
  double cx = w / 2.0;
  double cy = h / 2.0;
  double minx = 1e30, miny = 1e30, maxx = -1e30, maxy = -1e30;
  const double corners[4][2] = {{0, 0}, {w, 0}, {0, h}, {w, h}};
  for (const auto& p : corners) {
    double dx = (p[0] - cx) * scale;
    double dy = (p[1] - cy) * scale;
    double rx = ct * dx - st * dy;
    double ry = st * dx + ct * dy;
    minx = std::min(minx, rx);
    maxx = std::max(maxx, rx);
    miny = std::min(miny, ry);
    maxy = std::max(maxy, ry);
  }
  int out_w = std::max(1, static_cast<int>(std::lround(maxx - minx)));
  int out_h = std::max(1, static_cast<int>(std::lround(maxy - miny)));

  RasterImage out(out_w, out_h);
  double ocx = out_w / 2.0;
  double ocy = out_h / 2.0;
  double inv_scale = 1.0 / scale;
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      // inverse map back into source pixel-center coordinates
      double dx = (x + 0.5) - ocx;
      double dy = (y + 0.5) - ocy;
      double ux = (ct * dx + st * dy) * inv_scale;
      double uy = (-st * dx + ct * dy) * inv_scale;
      double px = ux + cx - 0.5;
      double py = uy + cy - 0.5;
      float v[4];
      sample_bilinear_zero(*s, px, py, v);
      for (int c = 0; c < 4; ++c) out.at(x, y, c) = clamp01(v[c]);
    }
  }
  return out;
}

void alpha_composite_inplace(RasterImage& canvas, const RasterImage& cutout, int x, int y) {
  for (int cy = 0; cy < cutout.height; ++cy) {
    int ty = y + cy;
    if (ty < 0 || ty >= canvas.height) continue;
    for (int cx = 0; cx < cutout.width; ++cx) {
      int tx = x + cx;
      if (tx < 0 || tx >= canvas.width) continue;
      float a = cutout.at(cx, cy, 3);
      if (a <= 0.0f) continue;
      for (int c = 0; c < 3; ++c) {
        float srcv = cutout.at(cx, cy, c);
        float dstv = canvas.at(tx, ty, c);
        canvas.at(tx, ty, c) = clamp01(a * srcv + (1.0f - a) * dstv);
      }
      // canvas stays opaque
      canvas.at(tx, ty, 3) = 1.0f;
    }
  }
}

RasterImage alpha_composite(const RasterImage& canvas, const RasterImage& cutout, int x, int y) {
  RasterImage out = canvas;
  alpha_composite_inplace(out, cutout, x, y);
  return out;
}

RasterImage crop(const RasterImage& img, int x, int y, int w, int h) {
  if (w < 1 || h < 1) throw std::invalid_argument("crop: dimensions must be >= 1");
  x = std::clamp(x, 0, std::max(0, img.width - w));
  y = std::clamp(y, 0, std::max(0, img.height - h));
  if (x + w > img.width || y + h > img.height)
    throw std::invalid_argument("crop: window larger than image");
  RasterImage out(w, h);
  for (int yy = 0; yy < h; ++yy)
    for (int xx = 0; xx < w; ++xx)
      for (int c = 0; c < 4; ++c) out.at(xx, yy, c) = img.at(x + xx, y + yy, c);
  return out;
}

}  // namespace sos
