#include "sos/codec.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "sos/common.hpp"

namespace sos {

namespace {

std::vector<unsigned char> read_all_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

uint32_t get_u32le(const unsigned char* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}

void put_u32le(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

const unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

RasterImage decode_sosf(const std::vector<unsigned char>& bytes,
                        const std::string& path) {
  if (bytes.size() < 16) throw FormatError("truncated sosf header: " + path);
  uint32_t w = get_u32le(bytes.data() + 4);
  uint32_t h = get_u32le(bytes.data() + 8);
  uint32_t c = get_u32le(bytes.data() + 12);
  if (w == 0 || h == 0 || (c != 3 && c != 4))
    throw FormatError("bad sosf dimensions: " + path);
  size_t count = size_t(w) * h * c;
  if (bytes.size() != 16 + count * 4)
    throw FormatError("sosf payload size mismatch: " + path);
  RasterImage img{int(w), int(h)};
  const unsigned char* p = bytes.data() + 16;
  for (size_t i = 0; i < size_t(w) * h; ++i) {
    for (uint32_t k = 0; k < c; ++k) {
      uint32_t bits = get_u32le(p);
      p += 4;
      float v;
      std::memcpy(&v, &bits, 4);
      img.pixels[i * 4 + k] = v;
    }
    if (c == 3) img.pixels[i * 4 + 3] = 1.0f;
  }
  return img;
}

RasterImage decode_png(const std::vector<unsigned char>& bytes,
                       const std::string& path) {
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&pi, bytes.data(), bytes.size()))
    throw FormatError("png decode failed: " + path + ": " + pi.message);
  pi.format = PNG_FORMAT_RGBA;
  std::vector<unsigned char> raw(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, raw.data(), 0, nullptr)) {
    std::string msg = pi.message;
    png_image_free(&pi);
    throw FormatError("png decode failed: " + path + ": " + msg);
  }
  RasterImage img(int(pi.width), int(pi.height));
  for (size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = raw[i] / 255.0f;
  return img;
}

}  // namespace

RasterImage load_image(const std::string& path) {
  std::vector<unsigned char> bytes = read_all_bytes(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "SOSF", 4) == 0)
    return decode_sosf(bytes, path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0)
    return decode_png(bytes, path);
  throw FormatError("unrecognized image format: " + path);
}

RasterImage load_sosf(const std::string& path) {
  std::vector<unsigned char> bytes = read_all_bytes(path);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "SOSF", 4) != 0)
    throw FormatError("not a sosf file: " + path);
  return decode_sosf(bytes, path);
}

RasterImage load_png(const std::string& path) {
  std::vector<unsigned char> bytes = read_all_bytes(path);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
    throw FormatError("not a png file: " + path);
  return decode_png(bytes, path);
}

void save_sosf(const RasterImage& img, const std::string& path) {
  std::vector<unsigned char> out;
  out.reserve(16 + img.pixels.size() * 4);
  out.push_back('S');
  out.push_back('O');
  out.push_back('S');
  out.push_back('F');
  put_u32le(out, uint32_t(img.width));
  put_u32le(out, uint32_t(img.height));
  put_u32le(out, uint32_t(RasterImage::channels));
  for (float v : img.pixels) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32le(out, bits);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          std::streamsize(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

void save_png(const RasterImage& img, const std::string& path) {
  std::vector<unsigned char> raw(img.pixels.size());
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    float v = std::clamp(img.pixels[i], 0.0f, 1.0f);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  pi.width = png_uint_32(img.width);
  pi.height = png_uint_32(img.height);
  pi.format = PNG_FORMAT_RGBA;
  if (!png_image_write_to_file(&pi, path.c_str(), 0, raw.data(), 0, nullptr))
    throw IoError("png write failed: " + path + ": " + pi.message);
}

void save_image(const RasterImage& img, const std::string& path) {
  size_t dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".png")
    save_png(img, path);
  else if (ext == ".sosf")
    save_sosf(img, path);
  else
    throw FormatError("unsupported image extension: " + path);
}

}  // namespace sos
