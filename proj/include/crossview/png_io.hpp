#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crossview/image.hpp"

namespace crossview {

// 8-bit interleaved pixel buffer as stored on disk.
struct PngBuffer {
  int channels = 0;  // 1 or 3
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bytes;  // row-major, interleaved
};

PngBuffer read_png_bytes(const std::string& path);
void write_png_bytes(const std::string& path, const PngBuffer& buf);

template <class S>
RasterImage<S> read_png(const std::string& path) {
  const PngBuffer buf = read_png_bytes(path);
  RasterImage<S> img(buf.channels, buf.height, buf.width, ValueRange::Raw255);
  long i = 0;
  for (int y = 0; y < buf.height; ++y)
    for (int x = 0; x < buf.width; ++x)
      for (int c = 0; c < buf.channels; ++c) img.pixels(c, y, x) = static_cast<S>(buf.bytes[i++]);
  return img;
}

template <class S>
void write_png(const std::string& path, const RasterImage<S>& img) {
  const RasterImage<S> raw = convert_range(img, ValueRange::Raw255);
  PngBuffer buf;
  buf.channels = img.channels();
  buf.height = img.height();
  buf.width = img.width();
  buf.bytes.resize(static_cast<std::size_t>(buf.channels) * buf.height * buf.width);
  long i = 0;
  for (int y = 0; y < buf.height; ++y)
    for (int x = 0; x < buf.width; ++x)
      for (int c = 0; c < buf.channels; ++c)
        buf.bytes[i++] = static_cast<std::uint8_t>(
            quantize_8bit(static_cast<double>(raw.pixels(c, y, x)) / 255.0));
  write_png_bytes(path, buf);
}

}  // namespace crossview
