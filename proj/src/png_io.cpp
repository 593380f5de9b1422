#include "crossview/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

namespace crossview {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

PngBuffer read_png_bytes(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("png: cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png: allocation failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png: allocation failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: failed to decode " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  // Normalize everything to 8-bit gray or RGB.
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: unsupported channel count in " + path);
  }

  PngBuffer buf;
  buf.channels = channels;
  buf.height = static_cast<int>(height);
  buf.width = static_cast<int>(width);
  buf.bytes.resize(static_cast<std::size_t>(channels) * width * height);

  std::vector<png_bytep> rows(height);
  const std::size_t stride = static_cast<std::size_t>(channels) * width;
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buf.bytes.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return buf;
}

void write_png_bytes(const std::string& path, const PngBuffer& buf) {
  if (buf.channels != 1 && buf.channels != 3) throw DataError("png: unsupported channel count");

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("png: cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png: allocation failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png: allocation failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png: failed to encode " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, buf.width, buf.height, 8,
               buf.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_bytep> rows(buf.height);
  const std::size_t stride = static_cast<std::size_t>(buf.channels) * buf.width;
  for (int y = 0; y < buf.height; ++y)
    rows[y] = const_cast<png_bytep>(buf.bytes.data() + y * stride);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace crossview
