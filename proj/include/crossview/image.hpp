#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "crossview/tensor.hpp"

namespace crossview {

// Declared value range of a raster. Carried as metadata so that consumers
// (normalization, metrics with their dynamic-range constant) agree on units.
enum class ValueRange { Raw255, Unit01, Signed11 };

inline const char* to_string(ValueRange r) {
  switch (r) {
    case ValueRange::Raw255: return "raw255";
    case ValueRange::Unit01: return "unit01";
    case ValueRange::Signed11: return "signed11";
  }
  return "?";
}

inline double range_min(ValueRange r) { return r == ValueRange::Signed11 ? -1.0 : 0.0; }
inline double range_max(ValueRange r) { return r == ValueRange::Raw255 ? 255.0 : 1.0; }
inline double range_span(ValueRange r) { return range_max(r) - range_min(r); }

template <class S>
struct RasterImage {
  Tensor3<S> pixels;  // 1 or 3 channels
  ValueRange range = ValueRange::Raw255;

  RasterImage() = default;
  RasterImage(Tensor3<S> px, ValueRange r) : pixels(std::move(px)), range(r) {}
  RasterImage(int c, int h, int w, ValueRange r) : pixels(c, h, w), range(r) {}

  int channels() const { return pixels.channels(); }
  int height() const { return pixels.height(); }
  int width() const { return pixels.width(); }
  Shape3 shape() const { return pixels.shape(); }
};

// Affine remap between declared ranges; endpoints map to endpoints exactly.
template <class S>
RasterImage<S> convert_range(const RasterImage<S>& img, ValueRange target) {
  if (img.range == target) return img;
  const double in_lo = range_min(img.range), in_span = range_span(img.range);
  const double out_lo = range_min(target), out_span = range_span(target);
  RasterImage<S> out(img.pixels.channels(), img.height(), img.width(), target);
  out.pixels.array() =
      ((img.pixels.array().template cast<double>() - in_lo) * (out_span / in_span) + out_lo)
          .template cast<S>();
  return out;
}

// Enforces the declared-range invariant.
template <class S>
void validate_range(const RasterImage<S>& img, double tol = 1e-6) {
  if (img.pixels.size() == 0) throw DataError("raster: empty image");
  const double lo = img.pixels.array().minCoeff();
  const double hi = img.pixels.array().maxCoeff();
  if (lo < range_min(img.range) - tol || hi > range_max(img.range) + tol)
    throw DataError("raster: values [" + std::to_string(lo) + ", " + std::to_string(hi) +
                    "] violate declared range " + to_string(img.range));
}

template <class S>
RasterImage<S> flip_horizontal(const RasterImage<S>& img) {
  return RasterImage<S>(flip_horizontal(img.pixels), img.range);
}

inline double quantize_8bit(double v01) {
  return std::clamp(std::round(v01 * 255.0), 0.0, 255.0);
}

}  // namespace crossview
