#pragma once

#include <cmath>
#include <numbers>
#include <utility>

#include "crossview/image.hpp"

namespace crossview {

// Geometry of the overhead-to-panorama coordinate change.
struct PolarParams {
  int sat_width = 750;
  int sat_height = 750;
  int polar_width = 616;
  int polar_height = 112;

  void validate() const {
    require(sat_width > 0 && sat_height > 0 && polar_width > 0 && polar_height > 0,
            "polar: all dimensions must be strictly positive");
    require(sat_width == sat_height, "polar: overhead image must be square");
  }
};

enum class OobPolicy { ClampEdge, ZeroPad };

// Source location in the overhead image for panorama pixel (x_ps, y_ps).
// Row y_ps sweeps a circle of radius (y_ps/H_ps)*(W_s/2) around the image
// center; column x_ps selects the azimuth 2*pi*x_ps/W_ps clockwise from
// north (north maps to column 0). Integer coordinates address pixel centers.
template <class S>
std::pair<S, S> polar_source_coords(S x_ps, S y_ps, const PolarParams& p) {
  const S angle = S(2) * S(std::numbers::pi) * x_ps / S(p.polar_width);
  const S radial = (S(p.sat_width) / S(2)) * (y_ps / S(p.polar_height));
  const S x_s = S(p.sat_width) / S(2) + radial * std::sin(angle);
  const S y_s = S(p.sat_height) / S(2) - (S(p.sat_height) / S(2)) * (y_ps / S(p.polar_height)) * std::cos(angle);
  return {x_s, y_s};
}

namespace detail {

template <class S>
S sample_bilinear(const Tensor3<S>& img, int c, S x, S y, OobPolicy oob) {
  const int h = img.height(), w = img.width();
  const S x0f = std::floor(x), y0f = std::floor(y);
  const int x0 = static_cast<int>(x0f), y0 = static_cast<int>(y0f);
  const S fx = x - x0f, fy = y - y0f;

  auto at = [&](int yy, int xx) -> S {
    if (oob == OobPolicy::ClampEdge) {
      yy = std::clamp(yy, 0, h - 1);
      xx = std::clamp(xx, 0, w - 1);
      return img(c, yy, xx);
    }
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return S(0);
    return img(c, yy, xx);
  };

  const S v00 = at(y0, x0), v01 = at(y0, x0 + 1);
  const S v10 = at(y0 + 1, x0), v11 = at(y0 + 1, x0 + 1);
  return (S(1) - fy) * ((S(1) - fx) * v00 + fx * v01) + fy * ((S(1) - fx) * v10 + fx * v11);
}

}  // namespace detail

// Resample a square overhead image onto panorama coordinates. Pure function;
// bit-identical outputs for identical inputs.
template <class S>
RasterImage<S> polar_transform(const RasterImage<S>& satellite, const PolarParams& params,
                               OobPolicy oob = OobPolicy::ClampEdge) {
  params.validate();
  require(satellite.height() == satellite.width(), "polar: input image must be square");
  require(satellite.width() == params.sat_width,
          "polar: image size " + std::to_string(satellite.width()) + " does not match params W_s " +
              std::to_string(params.sat_width));

  RasterImage<S> out(satellite.channels(), params.polar_height, params.polar_width, satellite.range);
  for (int y = 0; y < params.polar_height; ++y) {
    for (int x = 0; x < params.polar_width; ++x) {
      const auto [xs, ys] = polar_source_coords<S>(S(x), S(y), params);
      for (int c = 0; c < satellite.channels(); ++c)
        out.pixels(c, y, x) = detail::sample_bilinear(satellite.pixels, c, xs, ys, oob);
    }
  }
  return out;
}

}  // namespace crossview
