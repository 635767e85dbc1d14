#include "slidereg/imagery/resample.hpp"

#include "slidereg/error.hpp"
#include "slidereg/imagery/image_io.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace slidereg {

Raster resample(const Raster &source, const PlanarTransform &transform,
                int out_width, int out_height, Interpolation mode,
                std::uint8_t fill, Point2 source_origin, Point2 output_origin) {
  if (out_width <= 0 || out_height <= 0)
    throw Error("resample output size must be positive");
  if (transform.linear_determinant() <= 1e-12)
    throw Error("singular transform");
  const Eigen::Matrix3d inv = transform.inverse().m;
  const double a = inv(0, 0), b = inv(0, 1), c = inv(0, 2);
  const double d = inv(1, 0), e = inv(1, 1), f = inv(1, 2);
  const auto sx0 = static_cast<long long>(std::llround(source_origin.x()));
  const auto sy0 = static_cast<long long>(std::llround(source_origin.y()));
  const int channels = source.channels;

  Raster out(out_width, out_height, channels, fill);
  out.level = source.level;
  out.downsample = source.downsample;

  auto sample = [&](long long x, long long y, int ch) -> double {
    const long long lx = x - sx0;
    const long long ly = y - sy0;
    if (lx < 0 || ly < 0 || lx >= source.width || ly >= source.height)
      return fill;
    return source.at(static_cast<int>(lx), static_cast<int>(ly), ch);
  };

  for (int j = 0; j < out_height; ++j) {
    const double py = output_origin.y() + j;
    for (int i = 0; i < out_width; ++i) {
      const double px = output_origin.x() + i;
      const double qx = a * px + b * py + c;
      const double qy = d * px + e * py + f;
      if (!std::isfinite(qx) || !std::isfinite(qy) || std::abs(qx) > 1e15 ||
          std::abs(qy) > 1e15)
        continue;
      if (mode == Interpolation::Nearest) {
        const auto xn = static_cast<long long>(std::floor(qx + 0.5));
        const auto yn = static_cast<long long>(std::floor(qy + 0.5));
        for (int ch = 0; ch < channels; ++ch)
          out.at(i, j, ch) = static_cast<std::uint8_t>(sample(xn, yn, ch));
      } else {
        const double fx0 = std::floor(qx);
        const double fy0 = std::floor(qy);
        const double fx = qx - fx0;
        const double fy = qy - fy0;
        const auto x0 = static_cast<long long>(fx0);
        const auto y0 = static_cast<long long>(fy0);
        for (int ch = 0; ch < channels; ++ch) {
          const double v00 = sample(x0, y0, ch);
          const double v10 = sample(x0 + 1, y0, ch);
          const double v01 = sample(x0, y0 + 1, ch);
          const double v11 = sample(x0 + 1, y0 + 1, ch);
          const double v = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
                           fy * ((1.0 - fx) * v01 + fx * v11);
          out.at(i, j, ch) =
              static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
        }
      }
    }
  }
  return out;
}

Rect source_footprint(const PlanarTransform &transform, const Rect &output_rect) {
  const Eigen::Matrix3d inv = transform.inverse().m;
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  const double xs[2] = {static_cast<double>(output_rect.x),
                        static_cast<double>(output_rect.right() - 1)};
  const double ys[2] = {static_cast<double>(output_rect.y),
                        static_cast<double>(output_rect.bottom() - 1)};
  for (double px : xs) {
    for (double py : ys) {
      const double qx = inv(0, 0) * px + inv(0, 1) * py + inv(0, 2);
      const double qy = inv(1, 0) * px + inv(1, 1) * py + inv(1, 2);
      min_x = std::min(min_x, qx);
      max_x = std::max(max_x, qx);
      min_y = std::min(min_y, qy);
      max_y = std::max(max_y, qy);
    }
  }
  const int x0 = static_cast<int>(std::floor(min_x)) - 1;
  const int y0 = static_cast<int>(std::floor(min_y)) - 1;
  const int x1 = static_cast<int>(std::floor(max_x)) + 2;
  const int y1 = static_cast<int>(std::floor(max_y)) + 2;
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

Raster resize(const Raster &src, int width, int height) {
  if (width <= 0 || height <= 0 || src.empty())
    throw Error("resize requires non-empty input and output");
  if (width == src.width && height == src.height)
    return src;
  const bool shrinking = width <= src.width && height <= src.height;
  cv::Mat out;
  cv::resize(mat_view(src), out, cv::Size(width, height), 0, 0,
             shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  Raster r(width, height, src.channels);
  std::copy_n(out.ptr<std::uint8_t>(0), r.data.size(), r.data.data());
  r.level = src.level;
  r.downsample = src.downsample * static_cast<double>(src.width) / width;
  return r;
}

} // namespace slidereg
