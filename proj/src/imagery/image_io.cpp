#include "slidereg/imagery/image_io.hpp"

#include "slidereg/error.hpp"
#include "slidereg/imagery/pyramid.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <fstream>

namespace slidereg {

namespace fs = std::filesystem;

Raster raster_from_mat(const cv::Mat &mat) {
  if (mat.empty())
    throw Error("empty image");
  const int channels = mat.channels();
  if (channels != 1 && channels != 3)
    throw Error("unsupported channel count " + std::to_string(channels));

  cv::Mat eight;
  if (mat.depth() == CV_8U) {
    eight = mat;
  } else if (mat.depth() == CV_16U) {
    double max_value = 0.0;
    cv::minMaxLoc(mat.reshape(1), nullptr, &max_value);
    eight.create(mat.size(), CV_MAKETYPE(CV_8U, channels));
    const cv::Mat src = mat.reshape(1);
    cv::Mat dst = eight.reshape(1);
    for (int y = 0; y < src.rows; ++y) {
      const auto *s = src.ptr<std::uint16_t>(y);
      auto *d = dst.ptr<std::uint8_t>(y);
      for (int x = 0; x < src.cols; ++x) {
        d[x] = max_value > 0.0
                   ? static_cast<std::uint8_t>(
                         std::lround(static_cast<double>(s[x]) * 255.0 / max_value))
                   : 0;
      }
    }
  } else {
    throw Error("unsupported pixel depth (expected 8 or 16 bit)");
  }

  cv::Mat rgb;
  if (channels == 3)
    cv::cvtColor(eight, rgb, cv::COLOR_BGR2RGB);
  else
    rgb = eight;

  Raster out(rgb.cols, rgb.rows, channels);
  const std::size_t row_bytes = static_cast<std::size_t>(rgb.cols) * channels;
  for (int y = 0; y < rgb.rows; ++y)
    std::copy_n(rgb.ptr<std::uint8_t>(y), row_bytes, &out.data[out.index(0, y)]);
  return out;
}

cv::Mat mat_view(const Raster &raster) {
  return cv::Mat(raster.height, raster.width,
                 CV_MAKETYPE(CV_8U, raster.channels),
                 const_cast<std::uint8_t *>(raster.data.data()));
}

cv::Mat mat_from_raster(const Raster &raster) {
  cv::Mat view = mat_view(raster);
  cv::Mat out;
  if (raster.channels == 3)
    cv::cvtColor(view, out, cv::COLOR_RGB2BGR);
  else
    out = view.clone();
  return out;
}

Raster load_image(const fs::path &path) {
  if (fs::is_directory(path))
    return Pyramid::open(path).level_raster(0);
  if (!fs::exists(path))
    throw Error("cannot read image: " + path.string() + " does not exist");
  cv::Mat mat;
  try {
    mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception &) {
    mat.release();
  }
  if (mat.empty())
    throw Error("corrupt image: " + path.string());
  return raster_from_mat(mat);
}

void save_png(const Raster &raster, const fs::path &path) {
  const auto bytes = encode_png(raster);
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw Error("cannot write " + path.string());
}

std::vector<std::uint8_t> encode_png(const Raster &raster,
                                     int compression_level) {
  if (raster.empty())
    throw Error("cannot encode an empty raster");
  std::vector<std::uint8_t> bytes;
  cv::imencode(".png", mat_from_raster(raster), bytes,
               {cv::IMWRITE_PNG_COMPRESSION, compression_level});
  return bytes;
}

Raster decode_png(std::span<const std::uint8_t> bytes) {
  const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8U,
                       const_cast<std::uint8_t *>(bytes.data()));
  cv::Mat mat;
  try {
    mat = cv::imdecode(buffer, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception &) {
    mat.release();
  }
  if (mat.empty())
    throw Error("corrupt image");
  return raster_from_mat(mat);
}

} // namespace slidereg
