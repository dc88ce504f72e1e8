// Copyright 2026 The Doorlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DOORLAB_IMAGE_HPP_
#define DOORLAB_IMAGE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "doorlab/errors.hpp"

namespace doorlab {

// Dense row-major image, channels interleaved.
template <typename T>
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> data;

  Image() = default;
  Image(int h, int w, int c, T fill = T(0))
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  T& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  const T& at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  bool operator==(const Image& o) const {
    return same_shape(o) && data == o.data;
  }
};

using RgbImage = Image<std::uint8_t>;
using DepthImage = Image<float>;

inline std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

// Bilinear sample with clamped borders; y/x in pixel coordinates.
template <typename T>
double bilinear(const Image<T>& img, double y, double x, int c) {
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  int y0 = static_cast<int>(y);
  int x0 = static_cast<int>(x);
  int y1 = std::min(y0 + 1, img.height - 1);
  int x1 = std::min(x0 + 1, img.width - 1);
  double fy = y - y0;
  double fx = x - x0;
  double v00 = img.at(y0, x0, c), v01 = img.at(y0, x1, c);
  double v10 = img.at(y1, x0, c), v11 = img.at(y1, x1, c);
  return (1 - fy) * ((1 - fx) * v00 + fx * v01) +
         fy * ((1 - fx) * v10 + fx * v11);
}

// Fraction of pixel positions at which two images differ in any channel.
template <typename T>
double pixel_diff_fraction(const Image<T>& a, const Image<T>& b) {
  if (!a.same_shape(b)) {
    throw ContractViolation("pixel_diff_fraction: shape mismatch");
  }
  long long diff = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      for (int c = 0; c < a.channels; ++c) {
        if (a.at(y, x, c) != b.at(y, x, c)) {
          ++diff;
          break;
        }
      }
    }
  }
  return static_cast<double>(diff) /
         (static_cast<double>(a.height) * a.width);
}

// Lossless binary PPM (P6). Used for debug dumps and report image grids.
inline void write_ppm(const RgbImage& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("write_ppm: cannot open " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
}

// Grayscale preview of a depth image, scaled by max_value.
inline RgbImage depth_to_gray(const DepthImage& d, double max_value) {
  RgbImage out(d.height, d.width, 3);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      std::uint8_t g = clamp_u8(255.0 * d.at(y, x) / max_value);
      out.at(y, x, 0) = g;
      out.at(y, x, 1) = g;
      out.at(y, x, 2) = g;
    }
  }
  return out;
}

}  // namespace doorlab

#endif  // DOORLAB_IMAGE_HPP_
