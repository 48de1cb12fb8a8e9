// src/plot.cc
//
// Copyright 2026 The sastnet authors
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

#include "sastnet/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace sastnet {

namespace {

// Dark blue -> magenta -> orange -> near-white ramp, piecewise linear.
void ramp(float t, unsigned char* px) {
  static const float stops[4][3] = {{13.f, 8.f, 66.f},
                                    {156.f, 23.f, 158.f},
                                    {245.f, 125.f, 21.f},
                                    {252.f, 247.f, 190.f}};
  t = std::clamp(t, 0.0f, 1.0f) * 3.0f;
  const int lo = std::min(2, static_cast<int>(t));
  const float f = t - static_cast<float>(lo);
  for (int c = 0; c < 3; ++c) {
    const float v = stops[lo][c] + f * (stops[lo + 1][c] - stops[lo][c]);
    px[c] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.f, 255.f)));
  }
}

void blit_heatmap(Image& img, const Matf& values, float lo, float hi,
                  int cell_px, int x0, int y0) {
  const float span = hi > lo ? hi - lo : 1.0f;
  for (Index r = 0; r < values.rows(); ++r)
    for (Index c = 0; c < values.cols(); ++c) {
      unsigned char px[3];
      ramp((values(r, c) - lo) / span, px);
      for (int dy = 0; dy < cell_px; ++dy) {
        const int y = y0 + static_cast<int>(r) * cell_px + dy;
        const int x = x0 + static_cast<int>(c) * cell_px;
        auto* row = img.rgb.data() +
                    3 * (static_cast<std::size_t>(y) * img.width + x);
        for (int dx = 0; dx < cell_px; ++dx)
          for (int ch = 0; ch < 3; ++ch) row[3 * dx + ch] = px[ch];
      }
    }
}

}  // namespace

void write_ppm(const std::string& path, const Image& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.rgb.size() !=
          3u * static_cast<std::size_t>(image.width) *
              static_cast<std::size_t>(image.height))
    throw ContractError("write_ppm: malformed image buffer");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write image: " + path);
  os << "P6\n" << image.width << " " << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.rgb.data()),
           static_cast<std::streamsize>(image.rgb.size()));
  if (!os) throw IoError("failed writing image: " + path);
}

Image heatmap_image(const Matf& values, int cell_px) {
  if (values.size() == 0) throw ContractError("heatmap: empty matrix");
  if (cell_px <= 0) throw ContractError("heatmap: cell size must be positive");
  if (!values.allFinite()) throw ContractError("heatmap: non-finite entries");
  Image img;
  img.width = static_cast<int>(values.cols()) * cell_px;
  img.height = static_cast<int>(values.rows()) * cell_px;
  img.rgb.assign(3u * static_cast<std::size_t>(img.width) *
                     static_cast<std::size_t>(img.height),
                 0);
  blit_heatmap(img, values, values.minCoeff(), values.maxCoeff(), cell_px, 0, 0);
  return img;
}

void plot_confusion(const EvalReport& report, const std::string& path) {
  const Index n = report.confusion.rows();
  if (n == 0) throw ContractError("plot_confusion: empty confusion matrix");
  Matf norm(n, n);
  for (Index r = 0; r < n; ++r) {
    const long long total = report.confusion.row(r).sum();
    for (Index c = 0; c < n; ++c)
      norm(r, c) = total > 0 ? static_cast<float>(report.confusion(r, c)) /
                                   static_cast<float>(total)
                             : 0.0f;
  }
  write_ppm(path, heatmap_image(norm, 48));
}

void plot_attention(const AttentionMap& map, const std::string& path) {
  if (map.heads.empty()) throw ContractError("plot_attention: no heads");
  const Index rows = map.heads[0].rows();
  const Index cols = map.heads[0].cols();
  for (const Matf& h : map.heads)
    if (h.rows() != rows || h.cols() != cols)
      throw ContractError("plot_attention: heads disagree on shape");
  const int cell = 8;
  const int gutter = cell;
  const auto n_heads = static_cast<int>(map.heads.size());
  Image img;
  img.width = n_heads * static_cast<int>(cols) * cell +
              (n_heads - 1) * gutter;
  img.height = static_cast<int>(rows) * cell;
  img.rgb.assign(3u * static_cast<std::size_t>(img.width) *
                     static_cast<std::size_t>(img.height),
                 255);
  for (int h = 0; h < n_heads; ++h) {
    const Matf& m = map.heads[static_cast<std::size_t>(h)];
    if (!m.allFinite()) throw ContractError("plot_attention: non-finite map");
    blit_heatmap(img, m, m.minCoeff(), m.maxCoeff(), cell,
                 h * (static_cast<int>(cols) * cell + gutter), 0);
  }
  write_ppm(path, img);
}

}  // namespace sastnet
