// sastnet/plot.hpp
//
// Copyright 2026 The sastnet authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.
//
// Minimal plotting: heatmap images in binary PPM (P6), enough to render
// confusion matrices and attention maps without a graphics dependency.
// Images are presentation artifacts; the data they render is persisted
// separately, so image bytes carry no reproducibility contract.

#ifndef SASTNET_PLOT_HPP_
#define SASTNET_PLOT_HPP_

#include <string>
#include <vector>

#include "sastnet/evaluation.hpp"
#include "sastnet/fusion.hpp"

namespace sastnet {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> rgb;  // row-major, 3 bytes per pixel
};

void write_ppm(const std::string& path, const Image& image);

// Renders a matrix as a heatmap, `cell_px` pixels per entry, min..max of the
// data mapped over a dark-to-warm color ramp. NaN/inf entries are rejected.
Image heatmap_image(const Matf& values, int cell_px = 24);

// Row-normalized confusion heatmap from an evaluation report.
void plot_confusion(const EvalReport& report, const std::string& path);

// One heatmap per head, laid out side by side with a 1-cell gutter.
void plot_attention(const AttentionMap& map, const std::string& path);

}  // namespace sastnet

#endif  // SASTNET_PLOT_HPP_
