// Copyright 2026 The GST Toolkit Authors
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

#pragma once

// Minimal line-chart writer; output depends only on the data, so charts
// diff cleanly between runs.

#include <string>
#include <vector>

namespace gst {

struct Series {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  // Emitted as an XML comment at the top of the document.
  std::string comment;
};

std::string svg_line_chart(const std::vector<Series>& series, const ChartOptions& opts);

}  // namespace gst
