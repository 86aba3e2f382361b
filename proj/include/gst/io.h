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

// File formats: JSON documents for families, affinity matrices,
// partitions, traces and reports; CSV for affinity matrices and traces.
// CSV floats use 17 significant digits so values round-trip exactly.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "gst/affinity.h"
#include "gst/grouping.h"
#include "gst/heterogeneity.h"
#include "gst/scheduler.h"
#include "gst/tasks.h"

namespace gst {

using nlohmann::json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kToolVersion = "0.3.0";

// Provenance stamped into every output file.
struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  json to_json() const;
  // First line of a CSV file.
  std::string csv_comment() const;
};

std::string format_double(double v);

json to_json(const HeterogeneityRecipe& r);
json to_json(const QuadraticFamily& f, const Provenance& prov);
QuadraticFamily family_from_json(const json& j);

const char* to_string(AffinityKind k);
const char* to_string(OracleKind k);
json to_json(const AffinityMatrix& a, const Provenance& prov);
AffinityMatrix affinity_from_json(const json& j);
std::string affinity_csv(const AffinityMatrix& a, const Provenance& prov);

json to_json(const GroupPartition& p);
GroupPartition partition_from_json(const json& j);

json to_json(const HeterogeneityConstants& c);
json to_json(const HeterogeneityEstimate& e);
json to_json(const DecompositionReport& r);
json to_json(const GroupBoundReport& r);
json to_json(const VarianceCheck& v);

std::string trace_csv(const RunTrace& t, const Provenance& prov);
json to_json(const RunTrace& t, const Provenance& prov);
RunTrace trace_from_json(const json& j);

json to_json(const Ranking& r);
json to_json(const MultiSeedRanking& r);

// Whole-file helpers; writes use LF line endings and create parent
// directories.
std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& content);
json read_json(const std::filesystem::path& p);
void write_json(const std::filesystem::path& p, const json& j);

}  // namespace gst
