/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cqlflow/datagen/datagen.hpp"
#include "cqlflow/engine/engine.hpp"
#include "cqlflow/pipeline/pipeline.hpp"
#include "cqlflow/storage/storage.hpp"

namespace cqlflow::testing {

namespace fs = std::filesystem;

// Fresh directory under the build tree, removed when the process exits.
fs::path scratch_dir(const std::string& name);

// The bundled measure compiled once per process.
const pipeline::CompiledMeasure& bcs();

struct DatasetKey {
  int64_t patients = 1000;
  storage::Format format = storage::Format::kColumnar;
  uint64_t seed = 42;
  double r = 0.2;
  uint32_t partitions = 0;
};

struct Dataset {
  fs::path dir;
  datagen::TruthManifest manifest;
  storage::DatasetHandle handle;
};

// Generated on first use and cached for the rest of the process.
const Dataset& dataset(const DatasetKey& key);

// Manifest truth in report form: only patients with a flag, partition order.
engine::MeasureReport manifest_report(const datagen::TruthManifest& manifest);

// Flags sorted by patient id, for order-free comparison.
std::vector<engine::PatientFlags> sorted_flags(const engine::MeasureReport& report);

std::string golden_path(const std::string& name);
std::string cli_path();

}  // namespace cqlflow::testing
