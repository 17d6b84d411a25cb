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
#include "support/support.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <tuple>
#include <unistd.h>

namespace cqlflow::testing {

namespace {

struct Scratch {
  std::vector<fs::path> dirs;
  ~Scratch() {
    std::error_code ec;
    for (const auto& d : dirs) fs::remove_all(d, ec);
  }
};

Scratch& scratch() {
  static Scratch s;
  return s;
}

}  // namespace

fs::path scratch_dir(const std::string& name) {
  static int counter = 0;
  fs::path dir = fs::path(CQLFLOW_SCRATCH_DIR) /
                 (name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  scratch().dirs.push_back(dir);
  return dir;
}

const pipeline::CompiledMeasure& bcs() {
  static const pipeline::CompiledMeasure m = pipeline::compile_measure(pipeline::MeasureInputs::bundled());
  return m;
}

const Dataset& dataset(const DatasetKey& key) {
  static std::map<std::tuple<int64_t, int, uint64_t, double, uint32_t>, Dataset> cache;
  auto k = std::make_tuple(key.patients, static_cast<int>(key.format), key.seed, key.r, key.partitions);
  auto it = cache.find(k);
  if (it != cache.end()) return it->second;
  datagen::WorkloadSpec spec;
  spec.n_patients = key.patients;
  spec.format = key.format;
  spec.seed = key.seed;
  spec.r = key.r;
  spec.partitions = key.partitions;
  auto dir = scratch_dir("data");
  auto manifest = datagen::generate_workload(spec, bcs().registry, dir);
  auto handle = storage::DatasetHandle::open(dir);
  return cache.emplace(k, Dataset{dir, std::move(manifest), std::move(handle)}).first->second;
}

engine::MeasureReport manifest_report(const datagen::TruthManifest& manifest) {
  engine::MeasureReport r;
  r.denominator_count = manifest.denominator_count;
  r.numerator_count = manifest.numerator_count;
  r.exclusion_count = manifest.exclusion_count;
  std::vector<std::vector<engine::PatientFlags>> parts(manifest.partitions);
  for (const auto& t : manifest.records) {
    if (!t.any()) continue;
    parts[storage::partition_of(t.patient_id, manifest.partitions)].push_back(
        engine::PatientFlags{t.patient_id, t.in_denominator, t.in_numerator, t.excluded});
  }
  for (const auto& p : parts) r.flags.insert(r.flags.end(), p.begin(), p.end());
  return r;
}

std::vector<engine::PatientFlags> sorted_flags(const engine::MeasureReport& report) {
  auto flags = report.flags;
  std::sort(flags.begin(), flags.end(),
            [](const engine::PatientFlags& a, const engine::PatientFlags& b) { return a.patient_id < b.patient_id; });
  return flags;
}

std::string golden_path(const std::string& name) { return std::string(CQLFLOW_GOLDEN_DIR) + "/" + name; }

std::string cli_path() { return CQLFLOW_CLI; }

}  // namespace cqlflow::testing
