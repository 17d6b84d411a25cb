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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "cqlflow/catalog/catalog.hpp"
#include "cqlflow/common/date.hpp"
#include "cqlflow/model/resource.hpp"
#include "cqlflow/storage/storage.hpp"

namespace cqlflow::datagen {

// Mean rows per patient for each non-Patient table.
struct TableMeans {
  double condition = 2.0;
  double encounter = 3.0;
  double medication = 5.0;
  double procedure = 1.0;
  double observation = 5.0;
  double coverage = 5.5;

  double mu_denominator() const { return coverage; }
  double mu_numerator() const { return observation; }
  double mu_exclusion() const { return encounter + procedure + condition + medication; }
  // Includes the single Patient row.
  double total_per_patient() const { return 1.0 + mu_denominator() + mu_numerator() + mu_exclusion(); }
  double mean_for(ResourceKind kind) const;
};

struct GenerationPlan {
  double r = 0.2;
  double p_patient_valid = 0;
  double p_coverage_valid = 0;
  double p_numerator_flag = 0;
  double p_exclusion_flag = 0;
  TableMeans means;
  double total_per_patient = 0;  // T_p
  double valid_per_patient = 0;  // V_Tp = r * T_p
};

// Throws Error(kInvalidArgument) unless 0 < r < 1.
GenerationPlan derive_generation_plan(double r, const TableMeans& means = {});

struct TruthRecord {
  int64_t patient_id = 0;
  bool in_denominator = false;
  bool in_numerator = false;
  bool excluded = false;

  bool any() const { return in_denominator || in_numerator || excluded; }
  friend bool operator==(const TruthRecord&, const TruthRecord&) = default;
};

struct PatientRows {
  std::array<std::vector<Record>, kAllResources.size()> tables;  // indexed by ResourceKind
  TruthRecord truth;

  std::vector<Record>& rows(ResourceKind kind) { return tables[static_cast<size_t>(kind)]; }
  const std::vector<Record>& rows(ResourceKind kind) const { return tables[static_cast<size_t>(kind)]; }
};

// Counter-based stream: output i of stream (seed, key) depends only on those
// three values, so any patient can be generated without generating others.
class StreamRng {
 public:
  using result_type = uint64_t;
  StreamRng(uint64_t seed, uint64_t key);
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

// Default measurement period of the bundled BCS measure.
DateInterval default_window();

// Synthesizes BCS patients against a valueset registry that must contain the
// five BCS valuesets (Error(kMissingValueSet) otherwise).
class Generator {
 public:
  Generator(uint64_t seed, GenerationPlan plan, const catalog::ValueSetRegistry& valuesets,
            DateInterval window = default_window(), int max_gap_days = 45);

  PatientRows generate_patient(int64_t patient_id) const;

  const GenerationPlan& plan() const { return plan_; }
  const DateInterval& window() const { return window_; }
  int max_gap_days() const { return max_gap_days_; }

 private:
  struct Pools;
  class PatientBuilder;

  uint64_t seed_;
  GenerationPlan plan_;
  DateInterval window_;
  int max_gap_days_;
  std::shared_ptr<const Pools> pools_;
};

struct WorkloadSpec {
  int64_t n_patients = 0;
  double r = 0.2;
  uint64_t seed = 42;
  storage::Format format = storage::Format::kColumnar;
  uint32_t partitions = 0;  // 0: chosen from n_patients
  int max_gap_days = 45;
  DateInterval window = default_window();
  TableMeans means;
};

// Default partition count: at most 16384 patients per partition, at least 4.
uint32_t default_partitions(int64_t n_patients);

struct TruthManifest {
  uint64_t seed = 0;
  double r = 0;
  int64_t n_patients = 0;
  int max_gap_days = 45;
  storage::Format format = storage::Format::kColumnar;
  uint32_t partitions = 0;
  DateInterval window;
  int64_t denominator_count = 0;
  int64_t numerator_count = 0;
  int64_t exclusion_count = 0;
  std::map<ResourceKind, uint64_t> table_rows;
  std::vector<TruthRecord> records;  // one per patient, by id

  std::string to_json() const;
  static TruthManifest from_json(std::string_view text);
};

// Writes the seven tables and manifest.json into `out_dir`.
TruthManifest generate_workload(const WorkloadSpec& spec, const catalog::ValueSetRegistry& valuesets,
                                const std::filesystem::path& out_dir);

struct FlagStats {
  double p = 0;
  double mean = 0;
  double sigma = 0;
  double lo = 0;  // mean - 4 sigma
  double hi = 0;  // mean + 4 sigma
};

struct MatchStats {
  FlagStats denominator;
  FlagStats numerator;
  FlagStats exclusion;
};

MatchStats expected_match_stats(const GenerationPlan& plan, int64_t n_patients);

}  // namespace cqlflow::datagen
