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
#include <string>
#include <string_view>
#include <vector>

namespace cqlflow::engine {

struct PatientFlags {
  int64_t patient_id = 0;
  bool denominator = false;
  bool numerator = false;
  bool exclusion = false;

  friend bool operator==(const PatientFlags&, const PatientFlags&) = default;
};

// Atomic per-define counts. `flags` lists only patients with at least one
// flag set, grouped by partition and ascending by id within a partition.
struct MeasureReport {
  int64_t denominator_count = 0;
  int64_t numerator_count = 0;
  int64_t exclusion_count = 0;
  std::vector<PatientFlags> flags;

  friend bool operator==(const MeasureReport&, const MeasureReport&) = default;

  std::string to_json() const;
  // Throws Error(kMalformedDocument).
  static MeasureReport from_json(std::string_view text);
};

}  // namespace cqlflow::engine
