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
#include <optional>
#include <vector>

#include "cqlflow/catalog/catalog.hpp"
#include "cqlflow/engine/report.hpp"
#include "cqlflow/frontend/ast.hpp"
#include "cqlflow/model/resource.hpp"
#include "cqlflow/storage/storage.hpp"

namespace cqlflow::oracle {

// Every row of one patient, tables indexed like kAllResources.
struct PatientBundle {
  int64_t patient_id = 0;
  std::array<std::vector<Record>, 7> tables;

  std::vector<Record>& rows(ResourceKind kind) { return tables[static_cast<size_t>(kind)]; }
  const std::vector<Record>& rows(ResourceKind kind) const { return tables[static_cast<size_t>(kind)]; }
};

// Interprets the three defines against one patient's rows.
engine::PatientFlags evaluate_patient(const PatientBundle& bundle, const frontend::MeasureAst& ast,
                                      const catalog::ValueSetRegistry& registry, int max_gap_days);

// Partition by partition, patients ascending within each, same flag layout
// as the engine report.
engine::MeasureReport evaluate_dataset(const storage::DatasetHandle& data, const frontend::MeasureAst& ast,
                                       const catalog::ValueSetRegistry& registry, int max_gap_days);

}  // namespace cqlflow::oracle
