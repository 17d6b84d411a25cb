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

#include <string>

#include "cqlflow/catalog/catalog.hpp"
#include "cqlflow/engine/engine.hpp"
#include "cqlflow/frontend/ast.hpp"
#include "cqlflow/planner/plan.hpp"
#include "cqlflow/storage/storage.hpp"

namespace cqlflow::pipeline {

// Measure source, parameter bindings and valueset document, as text.
struct MeasureInputs {
  std::string cql;
  std::string params_json;
  std::string valuesets_json;

  // The breast cancer screening measure shipped with the library.
  static MeasureInputs bundled();
};

struct CompiledMeasure {
  frontend::SourceLibrary library;
  frontend::MeasureAst ast;
  catalog::ValueSetRegistry registry;
  int max_gap_days = 45;
  planner::LogicalPlan plan;  // as lowered, before any pass
};

// Parse, check the subset, bind parameters and lower. Subset violations
// throw Error(kUnsupported) listing every diagnostic.
CompiledMeasure compile_measure(const MeasureInputs& inputs, int max_gap_days = 45);

planner::LogicalPlan optimized_plan(const CompiledMeasure& measure, bool hypercache);

// Builds the broadcast bundle and job for `plan`, then executes it.
engine::RunResult run_plan(const planner::LogicalPlan& plan, const catalog::ValueSetRegistry& registry,
                           const engine::ClusterConfig& cfg, const storage::DatasetHandle& data,
                           const engine::ExecuteOptions& options = {});

}  // namespace cqlflow::pipeline
