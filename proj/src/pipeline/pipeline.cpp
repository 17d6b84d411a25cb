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
#include "cqlflow/pipeline/pipeline.hpp"

#include "cqlflow/common/error.hpp"
#include "cqlflow/common/resources.hpp"
#include "cqlflow/frontend/frontend.hpp"

namespace cqlflow::pipeline {

MeasureInputs MeasureInputs::bundled() {
  return {std::string(bundled_resource("bcs.cql")), std::string(bundled_resource("bcs-params.json")),
          std::string(bundled_resource("bcs-valuesets.json"))};
}

CompiledMeasure compile_measure(const MeasureInputs& inputs, int max_gap_days) {
  CompiledMeasure m;
  m.library = frontend::parse_library(inputs.cql);
  auto diagnostics = frontend::validate_subset(m.library);
  if (!diagnostics.empty()) {
    std::string msg;
    for (const auto& d : diagnostics) msg += (msg.empty() ? "" : "\n") + frontend::format_diagnostic("measure", d);
    throw Error(ErrorCode::kUnsupported, diagnostics.front().construct, msg);
  }
  m.registry = catalog::load_valuesets(inputs.valuesets_json);
  auto params = frontend::parse_params_json(inputs.params_json);
  m.ast = frontend::resolve(m.library, params, catalog::valueset_ids(m.registry));
  m.max_gap_days = max_gap_days;
  m.plan = planner::lower(m.ast, planner::LowerOptions{max_gap_days});
  return m;
}

planner::LogicalPlan optimized_plan(const CompiledMeasure& measure, bool hypercache) {
  return planner::optimize(measure.plan, measure.registry, hypercache);
}

engine::RunResult run_plan(const planner::LogicalPlan& plan, const catalog::ValueSetRegistry& registry,
                           const engine::ClusterConfig& cfg, const storage::DatasetHandle& data,
                           const engine::ExecuteOptions& options) {
  auto bundle = catalog::broadcast_handles(registry, plan);
  auto job = engine::build_job(plan, planner::index_schema(plan), cfg, data.partitions, std::move(bundle));
  return engine::execute(job, data, options);
}

}  // namespace cqlflow::pipeline
