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
#include <set>

#include "cqlflow/planner/plan.hpp"

namespace cqlflow::planner {

namespace {

std::string field_list(ResourceKind kind, const std::vector<int>& fields) {
  std::string out;
  for (int f : fields) {
    if (!out.empty()) out += ", ";
    out += table_schema(kind).field(f).name;
  }
  return out;
}

std::string describe_node(const LogicalPlan& plan, NodeId id) {
  const auto& node = plan.at(id);
  return std::visit(
      [&](const auto& op) -> std::string {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, Scan>) {
          std::string s = "Scan(" + std::string(resource_name(op.resource));
          if (!op.predicates.empty()) {
            s += "; where=[";
            for (size_t i = 0; i < op.predicates.size(); ++i) {
              if (i) s += "; ";
              s += predicate_to_text(op.predicates[i], op.resource);
            }
            s += "]";
          }
          return s + "; project=[" + field_list(op.resource, op.projection) + "])";
        } else if constexpr (std::is_same_v<T, ValueSetSemiJoin>) {
          auto kind = plan.source_resource(id);
          return "ValueSetSemiJoin(" + std::string(table_schema(kind).field(op.code_field).name) +
                 " in \"" + op.valueset + "\"; " +
                 (op.mode == JoinMode::kBroadcast ? "broadcast" : "hash-join-baseline") + ")";
        } else if constexpr (std::is_same_v<T, Filter>) {
          return "Filter(" + predicate_to_text(op.predicate, plan.source_resource(id)) + ")";
        } else if constexpr (std::is_same_v<T, AgeFilter>) {
          return "AgeFilter(" + std::string(table_schema(ResourceKind::kPatient).field(op.birth_field).name) +
                 " age in [" + std::to_string(op.lo) + ", " + std::to_string(op.hi) + "] at " +
                 op.as_of.to_string() + ")";
        } else if constexpr (std::is_same_v<T, CoverageGapAgg>) {
          return "CoverageGapAgg(window=[" + op.window.start.to_string() + ", " +
                 op.window.end.to_string() + "]; max_gap_days=" + std::to_string(op.max_gap_days) + ")";
        } else {
          return std::string(node_kind_name(node));
        }
      },
      node.op);
}

void print(const LogicalPlan& plan, NodeId id, int depth, std::set<NodeId>& seen, std::string& out) {
  out.append(static_cast<size_t>(depth) * 2, ' ');
  if (!seen.insert(id).second) {
    out += "^#" + std::to_string(id) + "\n";
    return;
  }
  out += describe_node(plan, id) + " #" + std::to_string(id) + "\n";
  for (NodeId in : plan.at(id).inputs) print(plan, in, depth + 1, seen, out);
}

}  // namespace

std::string plan_to_text(const LogicalPlan& plan) {
  std::string out;
  std::set<NodeId> seen;
  print(plan, plan.report, 0, seen, out);
  return out;
}

}  // namespace cqlflow::planner
