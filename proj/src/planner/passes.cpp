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
#include <algorithm>

#include "cqlflow/common/error.hpp"
#include "cqlflow/planner/plan.hpp"

namespace cqlflow::planner {

namespace {

void redirect(LogicalPlan& plan, NodeId from, NodeId to) {
  for (auto& [id, node] : plan.nodes) {
    std::replace(node.inputs.begin(), node.inputs.end(), from, to);
  }
}

void append_conjuncts(std::vector<RowPredicate>& out, const RowPredicate& p) {
  if (p.kind == RowPredicate::Kind::kAll) {
    for (const auto& c : p.children) append_conjuncts(out, c);
  } else {
    out.push_back(p);
  }
}

// Walks down single-consumer row filters to a Scan that feeds only this chain.
std::optional<NodeId> push_target(const LogicalPlan& plan, NodeId filter,
                                  const std::map<NodeId, std::vector<NodeId>>& consumers) {
  NodeId cur = plan.at(filter).inputs.front();
  while (true) {
    if (consumers.at(cur).size() != 1) return std::nullopt;
    const auto& node = plan.at(cur);
    if (node.is<Scan>()) return cur;
    if (!(node.is<Filter>() || node.is<ValueSetSemiJoin>() || node.is<AgeFilter>())) return std::nullopt;
    cur = node.inputs.front();
  }
}

}  // namespace

LogicalPlan push_predicates(const LogicalPlan& plan) {
  LogicalPlan out = plan;
  bool changed = true;
  while (changed) {
    changed = false;
    auto consumers = out.consumers();
    for (const auto& [id, node] : out.nodes) {
      const auto* f = node.as<Filter>();
      if (!f || f->predicate.references_valueset()) continue;
      auto target = push_target(out, id, consumers);
      if (!target) continue;
      RowPredicate pred = f->predicate;
      NodeId input = node.inputs.front();
      append_conjuncts(out.at(*target).as<Scan>()->predicates, pred);
      redirect(out, id, input);
      out.nodes.erase(id);
      changed = true;
      break;
    }
  }
  return out;
}

LogicalPlan fuse_shared_scans(const LogicalPlan& plan) {
  LogicalPlan out = plan;
  std::map<std::pair<ResourceKind, std::vector<int>>, std::vector<NodeId>> groups;
  for (NodeId id : out.scans()) {
    const auto* s = out.at(id).as<Scan>();
    groups[{s->resource, s->projection}].push_back(id);
  }
  for (const auto& [key, members] : groups) {
    if (members.size() < 2) continue;
    NodeId fused = members.front();
    std::vector<RowPredicate> alternatives;
    bool unconditional = false;
    std::map<NodeId, RowPredicate> own;
    for (NodeId m : members) {
      const auto& preds = out.at(m).as<Scan>()->predicates;
      own[m] = RowPredicate::all(preds);
      if (preds.empty()) unconditional = true;
      if (std::find(alternatives.begin(), alternatives.end(), own[m]) == alternatives.end()) {
        alternatives.push_back(own[m]);
      }
    }
    auto consumers = out.consumers();
    for (NodeId m : members) {
      NodeId replacement = fused;
      // Re-filter only where the fused scan may emit rows this consumer rejects.
      if (!own[m].is_true() && alternatives.size() > 1) {
        replacement = out.add(PlanNode{Filter{own[m]}, {fused}});
      }
      for (NodeId c : consumers[m]) {
        auto& inputs = out.at(c).inputs;
        std::replace(inputs.begin(), inputs.end(), m, replacement);
      }
    }
    auto& scan = *out.at(fused).as<Scan>();
    scan.predicates.clear();
    if (!unconditional) append_conjuncts(scan.predicates, RowPredicate::any(alternatives));
    for (NodeId m : members) {
      if (m != fused) out.nodes.erase(m);
    }
  }
  return out;
}

LogicalPlan bind_valuesets(const LogicalPlan& plan, const catalog::ValueSetRegistry& registry,
                           bool hypercache) {
  LogicalPlan out = plan;
  for (const auto& id : referenced_valuesets(plan)) {
    if (!registry.contains(id)) throw Error(ErrorCode::kUnknownValueSet, id);
  }
  for (auto& [id, node] : out.nodes) {
    const auto* f = node.as<Filter>();
    if (!f || f->predicate.kind != RowPredicate::Kind::kInValueSet) continue;
    ValueSetSemiJoin join{f->predicate.text, f->predicate.field,
                          hypercache ? JoinMode::kBroadcast : JoinMode::kHashJoinBaseline};
    node.op = std::move(join);
  }
  return out;
}

LogicalPlan optimize(const LogicalPlan& plan, const catalog::ValueSetRegistry& registry,
                     bool hypercache) {
  LogicalPlan out = bind_valuesets(fuse_shared_scans(push_predicates(plan)), registry, hypercache);
  validate(out);
  return out;
}

}  // namespace cqlflow::planner
