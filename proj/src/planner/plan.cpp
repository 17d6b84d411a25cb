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
#include <functional>

#include "cqlflow/common/error.hpp"
#include "cqlflow/planner/plan.hpp"

namespace cqlflow::planner {

namespace {

[[noreturn]] void bad_plan(NodeId id, const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, "#" + std::to_string(id),
              "invalid plan at #" + std::to_string(id) + ": " + what);
}

}  // namespace

std::string_view node_kind_name(const PlanNode& node) {
  static constexpr std::string_view kNames[] = {
      "Scan",          "ValueSetSemiJoin",      "Filter",        "AgeFilter",
      "CoverageGapAgg", "ExistsPerPatient",     "UnionDistinctPatients",
      "AndPerPatient", "OrPerPatient",          "Report"};
  return kNames[node.op.index()];
}

NodeId LogicalPlan::add(PlanNode node) {
  NodeId id = next_id++;
  nodes.emplace(id, std::move(node));
  return id;
}

const PlanNode& LogicalPlan::at(NodeId id) const {
  auto it = nodes.find(id);
  if (it == nodes.end()) bad_plan(id, "no such node");
  return it->second;
}

PlanNode& LogicalPlan::at(NodeId id) {
  auto it = nodes.find(id);
  if (it == nodes.end()) bad_plan(id, "no such node");
  return it->second;
}

std::map<NodeId, std::vector<NodeId>> LogicalPlan::consumers() const {
  std::map<NodeId, std::vector<NodeId>> out;
  for (const auto& [id, node] : nodes) {
    out[id];
    for (NodeId in : node.inputs) out[in].push_back(id);
  }
  return out;
}

std::vector<NodeId> LogicalPlan::topological_order() const {
  std::vector<NodeId> order;
  std::map<NodeId, int> state;  // 1 visiting, 2 done
  std::function<void(NodeId)> visit = [&](NodeId id) {
    int& s = state[id];
    if (s == 2) return;
    if (s == 1) bad_plan(id, "cycle");
    s = 1;
    for (NodeId in : at(id).inputs) visit(in);
    state[id] = 2;
    order.push_back(id);
  };
  for (const auto& [id, node] : nodes) visit(id);
  return order;
}

NodeId LogicalPlan::source_scan(NodeId id) const {
  for (int guard = 0; guard <= static_cast<int>(nodes.size()); ++guard) {
    const auto& node = at(id);
    if (node.is<Scan>()) return id;
    if (!node.produces_rows() || node.inputs.size() != 1) bad_plan(id, "not a row stream");
    id = node.inputs.front();
  }
  bad_plan(id, "cycle");
}

std::vector<NodeId> LogicalPlan::scans() const {
  std::vector<NodeId> out;
  for (const auto& [id, node] : nodes) {
    if (node.is<Scan>()) out.push_back(id);
  }
  return out;
}

int LogicalPlan::count_scans(ResourceKind kind) const {
  int n = 0;
  for (const auto& [id, node] : nodes) {
    if (const auto* s = node.as<Scan>(); s && s->resource == kind) ++n;
  }
  return n;
}

std::set<std::string> referenced_valuesets(const LogicalPlan& plan) {
  std::set<std::string> out;
  std::function<void(const RowPredicate&)> collect = [&](const RowPredicate& p) {
    if (p.kind == RowPredicate::Kind::kInValueSet) out.insert(p.text);
    for (const auto& c : p.children) collect(c);
  };
  for (const auto& [id, node] : plan.nodes) {
    if (const auto* j = node.as<ValueSetSemiJoin>()) out.insert(j->valueset);
    if (const auto* f = node.as<Filter>()) collect(f->predicate);
    if (const auto* s = node.as<Scan>()) {
      for (const auto& p : s->predicates) collect(p);
    }
  }
  return out;
}

LogicalPlan with_join_mode(const LogicalPlan& plan, JoinMode mode) {
  LogicalPlan out = plan;
  for (auto& [id, node] : out.nodes) {
    if (auto* j = node.as<ValueSetSemiJoin>()) j->mode = mode;
  }
  return out;
}

void validate(const LogicalPlan& plan) {
  if (!plan.nodes.contains(plan.report) || !plan.at(plan.report).is<Report>()) {
    bad_plan(plan.report, "missing report node");
  }
  plan.topological_order();
  auto consumers = plan.consumers();

  std::function<void(NodeId, const RowPredicate&, ResourceKind)> check_predicate =
      [&](NodeId id, const RowPredicate& p, ResourceKind kind) {
        const auto& schema = table_schema(kind);
        if (p.kind == RowPredicate::Kind::kAll || p.kind == RowPredicate::Kind::kAny) {
          for (const auto& c : p.children) check_predicate(id, c, kind);
          return;
        }
        if (p.field < 0 || p.field >= schema.field_count()) bad_plan(id, "field out of range");
        auto type = schema.field(p.field).type;
        bool ok = false;
        switch (p.kind) {
          case RowPredicate::Kind::kEquals: ok = type == FieldType::kString; break;
          case RowPredicate::Kind::kRange:
            ok = type == FieldType::kInteger || type == FieldType::kDate;
            break;
          case RowPredicate::Kind::kInValueSet: ok = type == FieldType::kCode; break;
          default: break;
        }
        if (!ok) bad_plan(id, "predicate does not fit field " + std::string(schema.field(p.field).name));
      };

  for (const auto& [id, node] : plan.nodes) {
    for (NodeId in : node.inputs) {
      if (!plan.nodes.contains(in)) bad_plan(id, "dangling input #" + std::to_string(in));
    }
    auto rows_in = [&](size_t min, size_t max) {
      if (node.inputs.size() < min || node.inputs.size() > max) bad_plan(id, "wrong input arity");
      for (NodeId in : node.inputs) {
        if (!plan.at(in).produces_rows()) bad_plan(id, "expects a row stream input");
      }
    };
    auto sets_in = [&](size_t min, size_t max) {
      if (node.inputs.size() < min || node.inputs.size() > max) bad_plan(id, "wrong input arity");
      for (NodeId in : node.inputs) {
        if (plan.at(in).produces_rows()) bad_plan(id, "expects a patient set input");
      }
    };
    std::visit(
        [&](const auto& op) {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, Scan>) {
            if (!node.inputs.empty()) bad_plan(id, "scan has inputs");
            for (const auto& p : op.predicates) {
              if (p.references_valueset()) bad_plan(id, "valueset predicate inside scan");
              check_predicate(id, p, op.resource);
            }
            if (!std::is_sorted(op.projection.begin(), op.projection.end())) {
              bad_plan(id, "projection not ordered");
            }
          } else if constexpr (std::is_same_v<T, ValueSetSemiJoin>) {
            rows_in(1, 1);
            auto kind = plan.source_resource(id);
            const auto& schema = table_schema(kind);
            if (op.code_field < 0 || op.code_field >= schema.field_count() ||
                schema.field(op.code_field).type != FieldType::kCode) {
              bad_plan(id, "semi-join over a resource without codes");
            }
          } else if constexpr (std::is_same_v<T, Filter>) {
            rows_in(1, 1);
            check_predicate(id, op.predicate, plan.source_resource(id));
          } else if constexpr (std::is_same_v<T, AgeFilter>) {
            rows_in(1, 1);
            if (plan.source_resource(id) != ResourceKind::kPatient) bad_plan(id, "age filter needs Patient rows");
          } else if constexpr (std::is_same_v<T, CoverageGapAgg>) {
            rows_in(1, 1);
            if (plan.source_resource(node.inputs[0]) != ResourceKind::kCoverage) {
              bad_plan(id, "coverage aggregate needs Coverage rows");
            }
          } else if constexpr (std::is_same_v<T, ExistsPerPatient>) {
            rows_in(1, 1);
          } else if constexpr (std::is_same_v<T, UnionDistinctPatients>) {
            rows_in(1, SIZE_MAX);
          } else if constexpr (std::is_same_v<T, AndPerPatient> || std::is_same_v<T, OrPerPatient>) {
            sets_in(1, SIZE_MAX);
          } else if constexpr (std::is_same_v<T, Report>) {
            sets_in(3, 3);
            if (id != plan.report) bad_plan(id, "second report node");
            if (!consumers[id].empty()) bad_plan(id, "report has consumers");
          }
        },
        node.op);
  }
}

IndexSchema index_schema(const LogicalPlan& plan) {
  std::map<ResourceKind, std::set<int>> fields;
  auto add = [&](ResourceKind kind, int f) { fields[kind].insert(f); };
  for (const auto& [id, node] : plan.nodes) {
    std::visit(
        [&](const auto& op) {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, Scan>) {
            add(op.resource, kPatientIdField);
            for (const auto& p : op.predicates) p.collect_fields(fields[op.resource]);
          } else if constexpr (std::is_same_v<T, ValueSetSemiJoin>) {
            add(plan.source_resource(id), op.code_field);
          } else if constexpr (std::is_same_v<T, Filter>) {
            op.predicate.collect_fields(fields[plan.source_resource(id)]);
          } else if constexpr (std::is_same_v<T, AgeFilter>) {
            add(plan.source_resource(id), op.birth_field);
          } else if constexpr (std::is_same_v<T, CoverageGapAgg>) {
            auto kind = plan.source_resource(node.inputs[0]);
            add(kind, op.start_field);
            add(kind, op.end_field);
          }
        },
        node.op);
  }
  IndexSchema out;
  for (const auto& [kind, set] : fields) {
    const auto& schema = table_schema(kind);
    auto& list = out[kind];
    for (int f : set) {
      const auto& def = schema.field(f);
      std::string semantic = is_interval_field(kind, f) ? "interval" : std::string(field_type_name(def.type));
      list.push_back(IndexField{std::string(def.name), semantic, f});
    }
  }
  return out;
}

std::string index_schema_to_text(const IndexSchema& schema) {
  std::string out;
  for (const auto& [kind, fields] : schema) {
    out += resource_name(kind);
    out += ":";
    for (const auto& f : fields) out += " " + f.name + ":" + f.semantic;
    out += "\n";
  }
  return out;
}

}  // namespace cqlflow::planner
