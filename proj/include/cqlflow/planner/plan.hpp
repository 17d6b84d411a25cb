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
#include <limits>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "cqlflow/catalog/catalog.hpp"
#include "cqlflow/common/date.hpp"
#include "cqlflow/frontend/ast.hpp"
#include "cqlflow/model/resource.hpp"

namespace cqlflow::planner {

using NodeId = int;

// Predicate over one row of a single table. Fields are schema indices.
struct RowPredicate {
  enum class Kind : uint8_t {
    kEquals,      // string field == text
    kRange,       // lo <= integer/date field <= hi
    kInValueSet,  // code field in valueset
    kAll,         // conjunction of children (empty: true)
    kAny,         // disjunction of children (empty: false)
  };

  static constexpr int64_t kMinBound = std::numeric_limits<int64_t>::min();
  static constexpr int64_t kMaxBound = std::numeric_limits<int64_t>::max();

  Kind kind = Kind::kAll;
  int field = -1;
  std::string text;  // kEquals value or kInValueSet id
  int64_t lo = kMinBound;
  int64_t hi = kMaxBound;
  std::vector<RowPredicate> children;

  static RowPredicate equals(int field, std::string value);
  static RowPredicate range(int field, int64_t lo, int64_t hi);
  static RowPredicate in_valueset(int field, std::string valueset);
  static RowPredicate all(std::vector<RowPredicate> children);
  static RowPredicate any(std::vector<RowPredicate> children);

  bool is_true() const { return kind == Kind::kAll && children.empty(); }
  bool references_valueset() const;
  void collect_fields(std::set<int>& out) const;

  friend bool operator==(const RowPredicate&, const RowPredicate&) = default;
};

enum class JoinMode : uint8_t { kBroadcast, kHashJoinBaseline };

// Node payloads. Inputs live on PlanNode.
struct Scan {
  ResourceKind resource;
  std::vector<RowPredicate> predicates;  // conjunctive
  std::vector<int> projection;           // ascending field indices
  friend bool operator==(const Scan&, const Scan&) = default;
};
struct ValueSetSemiJoin {
  std::string valueset;
  int code_field = 1;
  JoinMode mode = JoinMode::kBroadcast;
  friend bool operator==(const ValueSetSemiJoin&, const ValueSetSemiJoin&) = default;
};
struct Filter {
  RowPredicate predicate;
  friend bool operator==(const Filter&, const Filter&) = default;
};
// Whole-year age at `as_of`, computed from a birth date column, in [lo, hi].
struct AgeFilter {
  int birth_field = 2;
  int64_t lo = 0;
  int64_t hi = 0;
  Date as_of;
  friend bool operator==(const AgeFilter&, const AgeFilter&) = default;
};
struct CoverageGapAgg {
  DateInterval window;
  int max_gap_days = 45;
  int start_field = 2;
  int end_field = 3;
  friend bool operator==(const CoverageGapAgg&, const CoverageGapAgg&) = default;
};
struct ExistsPerPatient {
  friend bool operator==(const ExistsPerPatient&, const ExistsPerPatient&) = default;
};
struct UnionDistinctPatients {
  friend bool operator==(const UnionDistinctPatients&, const UnionDistinctPatients&) = default;
};
struct AndPerPatient {
  friend bool operator==(const AndPerPatient&, const AndPerPatient&) = default;
};
struct OrPerPatient {
  friend bool operator==(const OrPerPatient&, const OrPerPatient&) = default;
};
// Inputs: numerator, denominator, exclusions.
struct Report {
  friend bool operator==(const Report&, const Report&) = default;
};

using NodeOp = std::variant<Scan, ValueSetSemiJoin, Filter, AgeFilter, CoverageGapAgg,
                            ExistsPerPatient, UnionDistinctPatients, AndPerPatient, OrPerPatient,
                            Report>;

struct PlanNode {
  NodeOp op;
  std::vector<NodeId> inputs;

  template <typename T>
  const T* as() const {
    return std::get_if<T>(&op);
  }
  template <typename T>
  T* as() {
    return std::get_if<T>(&op);
  }
  template <typename T>
  bool is() const {
    return std::holds_alternative<T>(op);
  }
  // Row streams carry table rows; the rest carry patient-id sets.
  bool produces_rows() const {
    return is<Scan>() || is<ValueSetSemiJoin>() || is<Filter>() || is<AgeFilter>();
  }

  friend bool operator==(const PlanNode&, const PlanNode&) = default;
};

std::string_view node_kind_name(const PlanNode& node);

// Node ids are stable across passes, so counters from different plans of the
// same measure can be matched by id.
struct LogicalPlan {
  std::map<NodeId, PlanNode> nodes;
  NodeId report = -1;
  NodeId next_id = 0;

  NodeId add(PlanNode node);
  const PlanNode& at(NodeId id) const;
  PlanNode& at(NodeId id);
  std::map<NodeId, std::vector<NodeId>> consumers() const;
  // Children before parents.
  std::vector<NodeId> topological_order() const;
  // The Scan a row stream reads from.
  NodeId source_scan(NodeId id) const;
  ResourceKind source_resource(NodeId id) const { return at(source_scan(id)).as<Scan>()->resource; }
  std::vector<NodeId> scans() const;
  int count_scans(ResourceKind kind) const;

  friend bool operator==(const LogicalPlan&, const LogicalPlan&) = default;
};

struct LowerOptions {
  int max_gap_days = 45;
};

// Naive plan: one Scan per Retrieve occurrence, predicates in Filters.
LogicalPlan lower(const frontend::MeasureAst& ast, const LowerOptions& options = {});
LogicalPlan push_predicates(const LogicalPlan& plan);
LogicalPlan fuse_shared_scans(const LogicalPlan& plan);
// Throws Error(kUnknownValueSet) for a valueset missing from the registry.
LogicalPlan bind_valuesets(const LogicalPlan& plan, const catalog::ValueSetRegistry& registry,
                           bool hypercache);
// pushdown, fusion, binding.
LogicalPlan optimize(const LogicalPlan& plan, const catalog::ValueSetRegistry& registry,
                     bool hypercache);

// Sets every semi-join to `mode`.
LogicalPlan with_join_mode(const LogicalPlan& plan, JoinMode mode);

std::set<std::string> referenced_valuesets(const LogicalPlan& plan);

// Checks arity, acyclicity, row/patient typing and field bounds.
// Throws Error(kInvalidArgument) on the first violation.
void validate(const LogicalPlan& plan);

struct IndexField {
  std::string name;
  // code, date, interval-start, interval-end, string, integer
  std::string semantic;
  int field = -1;
  friend bool operator==(const IndexField&, const IndexField&) = default;
};

using IndexSchema = std::map<ResourceKind, std::vector<IndexField>>;

IndexSchema index_schema(const LogicalPlan& plan);
std::string index_schema_to_text(const IndexSchema& schema);

std::string predicate_to_text(const RowPredicate& pred, ResourceKind resource);
// One node per line, children indented two spaces. A node reached a second
// time prints as `^#id`.
std::string plan_to_text(const LogicalPlan& plan);

}  // namespace cqlflow::planner
