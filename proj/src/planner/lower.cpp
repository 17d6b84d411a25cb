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

using namespace frontend;

[[noreturn]] void not_lowerable(const Expr& e, const std::string& what) {
  throw Error(ErrorCode::kUnsupported, describe(e), "cannot plan " + describe(e) + ": " + what);
}

// Constant operands after parameter binding.
DateInterval const_interval(const Expr& e) {
  if (const auto* d = e.as<DateIntervalLit>()) return d->value;
  not_lowerable(e, "expected a date interval");
}

Date const_date(const Expr& e) {
  if (const auto* d = e.as<DateLit>()) return d->value;
  if (const auto* r = e.as<DateRef>()) {
    auto w = const_interval(*r->window);
    return r->boundary == Boundary::kStart ? w.start : w.end;
  }
  not_lowerable(e, "expected a date");
}

class Lowerer {
 public:
  explicit Lowerer(const LowerOptions& options) : options_(options) {}

  LogicalPlan run(const MeasureAst& ast) {
    NodeId num = lower_bool(ast.numerator);
    NodeId den = lower_bool(ast.denominator);
    NodeId excl = lower_bool(ast.exclusions);
    plan_.report = plan_.add(PlanNode{Report{}, {num, den, excl}});
    assign_projections();
    return std::move(plan_);
  }

 private:
  NodeId scan(ResourceKind kind) { return plan_.add(PlanNode{Scan{kind, {}, {}}, {}}); }

  NodeId lower_bool(const Expr& e) {
    if (const auto* ex = e.as<Exists>()) {
      return plan_.add(PlanNode{ExistsPerPatient{}, {lower_rows(*ex->operand)}});
    }
    if (const auto* l = e.as<Logical>()) {
      std::vector<NodeId> inputs;
      bool all_exists = std::all_of(l->operands.begin(), l->operands.end(),
                                    [](const Expr& o) { return o.is<Exists>(); });
      if (l->op == LogicalOp::kOr && all_exists) {
        for (const auto& o : l->operands) inputs.push_back(lower_rows(*o.as<Exists>()->operand));
        return plan_.add(PlanNode{UnionDistinctPatients{}, std::move(inputs)});
      }
      for (const auto& o : l->operands) inputs.push_back(lower_bool(o));
      if (l->op == LogicalOp::kAnd) return plan_.add(PlanNode{AndPerPatient{}, std::move(inputs)});
      return plan_.add(PlanNode{OrPerPatient{}, std::move(inputs)});
    }
    if (const auto* c = e.as<CoverageContinuity>()) {
      const auto& schema = table_schema(ResourceKind::kCoverage);
      CoverageGapAgg agg{const_interval(*c->window), options_.max_gap_days,
                         *schema.field_index("period_start"), *schema.field_index("period_end")};
      return plan_.add(PlanNode{agg, {scan(ResourceKind::kCoverage)}});
    }
    if (const auto* c = e.as<Compare>()) {
      NodeId rows;
      if (const auto* age = c->lhs->as<AgeInYearsAt>()) {
        AgeFilter f;
        f.birth_field = *table_schema(ResourceKind::kPatient).field_index("birth_date");
        f.as_of = const_date(*age->date);
        std::tie(f.lo, f.hi) = age_bounds(*c);
        rows = plan_.add(PlanNode{f, {scan(ResourceKind::kPatient)}});
      } else {
        NodeId base = scan(ResourceKind::kPatient);
        rows = plan_.add(PlanNode{Filter{compile(e, ResourceKind::kPatient, "Patient")}, {base}});
      }
      return plan_.add(PlanNode{ExistsPerPatient{}, {rows}});
    }
    not_lowerable(e, "not a patient-level condition");
  }

  std::pair<int64_t, int64_t> age_bounds(const Compare& c) {
    const Expr& rhs = *c.rhs;
    if (c.op == CompareOp::kInInterval) {
      if (const auto* iv = rhs.as<IntervalLit>()) return {iv->lo, iv->hi};
    } else if (const auto* v = rhs.as<IntegerLit>()) {
      switch (c.op) {
        case CompareOp::kEqual: return {v->value, v->value};
        case CompareOp::kLessEqual: return {RowPredicate::kMinBound, v->value};
        case CompareOp::kGreaterEqual: return {v->value, RowPredicate::kMaxBound};
        default: break;
      }
    }
    not_lowerable(rhs, "unsupported age comparison");
  }

  NodeId lower_rows(const Expr& e) {
    if (const auto* r = e.as<Retrieve>()) {
      int code = *table_schema(r->kind).field_index("code");
      return plan_.add(PlanNode{Filter{RowPredicate::in_valueset(code, r->valueset)}, {scan(r->kind)}});
    }
    if (const auto* w = e.as<Where>()) {
      const auto* r = w->source->as<Retrieve>();
      if (!r) not_lowerable(e, "where over a non-retrieve source");
      NodeId base = lower_rows(*w->source);
      return plan_.add(PlanNode{Filter{compile(*w->predicate, r->kind, r->alias)}, {base}});
    }
    not_lowerable(e, "not a row source");
  }

  RowPredicate compile(const Expr& e, ResourceKind kind, const std::string& alias) {
    if (const auto* l = e.as<Logical>()) {
      std::vector<RowPredicate> children;
      for (const auto& o : l->operands) children.push_back(compile(o, kind, alias));
      return l->op == LogicalOp::kAnd ? RowPredicate::all(std::move(children))
                                      : RowPredicate::any(std::move(children));
    }
    const auto* c = e.as<Compare>();
    const auto* prop = c ? c->lhs->as<PropertyRef>() : nullptr;
    if (!prop || prop->alias != alias) not_lowerable(e, "expected a comparison on " + alias);
    auto binding = bind_property(kind, prop->path);
    if (!binding) not_lowerable(e, "unknown property");
    const auto& schema = table_schema(kind);
    const Expr& rhs = *c->rhs;
    int f = binding->field;
    auto scalar = [&]() -> int64_t {
      if (const auto* i = rhs.as<IntegerLit>()) return i->value;
      return const_date(rhs).days;
    };

    switch (c->op) {
      case CompareOp::kEqual:
        if (schema.field(f).type == FieldType::kString) {
          const auto* s = rhs.as<StringLit>();
          if (!s) not_lowerable(e, "string field compared to a non-string");
          return RowPredicate::equals(f, s->value);
        }
        return RowPredicate::range(f, scalar(), scalar());
      case CompareOp::kLessEqual:
        return RowPredicate::range(f, RowPredicate::kMinBound, scalar());
      case CompareOp::kGreaterEqual:
        return RowPredicate::range(f, scalar(), RowPredicate::kMaxBound);
      case CompareOp::kInInterval:
        if (const auto* iv = rhs.as<IntervalLit>()) return RowPredicate::range(f, iv->lo, iv->hi);
        {
          auto w = const_interval(rhs);
          return RowPredicate::range(f, w.start.days, w.end.days);
        }
      case CompareOp::kEndsDuring: {
        auto w = const_interval(rhs);
        if (!binding->is_interval()) not_lowerable(e, "ends during needs an interval");
        return RowPredicate::range(binding->end_field, w.start.days, w.end.days);
      }
      case CompareOp::kDuring: {
        auto w = const_interval(rhs);
        if (!binding->is_interval()) return RowPredicate::range(f, w.start.days, w.end.days);
        return RowPredicate::all({RowPredicate::range(f, w.start.days, RowPredicate::kMaxBound),
                                  RowPredicate::range(binding->end_field, RowPredicate::kMinBound,
                                                      w.end.days)});
      }
    }
    not_lowerable(e, "unsupported comparison");
  }

  // Every scan of a resource projects the fields any node reads from it.
  void assign_projections() {
    IndexSchema schema = index_schema(plan_);
    for (auto& [id, node] : plan_.nodes) {
      auto* s = node.as<Scan>();
      if (!s) continue;
      s->projection.clear();
      for (const auto& f : schema[s->resource]) s->projection.push_back(f.field);
    }
  }

  LowerOptions options_;
  LogicalPlan plan_;
};

}  // namespace

LogicalPlan lower(const MeasureAst& ast, const LowerOptions& options) {
  if (options.max_gap_days < 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_gap_days", "max_gap_days must be >= 0");
  }
  LogicalPlan plan = Lowerer(options).run(ast);
  validate(plan);
  return plan;
}

}  // namespace cqlflow::planner
