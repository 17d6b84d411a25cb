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
#include "cqlflow/oracle/oracle.hpp"

#include <algorithm>
#include <map>

#include "cqlflow/common/error.hpp"

namespace cqlflow::oracle {

using namespace frontend;

namespace {

struct IntRange {
  int64_t lo;
  int64_t hi;
};

using Rows = std::vector<const Record*>;
using Val = std::variant<std::monostate, bool, int64_t, Date, std::string, DateInterval, IntRange, Rows>;

[[noreturn]] void unsupported(const Expr& e, const std::string& what) {
  throw Error(ErrorCode::kUnsupported, describe(e), "oracle cannot evaluate " + what);
}

class Interpreter {
 public:
  Interpreter(const PatientBundle& bundle, const catalog::ValueSetRegistry& registry, int max_gap_days)
      : bundle_(bundle), registry_(registry), max_gap_days_(max_gap_days) {}

  bool truth(const Expr& e) {
    Val v = eval(e);
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    unsupported(e, "a non-boolean define");
  }

 private:
  struct Binding {
    std::string alias;
    ResourceKind kind;
    const Record* row;
  };

  Val eval(const Expr& e) {
    if (const auto* r = e.as<Retrieve>()) return retrieve(*r);
    if (const auto* x = e.as<Exists>()) {
      Val v = eval(*x->operand);
      const auto* rows = std::get_if<Rows>(&v);
      if (!rows) unsupported(e, "exists over a non-list");
      return !rows->empty();
    }
    if (const auto* w = e.as<Where>()) {
      const auto* r = w->source->as<Retrieve>();
      if (!r) unsupported(e, "where over a non-retrieve");
      Rows in = retrieve(*r);
      Rows out;
      for (const Record* row : in) {
        scope_.push_back({r->alias, r->kind, row});
        Val keep = eval(*w->predicate);
        scope_.pop_back();
        if (std::get<bool>(keep)) out.push_back(row);
      }
      return out;
    }
    if (const auto* l = e.as<Logical>()) {
      // Evaluate every operand; there are no side effects to short-circuit.
      bool acc = l->op == LogicalOp::kAnd;
      for (const auto& o : l->operands) {
        bool b = std::get<bool>(eval(o));
        acc = l->op == LogicalOp::kAnd ? (acc && b) : (acc || b);
      }
      return acc;
    }
    if (const auto* c = e.as<Compare>()) return compare(e, *c);
    if (const auto* p = e.as<PropertyRef>()) return property(e, *p);
    if (const auto* a = e.as<AgeInYearsAt>()) {
      Val at = eval(*a->date);
      const auto* patient = patient_row();
      if (!patient) return std::monostate{};
      auto f = bind_property(ResourceKind::kPatient, "birthDate");
      return static_cast<int64_t>(age_in_years(std::get<Date>((*patient)[f->field]), std::get<Date>(at)));
    }
    if (const auto* c = e.as<CoverageContinuity>()) {
      return continuous(std::get<DateInterval>(eval(*c->window)));
    }
    if (const auto* d = e.as<DateRef>()) {
      auto w = std::get<DateInterval>(eval(*d->window));
      return d->boundary == Boundary::kStart ? w.start : w.end;
    }
    if (const auto* i = e.as<IntervalLit>()) return IntRange{i->lo, i->hi};
    if (const auto* i = e.as<DateIntervalLit>()) return i->value;
    if (const auto* s = e.as<StringLit>()) return s->value;
    if (const auto* i = e.as<IntegerLit>()) return i->value;
    if (const auto* d = e.as<DateLit>()) return d->value;
    unsupported(e, "this construct");
  }

  const Record* patient_row() const {
    const auto& rows = bundle_.rows(ResourceKind::kPatient);
    return rows.empty() ? nullptr : &rows.front();
  }

  bool member(const std::string& valueset, const CodeRef& code) const {
    auto it = registry_.find(valueset);
    if (it == registry_.end()) throw Error(ErrorCode::kUnknownValueSet, valueset);
    for (const auto& m : it->second.members) {
      if (m.system == code.system && m.code == code.code) return true;
    }
    return false;
  }

  Rows retrieve(const Retrieve& r) const {
    auto code_field = table_schema(r.kind).field_index("code");
    Rows out;
    if (!code_field) return out;
    for (const auto& row : bundle_.rows(r.kind)) {
      if (member(r.valueset, std::get<CodeRef>(row[*code_field]))) out.push_back(&row);
    }
    return out;
  }

  Val property(const Expr& e, const PropertyRef& p) {
    ResourceKind kind;
    const Record* row = nullptr;
    if (p.alias == "Patient") {
      kind = ResourceKind::kPatient;
      row = patient_row();
    } else {
      for (auto it = scope_.rbegin(); it != scope_.rend(); ++it) {
        if (it->alias == p.alias) {
          kind = it->kind;
          row = it->row;
          break;
        }
      }
      if (!row) unsupported(e, "an unbound alias");
    }
    if (!row) return std::monostate{};
    auto b = bind_property(kind, p.path);
    if (!b) unsupported(e, "an unknown property");
    const Value& v = (*row)[b->field];
    if (b->is_interval()) return DateInterval{std::get<Date>(v), std::get<Date>((*row)[b->end_field])};
    if (const auto* i = std::get_if<int64_t>(&v)) return *i;
    if (const auto* d = std::get_if<Date>(&v)) return *d;
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    unsupported(e, "a code-valued property");
  }

  static std::optional<int64_t> ordinal(const Val& v) {
    if (const auto* i = std::get_if<int64_t>(&v)) return *i;
    if (const auto* d = std::get_if<Date>(&v)) return d->days;
    return std::nullopt;
  }

  Val compare(const Expr& e, const Compare& c) {
    Val lhs = eval(*c.lhs);
    Val rhs = eval(*c.rhs);
    if (std::holds_alternative<std::monostate>(lhs)) return false;
    switch (c.op) {
      case CompareOp::kEqual: {
        if (const auto* s = std::get_if<std::string>(&lhs)) return *s == std::get<std::string>(rhs);
        auto a = ordinal(lhs), b = ordinal(rhs);
        if (!a || !b) unsupported(e, "equality on these operands");
        return *a == *b;
      }
      case CompareOp::kLessEqual:
      case CompareOp::kGreaterEqual: {
        auto a = ordinal(lhs), b = ordinal(rhs);
        if (!a || !b) unsupported(e, "ordering on these operands");
        return c.op == CompareOp::kLessEqual ? *a <= *b : *a >= *b;
      }
      case CompareOp::kInInterval: {
        auto a = ordinal(lhs);
        if (!a) unsupported(e, "membership of a non-scalar");
        if (const auto* r = std::get_if<IntRange>(&rhs)) return r->lo <= *a && *a <= r->hi;
        const auto& w = std::get<DateInterval>(rhs);
        return w.start.days <= *a && *a <= w.end.days;
      }
      case CompareOp::kEndsDuring: {
        const auto& w = std::get<DateInterval>(rhs);
        return w.contains(std::get<DateInterval>(lhs).end);
      }
      case CompareOp::kDuring: {
        const auto& w = std::get<DateInterval>(rhs);
        if (const auto* iv = std::get_if<DateInterval>(&lhs)) return w.includes(*iv);
        return w.contains(std::get<Date>(lhs));
      }
    }
    unsupported(e, "this comparison");
  }

  // Day by day over the window.
  bool continuous(const DateInterval& window) const {
    const auto& rows = bundle_.rows(ResourceKind::kCoverage);
    if (rows.empty()) return false;
    auto period = bind_property(ResourceKind::kCoverage, "period");
    std::vector<bool> covered(static_cast<size_t>(window.length_days()), false);
    for (const auto& row : rows) {
      Date s = std::get<Date>(row[period->field]);
      Date e = std::get<Date>(row[period->end_field]);
      for (Date d = std::max(s, window.start); d <= std::min(e, window.end); d = d.plus_days(1)) {
        covered[static_cast<size_t>(d.days - window.start.days)] = true;
      }
    }
    int run = 0;
    for (bool c : covered) {
      run = c ? 0 : run + 1;
      if (run > max_gap_days_) return false;
    }
    return true;
  }

  const PatientBundle& bundle_;
  const catalog::ValueSetRegistry& registry_;
  int max_gap_days_;
  std::vector<Binding> scope_;
};

}  // namespace

engine::PatientFlags evaluate_patient(const PatientBundle& bundle, const MeasureAst& ast,
                                      const catalog::ValueSetRegistry& registry, int max_gap_days) {
  Interpreter in(bundle, registry, max_gap_days);
  engine::PatientFlags out;
  out.patient_id = bundle.patient_id;
  out.denominator = in.truth(ast.denominator);
  out.numerator = in.truth(ast.numerator);
  out.exclusion = in.truth(ast.exclusions);
  return out;
}

engine::MeasureReport evaluate_dataset(const storage::DatasetHandle& data, const MeasureAst& ast,
                                       const catalog::ValueSetRegistry& registry, int max_gap_days) {
  engine::MeasureReport report;
  std::vector<std::unique_ptr<storage::TableReader>> readers;
  for (auto kind : kAllResources) readers.push_back(data.reader(kind));
  for (uint32_t p = 0; p < data.partitions; ++p) {
    std::map<int64_t, PatientBundle> patients;
    for (size_t t = 0; t < readers.size(); ++t) {
      for (auto& row : readers[t]->read_records(p)) {
        int64_t pid = patient_id_of(row);
        auto& b = patients[pid];
        b.patient_id = pid;
        b.tables[t].push_back(std::move(row));
      }
    }
    for (const auto& [pid, bundle] : patients) {
      auto flags = evaluate_patient(bundle, ast, registry, max_gap_days);
      report.denominator_count += flags.denominator;
      report.numerator_count += flags.numerator;
      report.exclusion_count += flags.exclusion;
      if (flags.denominator || flags.numerator || flags.exclusion) report.flags.push_back(flags);
    }
  }
  return report;
}

}  // namespace cqlflow::oracle
