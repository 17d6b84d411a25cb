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
#include <sstream>

#include "cqlflow/common/error.hpp"
#include "cqlflow/planner/plan.hpp"

namespace cqlflow::planner {

RowPredicate RowPredicate::equals(int field, std::string value) {
  RowPredicate p;
  p.kind = Kind::kEquals;
  p.field = field;
  p.text = std::move(value);
  return p;
}

RowPredicate RowPredicate::range(int field, int64_t lo, int64_t hi) {
  RowPredicate p;
  p.kind = Kind::kRange;
  p.field = field;
  p.lo = lo;
  p.hi = hi;
  return p;
}

RowPredicate RowPredicate::in_valueset(int field, std::string valueset) {
  RowPredicate p;
  p.kind = Kind::kInValueSet;
  p.field = field;
  p.text = std::move(valueset);
  return p;
}

RowPredicate RowPredicate::all(std::vector<RowPredicate> children) {
  if (children.size() == 1) return std::move(children.front());
  RowPredicate p;
  p.kind = Kind::kAll;
  p.children = std::move(children);
  return p;
}

RowPredicate RowPredicate::any(std::vector<RowPredicate> children) {
  if (children.size() == 1) return std::move(children.front());
  RowPredicate p;
  p.kind = Kind::kAny;
  p.children = std::move(children);
  return p;
}

bool RowPredicate::references_valueset() const {
  if (kind == Kind::kInValueSet) return true;
  return std::any_of(children.begin(), children.end(),
                     [](const RowPredicate& c) { return c.references_valueset(); });
}

void RowPredicate::collect_fields(std::set<int>& out) const {
  if (field >= 0) out.insert(field);
  for (const auto& c : children) c.collect_fields(out);
}

namespace {

std::string bound_text(int64_t v, FieldType type) {
  if (type == FieldType::kDate) return Date{static_cast<int32_t>(v)}.to_string();
  return std::to_string(v);
}

}  // namespace

std::string predicate_to_text(const RowPredicate& pred, ResourceKind resource) {
  const auto& schema = table_schema(resource);
  auto name = [&](int f) { return std::string(schema.field(f).name); };
  using K = RowPredicate::Kind;
  switch (pred.kind) {
    case K::kEquals:
      return name(pred.field) + " = '" + pred.text + "'";
    case K::kInValueSet:
      return name(pred.field) + " in valueset \"" + pred.text + "\"";
    case K::kRange: {
      auto type = schema.field(pred.field).type;
      bool has_lo = pred.lo != RowPredicate::kMinBound;
      bool has_hi = pred.hi != RowPredicate::kMaxBound;
      if (has_lo && has_hi && pred.lo == pred.hi) return name(pred.field) + " = " + bound_text(pred.lo, type);
      if (has_lo && has_hi) {
        return name(pred.field) + " in [" + bound_text(pred.lo, type) + ", " + bound_text(pred.hi, type) + "]";
      }
      if (has_lo) return name(pred.field) + " >= " + bound_text(pred.lo, type);
      if (has_hi) return name(pred.field) + " <= " + bound_text(pred.hi, type);
      return name(pred.field) + " is any";
    }
    case K::kAll:
    case K::kAny: {
      if (pred.children.empty()) return pred.kind == K::kAll ? "true" : "false";
      std::string out;
      for (const auto& c : pred.children) {
        if (!out.empty()) out += pred.kind == K::kAll ? " and " : " or ";
        bool nested = c.kind == K::kAll || c.kind == K::kAny;
        out += nested ? "(" + predicate_to_text(c, resource) + ")" : predicate_to_text(c, resource);
      }
      return out;
    }
  }
  return "?";
}

}  // namespace cqlflow::planner
