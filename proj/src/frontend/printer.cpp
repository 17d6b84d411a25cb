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
#include <sstream>

#include "cqlflow/frontend/frontend.hpp"

namespace cqlflow::frontend {

std::string_view compare_op_name(CompareOp op) {
  switch (op) {
    case CompareOp::kEqual: return "=";
    case CompareOp::kInInterval: return "in-interval";
    case CompareOp::kEndsDuring: return "ends-during";
    case CompareOp::kDuring: return "during";
    case CompareOp::kLessEqual: return "<=";
    case CompareOp::kGreaterEqual: return ">=";
  }
  return "?";
}

namespace {

std::string quote(std::string_view s, char q) {
  std::string out(1, q);
  for (char c : s) {
    if (c == q || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back(q);
  return out;
}

std::string cql_op(CompareOp op) {
  switch (op) {
    case CompareOp::kEqual: return "=";
    case CompareOp::kInInterval: return "in";
    case CompareOp::kEndsDuring: return "ends during";
    case CompareOp::kDuring: return "during";
    case CompareOp::kLessEqual: return "<=";
    case CompareOp::kGreaterEqual: return ">=";
  }
  return "?";
}

std::string print(const Expr& e);

// Operands of comparisons and prefix operators need parentheses unless atomic.
std::string print_operand(const Expr& e) {
  if (e.is<Logical>() || e.is<Compare>() || e.is<Where>() || e.is<Retrieve>() ||
      e.is<Exists>() || e.is<DateRef>()) {
    return "(" + print(e) + ")";
  }
  return print(e);
}

std::string print_query(const Expr& e) {
  if (const auto* r = e.as<Retrieve>()) {
    std::string s = "[" + std::string(resource_name(r->kind)) + ": " + quote(r->valueset, '"') + "]";
    if (!r->alias.empty()) s += " " + r->alias;
    return s;
  }
  if (const auto* w = e.as<Where>()) {
    return print_query(*w->source) + " where " + print(*w->predicate);
  }
  return print(e);
}

std::string print(const Expr& e) {
  return std::visit(
      [&](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Retrieve> || std::is_same_v<T, Where>) {
          return print_query(e);
        } else if constexpr (std::is_same_v<T, Exists>) {
          return "exists (" + (n.operand->template is<Retrieve>() || n.operand->template is<Where>()
                                   ? print_query(*n.operand)
                                   : print(*n.operand)) +
                 ")";
        } else if constexpr (std::is_same_v<T, PropertyRef>) {
          return n.alias + "." + n.path;
        } else if constexpr (std::is_same_v<T, Compare>) {
          return print_operand(*n.lhs) + " " + cql_op(n.op) + " " + print_operand(*n.rhs);
        } else if constexpr (std::is_same_v<T, AgeInYearsAt>) {
          return "AgeInYearsAt(" + print(*n.date) + ")";
        } else if constexpr (std::is_same_v<T, IntervalLit>) {
          return "Interval[" + std::to_string(n.lo) + ", " + std::to_string(n.hi) + "]";
        } else if constexpr (std::is_same_v<T, DateIntervalLit>) {
          return "Interval[@" + n.value.start.to_string() + ", @" + n.value.end.to_string() + "]";
        } else if constexpr (std::is_same_v<T, Logical>) {
          std::string sep = n.op == LogicalOp::kAnd ? "\n  and " : "\n  or ";
          std::string s;
          for (size_t i = 0; i < n.operands.size(); ++i) {
            if (i) s += sep;
            const auto& o = n.operands[i];
            s += o.template is<Logical>() ? "(" + print(o) + ")" : print(o);
          }
          return s;
        } else if constexpr (std::is_same_v<T, CoverageContinuity>) {
          return "CoverageContinuity(" + print(*n.window) + ")";
        } else if constexpr (std::is_same_v<T, StringLit>) {
          return quote(n.value, '\'');
        } else if constexpr (std::is_same_v<T, IntegerLit>) {
          return std::to_string(n.value);
        } else if constexpr (std::is_same_v<T, DateLit>) {
          return "@" + n.value.to_string();
        } else if constexpr (std::is_same_v<T, DateRef>) {
          return std::string(n.boundary == Boundary::kStart ? "start of " : "end of ") +
                 print_operand(*n.window);
        } else if constexpr (std::is_same_v<T, ParamRef>) {
          return quote(n.name, '"');
        } else {
          std::string s = n.construct + "(";
          for (size_t i = 0; i < n.args.size(); ++i) s += (i ? ", " : "") + print(n.args[i]);
          return s + ")";
        }
      },
      e.node);
}

std::string describe_list(const std::vector<Expr>& xs) {
  std::string s;
  for (size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + describe(xs[i]);
  return s;
}

}  // namespace

std::string to_cql(const Expr& expr) { return print(expr); }

std::string to_cql(const SourceLibrary& lib) {
  std::ostringstream out;
  out << "library " << quote(lib.name, '"');
  if (!lib.version.empty()) out << " version " << quote(lib.version, '\'');
  out << "\n\n";
  for (const auto& p : lib.parameters) {
    out << "parameter " << quote(p.name, '"');
    if (p.default_value) {
      out << " default ";
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, DateInterval>) {
              out << "Interval[@" << v.start.to_string() << ", @" << v.end.to_string() << "]";
            } else if constexpr (std::is_same_v<T, int64_t>) {
              out << v;
            } else {
              out << quote(v, '\'');
            }
          },
          *p.default_value);
    }
    out << "\n";
  }
  for (const auto& v : lib.valuesets) {
    out << "valueset " << quote(v.name, '"') << ": " << quote(v.url, '\'') << "\n";
  }
  out << "\ncontext Patient\n";
  for (const auto& d : lib.defines) {
    out << "\ndefine " << quote(d.name, '"') << ":\n  " << print(d.body) << "\n";
  }
  return out.str();
}

std::string describe(const Expr& expr) {
  return std::visit(
      [&](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Retrieve>) {
          return "Retrieve(" + std::string(resource_name(n.kind)) + ",\"" + n.valueset + "\",\"" +
                 n.alias + "\")";
        } else if constexpr (std::is_same_v<T, Exists>) {
          return "Exists(" + describe(*n.operand) + ")";
        } else if constexpr (std::is_same_v<T, Where>) {
          return "Where(" + describe(*n.source) + "," + describe(*n.predicate) + ")";
        } else if constexpr (std::is_same_v<T, PropertyRef>) {
          return "PropertyRef(" + n.alias + "," + n.path + ")";
        } else if constexpr (std::is_same_v<T, Compare>) {
          return "Compare(" + std::string(compare_op_name(n.op)) + "," + describe(*n.lhs) + "," +
                 describe(*n.rhs) + ")";
        } else if constexpr (std::is_same_v<T, AgeInYearsAt>) {
          return "AgeInYearsAt(" + describe(*n.date) + ")";
        } else if constexpr (std::is_same_v<T, IntervalLit>) {
          return "IntervalLit(" + std::to_string(n.lo) + "," + std::to_string(n.hi) + ")";
        } else if constexpr (std::is_same_v<T, DateIntervalLit>) {
          return "DateInterval(" + n.value.start.to_string() + "," + n.value.end.to_string() + ")";
        } else if constexpr (std::is_same_v<T, Logical>) {
          return std::string(n.op == LogicalOp::kAnd ? "And(" : "Or(") + describe_list(n.operands) +
                 ")";
        } else if constexpr (std::is_same_v<T, CoverageContinuity>) {
          return "CoverageContinuity(" + describe(*n.window) + ")";
        } else if constexpr (std::is_same_v<T, StringLit>) {
          return "StringLit('" + n.value + "')";
        } else if constexpr (std::is_same_v<T, IntegerLit>) {
          return "IntegerLit(" + std::to_string(n.value) + ")";
        } else if constexpr (std::is_same_v<T, DateLit>) {
          return "DateLit(" + n.value.to_string() + ")";
        } else if constexpr (std::is_same_v<T, DateRef>) {
          return std::string(n.boundary == Boundary::kStart ? "DateRef(start," : "DateRef(end,") +
                 describe(*n.window) + ")";
        } else if constexpr (std::is_same_v<T, ParamRef>) {
          return "ParamRef(\"" + n.name + "\")";
        } else {
          return "Unsupported(" + n.construct + (n.args.empty() ? "" : "," + describe_list(n.args)) +
                 ")";
        }
      },
      expr.node);
}

}  // namespace cqlflow::frontend
