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
#include "json.hpp"

#include "cqlflow/common/error.hpp"
#include "cqlflow/frontend/frontend.hpp"

namespace cqlflow::frontend {

namespace {

enum class Type { kBoolean, kList, kInteger, kString, kDate, kDateInterval, kIntInterval };

std::string where_str(const Expr& e) {
  return std::to_string(e.loc.line) + ":" + std::to_string(e.loc.column);
}

[[noreturn]] void invalid(const Expr& e, const std::string& what) {
  throw Error(ErrorCode::kInvalidOperand, describe(e), where_str(e) + ": " + what);
}

class Resolver {
 public:
  Resolver(const SourceLibrary& lib, std::map<std::string, ParamValue> values,
           const std::set<std::string>& valueset_names)
      : lib_(lib), values_(std::move(values)), valueset_names_(valueset_names) {}

  Expr bind(const Expr& e) {
    Expr out = substitute(e);
    std::vector<std::pair<std::string, ResourceKind>> scope;
    if (check(out, scope) != Type::kBoolean) invalid(out, "define body must be boolean");
    return out;
  }

 private:
  Expr substitute(const Expr& e) {
    if (const auto* p = e.as<ParamRef>()) {
      bool declared = false;
      for (const auto& d : lib_.parameters) declared |= d.name == p->name;
      auto it = values_.find(p->name);
      if (!declared || it == values_.end()) {
        throw Error(ErrorCode::kUnboundParameter, p->name,
                    where_str(e) + ": unbound parameter \"" + p->name + "\"");
      }
      return std::visit(
          [&](const auto& v) -> Expr {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, DateInterval>) return Expr{DateIntervalLit{v}, e.loc};
            else if constexpr (std::is_same_v<T, int64_t>) return Expr{IntegerLit{v}, e.loc};
            else return Expr{StringLit{v}, e.loc};
          },
          it->second);
    }
    Expr out = e;
    std::visit(
        [&](auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Exists>) {
            n.operand = substitute(*n.operand);
          } else if constexpr (std::is_same_v<T, Where>) {
            n.source = substitute(*n.source);
            n.predicate = substitute(*n.predicate);
          } else if constexpr (std::is_same_v<T, Compare>) {
            n.lhs = substitute(*n.lhs);
            n.rhs = substitute(*n.rhs);
          } else if constexpr (std::is_same_v<T, AgeInYearsAt>) {
            n.date = substitute(*n.date);
          } else if constexpr (std::is_same_v<T, CoverageContinuity> ||
                               std::is_same_v<T, DateRef>) {
            n.window = substitute(*n.window);
          } else if constexpr (std::is_same_v<T, Logical>) {
            for (auto& o : n.operands) o = substitute(o);
          } else if constexpr (std::is_same_v<T, Unsupported>) {
            throw Error(ErrorCode::kUnsupported, n.construct,
                        where_str(e) + ": unsupported construct '" + n.construct + "'");
          }
        },
        out.node);
    return out;
  }

  using Scope = std::vector<std::pair<std::string, ResourceKind>>;

  static bool is_constant(const Expr& e) {
    if (const auto* d = e.as<DateRef>()) return is_constant(*d->window);
    return e.is<StringLit>() || e.is<IntegerLit>() || e.is<DateLit>() || e.is<IntervalLit>() ||
           e.is<DateIntervalLit>();
  }

  Type property_type(const Expr& e, const PropertyRef& p, const Scope& scope) {
    std::optional<ResourceKind> kind;
    for (auto it = scope.rbegin(); it != scope.rend(); ++it) {
      if (it->first == p.alias) {
        kind = it->second;
        break;
      }
    }
    // Patient-context properties are only reachable outside a query.
    if (!kind && p.alias == "Patient" && scope.empty()) kind = ResourceKind::kPatient;
    if (!kind) invalid(e, "alias '" + p.alias + "' does not refer to an enclosing retrieve");
    auto binding = bind_property(*kind, p.path);
    if (!binding) {
      invalid(e, "unknown property '" + p.path + "' on " + std::string(resource_name(*kind)));
    }
    if (binding->is_interval()) return Type::kDateInterval;
    switch (table_schema(*kind).field(binding->field).type) {
      case FieldType::kInteger: return Type::kInteger;
      case FieldType::kDate: return Type::kDate;
      case FieldType::kString: return Type::kString;
      case FieldType::kCode: invalid(e, "code properties are matched through valuesets only");
    }
    return Type::kString;
  }

  Type check(const Expr& e, Scope& scope) {
    return std::visit(
        [&](const auto& n) -> Type {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Retrieve>) {
            bool declared = lib_.valuesets.empty();
            for (const auto& v : lib_.valuesets) declared |= v.name == n.valueset;
            if (!declared || !valueset_names_.contains(n.valueset)) {
              throw Error(ErrorCode::kUnknownValueSet, n.valueset,
                          where_str(e) + ": unknown valueset \"" + n.valueset + "\"");
            }
            if (!table_schema(n.kind).has_code()) {
              invalid(e, std::string(resource_name(n.kind)) + " has no code to match");
            }
            return Type::kList;
          } else if constexpr (std::is_same_v<T, Exists>) {
            if (!scope.empty()) invalid(e, "exists inside a where clause");
            if (check(*n.operand, scope) != Type::kList) invalid(e, "exists needs a retrieve");
            return Type::kBoolean;
          } else if constexpr (std::is_same_v<T, Where>) {
            const auto* r = n.source->template as<Retrieve>();
            if (!r) invalid(e, "where needs a retrieve source");
            check(*n.source, scope);
            if (r->alias.empty()) invalid(e, "where needs an aliased retrieve");
            scope.emplace_back(r->alias, r->kind);
            Type t = check(*n.predicate, scope);
            scope.pop_back();
            if (t != Type::kBoolean) invalid(*n.predicate, "where predicate must be boolean");
            return Type::kList;
          } else if constexpr (std::is_same_v<T, PropertyRef>) {
            return property_type(e, n, scope);
          } else if constexpr (std::is_same_v<T, Compare>) {
            if (!n.lhs->template is<PropertyRef>() &&
                !(scope.empty() && n.lhs->template is<AgeInYearsAt>())) {
              invalid(e, "left operand must be a property or AgeInYearsAt");
            }
            if (!is_constant(*n.rhs)) invalid(e, "right operand must be a constant");
            Type l = check(*n.lhs, scope);
            Type r = check(*n.rhs, scope);
            bool ok = false;
            switch (n.op) {
              case CompareOp::kEqual:
                ok = l == r && (l == Type::kString || l == Type::kInteger || l == Type::kDate);
                break;
              case CompareOp::kInInterval:
                ok = (l == Type::kInteger && r == Type::kIntInterval) ||
                     (l == Type::kDate && r == Type::kDateInterval);
                break;
              case CompareOp::kEndsDuring:
                ok = l == Type::kDateInterval && r == Type::kDateInterval &&
                     n.lhs->template is<PropertyRef>();
                break;
              case CompareOp::kDuring:
                ok = (l == Type::kDateInterval || l == Type::kDate) && r == Type::kDateInterval &&
                     n.lhs->template is<PropertyRef>();
                break;
              case CompareOp::kLessEqual:
              case CompareOp::kGreaterEqual:
                ok = l == r && (l == Type::kInteger || l == Type::kDate);
                break;
            }
            if (!ok) invalid(e, "operand types do not fit '" + std::string(compare_op_name(n.op)) + "'");
            return Type::kBoolean;
          } else if constexpr (std::is_same_v<T, AgeInYearsAt>) {
            if (!is_constant(*n.date)) invalid(e, "AgeInYearsAt needs a constant date");
            if (check(*n.date, scope) != Type::kDate) invalid(e, "AgeInYearsAt needs a date");
            return Type::kInteger;
          } else if constexpr (std::is_same_v<T, IntervalLit>) {
            if (n.lo > n.hi) invalid(e, "interval low bound above high bound");
            return Type::kIntInterval;
          } else if constexpr (std::is_same_v<T, DateIntervalLit>) {
            return Type::kDateInterval;
          } else if constexpr (std::is_same_v<T, Logical>) {
            for (const auto& o : n.operands) {
              if (check(o, scope) != Type::kBoolean) invalid(o, "logical operand must be boolean");
            }
            return Type::kBoolean;
          } else if constexpr (std::is_same_v<T, CoverageContinuity>) {
            if (!scope.empty()) invalid(e, "CoverageContinuity inside a where clause");
            if (check(*n.window, scope) != Type::kDateInterval) {
              invalid(e, "CoverageContinuity needs a date interval");
            }
            return Type::kBoolean;
          } else if constexpr (std::is_same_v<T, StringLit>) {
            return Type::kString;
          } else if constexpr (std::is_same_v<T, IntegerLit>) {
            return Type::kInteger;
          } else if constexpr (std::is_same_v<T, DateLit>) {
            return Type::kDate;
          } else if constexpr (std::is_same_v<T, DateRef>) {
            if (check(*n.window, scope) != Type::kDateInterval) invalid(e, "start/end of needs an interval");
            return Type::kDate;
          } else {
            invalid(e, "unresolved construct");
          }
        },
        e.node);
  }

  const SourceLibrary& lib_;
  std::map<std::string, ParamValue> values_;
  const std::set<std::string>& valueset_names_;
};

}  // namespace

MeasureAst resolve(const SourceLibrary& lib, const std::map<std::string, ParamValue>& params,
                   const std::set<std::string>& valueset_names) {
  auto diags = validate_subset(lib);
  if (!diags.empty()) {
    throw Error(ErrorCode::kUnsupported, diags.front().construct,
                format_diagnostic("", diags.front()).substr(1));
  }
  std::map<std::string, ParamValue> values;
  for (const auto& p : lib.parameters) {
    if (p.default_value) values[p.name] = *p.default_value;
  }
  for (const auto& [name, v] : params) {
    if (const auto* iv = std::get_if<DateInterval>(&v); iv && iv->end < iv->start) {
      throw Error(ErrorCode::kInvalidArgument, name, "parameter \"" + name + "\": start after end");
    }
    values[name] = v;
  }

  Resolver r(lib, values, valueset_names);
  auto required = [&](const char* name) -> Expr {
    const Define* d = lib.find_define(name);
    if (!d) throw Error(ErrorCode::kMissingDefine, name);
    return r.bind(d->body);
  };
  MeasureAst ast{required("Numerator"), required("Denominator"), required("Exclusions"), {}};
  // Keep only parameters the library declares.
  for (const auto& p : lib.parameters) {
    if (auto it = values.find(p.name); it != values.end()) ast.parameters.emplace(*it);
  }
  return ast;
}

std::map<std::string, ParamValue> parse_params_json(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, "params", std::string("parameter document: ") + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::kMalformedDocument, "params", "parameter document must be an object");
  }
  std::map<std::string, ParamValue> out;
  for (const auto& [name, v] : doc.items()) {
    if (v.is_object() && v.contains("start") && v.contains("end") && v["start"].is_string() &&
        v["end"].is_string()) {
      DateInterval iv{Date::parse(v["start"].get<std::string>()),
                      Date::parse(v["end"].get<std::string>())};
      if (iv.end < iv.start) {
        throw Error(ErrorCode::kInvalidArgument, name, "parameter \"" + name + "\": start after end");
      }
      out[name] = iv;
    } else if (v.is_number_integer()) {
      out[name] = v.get<int64_t>();
    } else if (v.is_string()) {
      out[name] = v.get<std::string>();
    } else {
      throw Error(ErrorCode::kMalformedDocument, name, "unsupported value for parameter \"" + name + "\"");
    }
  }
  return out;
}

}  // namespace cqlflow::frontend
