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
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cqlflow/common/box.hpp"
#include "cqlflow/common/date.hpp"
#include "cqlflow/model/resource.hpp"

namespace cqlflow::frontend {

struct SourceLoc {
  int line = 0;
  int column = 0;
};

enum class CompareOp { kEqual, kInInterval, kEndsDuring, kDuring, kLessEqual, kGreaterEqual };
enum class LogicalOp { kAnd, kOr };
enum class Boundary { kStart, kEnd };

std::string_view compare_op_name(CompareOp op);

struct Expr;

// Node alternatives. Source locations live on Expr and do not take part in
// equality, so structurally identical trees compare equal.
struct Retrieve {
  ResourceKind kind;
  std::string valueset;
  std::string alias;
  friend bool operator==(const Retrieve&, const Retrieve&) = default;
};
struct Exists {
  Box<Expr> operand;
  friend bool operator==(const Exists&, const Exists&) = default;
};
struct Where {
  Box<Expr> source;
  Box<Expr> predicate;
  friend bool operator==(const Where&, const Where&) = default;
};
struct PropertyRef {
  std::string alias;
  std::string path;
  friend bool operator==(const PropertyRef&, const PropertyRef&) = default;
};
struct Compare {
  CompareOp op;
  Box<Expr> lhs;
  Box<Expr> rhs;
  friend bool operator==(const Compare&, const Compare&) = default;
};
struct AgeInYearsAt {
  Box<Expr> date;
  friend bool operator==(const AgeInYearsAt&, const AgeInYearsAt&) = default;
};
struct IntervalLit {
  int64_t lo;
  int64_t hi;
  friend bool operator==(const IntervalLit&, const IntervalLit&) = default;
};
struct DateIntervalLit {
  DateInterval value;
  friend bool operator==(const DateIntervalLit&, const DateIntervalLit&) = default;
};
struct Logical {
  LogicalOp op;
  std::vector<Expr> operands;
  friend bool operator==(const Logical&, const Logical&) = default;
};
struct CoverageContinuity {
  Box<Expr> window;
  friend bool operator==(const CoverageContinuity&, const CoverageContinuity&) = default;
};
struct StringLit {
  std::string value;
  friend bool operator==(const StringLit&, const StringLit&) = default;
};
struct IntegerLit {
  int64_t value;
  friend bool operator==(const IntegerLit&, const IntegerLit&) = default;
};
struct DateLit {
  Date value;
  friend bool operator==(const DateLit&, const DateLit&) = default;
};
struct DateRef {
  Boundary boundary;
  Box<Expr> window;
  friend bool operator==(const DateRef&, const DateRef&) = default;
};
struct ParamRef {
  std::string name;
  friend bool operator==(const ParamRef&, const ParamRef&) = default;
};
// A construct outside the supported subset, kept so diagnostics can name it.
struct Unsupported {
  std::string construct;
  std::vector<Expr> args;
  friend bool operator==(const Unsupported&, const Unsupported&) = default;
};

using ExprNode = std::variant<Retrieve, Exists, Where, PropertyRef, Compare, AgeInYearsAt,
                              IntervalLit, DateIntervalLit, Logical, CoverageContinuity,
                              StringLit, IntegerLit, DateLit, DateRef, ParamRef, Unsupported>;

struct Expr {
  ExprNode node;
  SourceLoc loc;

  template <typename T>
  const T* as() const {
    return std::get_if<T>(&node);
  }
  template <typename T>
  bool is() const {
    return std::holds_alternative<T>(node);
  }

  friend bool operator==(const Expr& a, const Expr& b) { return a.node == b.node; }
};

using ParamValue = std::variant<DateInterval, int64_t, std::string>;

struct ParameterDecl {
  std::string name;
  std::optional<ParamValue> default_value;
  SourceLoc loc;
  friend bool operator==(const ParameterDecl& a, const ParameterDecl& b) {
    return a.name == b.name && a.default_value == b.default_value;
  }
};

struct ValueSetDecl {
  std::string name;
  std::string url;
  SourceLoc loc;
  friend bool operator==(const ValueSetDecl& a, const ValueSetDecl& b) {
    return a.name == b.name && a.url == b.url;
  }
};

struct Define {
  std::string name;
  Expr body;
  SourceLoc loc;
  friend bool operator==(const Define& a, const Define& b) {
    return a.name == b.name && a.body == b.body;
  }
};

struct Diagnostic {
  std::string construct;
  SourceLoc loc;
  std::string message;
};

struct SourceLibrary {
  std::string name;
  std::string version;
  std::string text;
  std::vector<ParameterDecl> parameters;
  std::vector<ValueSetDecl> valuesets;
  std::vector<Define> defines;
  // Unsupported statements seen while parsing (expression-level unsupported
  // constructs stay in the tree as Unsupported nodes).
  std::vector<Diagnostic> diagnostics;

  const Define* find_define(std::string_view define_name) const;
};

struct MeasureAst {
  Expr numerator;
  Expr denominator;
  Expr exclusions;
  std::map<std::string, ParamValue> parameters;

  friend bool operator==(const MeasureAst&, const MeasureAst&) = default;
};

// Compact functional rendering, e.g.
// Exists(Where(Retrieve(Observation,"Mammogram","m"),...)). Used in tests and
// `compile --emit ast`.
std::string describe(const Expr& expr);

// Visits every node of the tree in pre-order.
template <typename F>
void walk(const Expr& expr, F&& fn);

}  // namespace cqlflow::frontend

#include "cqlflow/frontend/ast_walk.inl"
