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
#include <cctype>
#include <charconv>
#include <set>
#include <string>
#include <vector>

#include "cqlflow/common/error.hpp"
#include "cqlflow/frontend/frontend.hpp"

namespace cqlflow::frontend {

namespace {

enum class Tok { kIdent, kQuoted, kString, kInteger, kDate, kSymbol, kEnd };

struct Token {
  Tok kind;
  std::string text;
  SourceLoc loc;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space_and_comments();
      SourceLoc loc{line_, col_};
      if (pos_ >= src_.size()) {
        out.push_back({Tok::kEnd, "", loc});
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          advance();
        }
        out.push_back({Tok::kIdent, std::string(src_.substr(start, pos_ - start)), loc});
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        out.push_back({Tok::kInteger, std::string(src_.substr(start, pos_ - start)), loc});
      } else if (c == '@') {
        advance();
        size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '-')) {
          advance();
        }
        out.push_back({Tok::kDate, std::string(src_.substr(start, pos_ - start)), loc});
      } else if (c == '"' || c == '\'') {
        out.push_back({c == '"' ? Tok::kQuoted : Tok::kString, quoted(c, loc), loc});
      } else {
        static constexpr std::string_view kTwo[] = {"<=", ">=", "!="};
        std::string sym(1, c);
        if (pos_ + 1 < src_.size()) {
          for (auto t : kTwo) {
            if (src_.substr(pos_, 2) == t) sym = std::string(t);
          }
        }
        static const std::string kSingles = "()[]:,.=<>-+*/~{}";
        if (sym.size() == 1 && kSingles.find(c) == std::string::npos) {
          throw SyntaxError(loc.line, loc.column, std::string("unexpected character '") + c + "'");
        }
        for (size_t i = 0; i < sym.size(); ++i) advance();
        out.push_back({Tok::kSymbol, sym, loc});
      }
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space_and_comments() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (src_.substr(pos_, 2) == "//") {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (src_.substr(pos_, 2) == "/*") {
        SourceLoc loc{line_, col_};
        advance();
        advance();
        while (pos_ < src_.size() && src_.substr(pos_, 2) != "*/") advance();
        if (pos_ >= src_.size()) throw SyntaxError(loc.line, loc.column, "unterminated comment");
        advance();
        advance();
      } else {
        return;
      }
    }
  }

  std::string quoted(char q, SourceLoc loc) {
    advance();
    std::string out;
    while (pos_ < src_.size() && src_[pos_] != q) {
      if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) advance();
      if (src_[pos_] == '\n') throw SyntaxError(loc.line, loc.column, "unterminated literal");
      out.push_back(src_[pos_]);
      advance();
    }
    if (pos_ >= src_.size()) throw SyntaxError(loc.line, loc.column, "unterminated literal");
    advance();
    return out;
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

const std::set<std::string, std::less<>> kStatementKeywords = {
    "library", "using", "include", "parameter", "valueset", "codesystem", "context", "define"};

// Keywords that cannot be used as a query alias.
const std::set<std::string, std::less<>> kReserved = {
    "where", "and", "or", "exists", "in", "ends", "during", "with", "without", "return",
    "sort", "let", "such", "that", "not", "define", "starts", "before", "after", "is",
    "union", "intersect", "except", "aggregate"};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  SourceLibrary library(std::string_view text) {
    SourceLibrary lib;
    lib.text = std::string(text);
    std::set<std::string> define_names;
    std::set<std::string> param_names;
    while (!at_end()) {
      const Token& t = peek();
      if (t.kind != Tok::kIdent) fail(t, "expected a statement, found '" + t.text + "'");
      if (t.text == "library") {
        next();
        lib.name = name_token("library name");
        if (accept_ident("version")) lib.version = expect(Tok::kString, "version string").text;
      } else if (t.text == "using") {
        next();
        name_token("model name");
        if (accept_ident("version")) expect(Tok::kString, "version string");
      } else if (t.text == "context") {
        next();
        const Token& ctx = expect(Tok::kIdent, "context name");
        if (ctx.text != "Patient") unsupported_statement(ctx, "context " + ctx.text);
      } else if (t.text == "valueset") {
        next();
        ValueSetDecl vs;
        vs.loc = t.loc;
        vs.name = name_token("valueset name");
        expect_symbol(":");
        vs.url = expect(Tok::kString, "valueset identifier").text;
        if (accept_ident("version")) expect(Tok::kString, "version string");
        lib.valuesets.push_back(std::move(vs));
      } else if (t.text == "parameter") {
        next();
        ParameterDecl p;
        p.loc = t.loc;
        p.name = name_token("parameter name");
        if (!param_names.insert(p.name).second) {
          fail(t, "duplicate parameter \"" + p.name + "\"");
        }
        skip_type_specifier();
        if (accept_ident("default")) p.default_value = constant_value();
        lib.parameters.push_back(std::move(p));
      } else if (t.text == "define") {
        next();
        const Token& head = peek();
        if (head.kind == Tok::kIdent &&
            (head.text == "function" || head.text == "fluent" || head.text == "private" ||
             head.text == "public")) {
          unsupported_statement(head, "define " + head.text);
          continue;
        }
        Define d;
        d.loc = t.loc;
        d.name = name_token("define name");
        expect_symbol(":");
        d.body = expr();
        if (!define_names.insert(d.name).second) {
          throw Error(ErrorCode::kDuplicateDefine, d.name,
                      std::to_string(t.loc.line) + ":" + std::to_string(t.loc.column) +
                          ": duplicate define \"" + d.name + "\"");
        }
        lib.defines.push_back(std::move(d));
      } else if (kStatementKeywords.contains(t.text)) {
        unsupported_statement(t, t.text);
      } else {
        fail(t, "expected a statement, found '" + t.text + "'");
      }
    }
    lib.diagnostics = std::move(diagnostics_);
    if (lib.defines.empty()) {
      const auto& end = toks_.back();
      throw SyntaxError(end.loc.line, end.loc.column, "no defines found");
    }
    return lib;
  }

 private:
  // Expressions.

  Expr expr() { return or_expr(); }

  Expr or_expr() {
    Expr first = and_expr();
    if (!peek_ident("or")) return first;
    Logical l{LogicalOp::kOr, {}};
    SourceLoc loc = first.loc;
    l.operands.push_back(std::move(first));
    while (accept_ident("or")) l.operands.push_back(and_expr());
    return Expr{std::move(l), loc};
  }

  Expr and_expr() {
    Expr first = cmp_expr();
    if (!peek_ident("and")) return first;
    Logical l{LogicalOp::kAnd, {}};
    SourceLoc loc = first.loc;
    l.operands.push_back(std::move(first));
    while (accept_ident("and")) l.operands.push_back(cmp_expr());
    return Expr{std::move(l), loc};
  }

  Expr cmp_expr() {
    Expr lhs = unary();
    const Token& t = peek();
    auto make = [&](CompareOp op) {
      SourceLoc loc = lhs.loc;
      Expr rhs = unary();
      return Expr{Compare{op, std::move(lhs), std::move(rhs)}, loc};
    };
    if (t.kind == Tok::kSymbol) {
      if (t.text == "=") {
        next();
        return make(CompareOp::kEqual);
      }
      if (t.text == "<=") {
        next();
        return make(CompareOp::kLessEqual);
      }
      if (t.text == ">=") {
        next();
        return make(CompareOp::kGreaterEqual);
      }
      if (t.text == "<" || t.text == ">" || t.text == "!=" || t.text == "~") {
        const Token& op = next();
        Expr rhs = unary();
        return unsupported_node(op, "operator " + op.text, {std::move(lhs), std::move(rhs)});
      }
    } else if (t.kind == Tok::kIdent) {
      if (t.text == "in") {
        next();
        return make(CompareOp::kInInterval);
      }
      if (t.text == "during") {
        next();
        return make(CompareOp::kDuring);
      }
      if (t.text == "ends" && peek(1).kind == Tok::kIdent && peek(1).text == "during") {
        next();
        next();
        return make(CompareOp::kEndsDuring);
      }
      if (t.text == "ends" || t.text == "starts" || t.text == "before" || t.text == "after" ||
          t.text == "overlaps" || t.text == "includes" || t.text == "is") {
        const Token& op = next();
        // Swallow a trailing timing keyword ("starts during", "is null", ...).
        if (peek().kind == Tok::kIdent && !kReserved.contains(peek().text) &&
            peek(1).kind != Tok::kSymbol) {
          next();
        } else if (peek_ident("during") || peek_ident("not")) {
          next();
        }
        Expr rhs = unary();
        return unsupported_node(op, "operator " + op.text, {std::move(lhs), std::move(rhs)});
      }
    }
    return lhs;
  }

  Expr unary() {
    const Token& t = peek();
    if (t.kind == Tok::kIdent) {
      if (t.text == "exists") {
        next();
        Expr operand = unary();
        return Expr{Exists{std::move(operand)}, t.loc};
      }
      if (t.text == "not") {
        next();
        Expr operand = unary();
        return unsupported_node(t, "not", {std::move(operand)});
      }
      if (t.text == "date" && peek(1).kind == Tok::kIdent && peek(1).text == "from") {
        // Dates are already day-granular; `date from` is the identity here.
        next();
        next();
        return unary();
      }
      if ((t.text == "start" || t.text == "end") && peek(1).kind == Tok::kIdent &&
          peek(1).text == "of") {
        next();
        next();
        Expr window = unary();
        return Expr{DateRef{t.text == "start" ? Boundary::kStart : Boundary::kEnd,
                            std::move(window)},
                    t.loc};
      }
    }
    return postfix();
  }

  Expr postfix() {
    const Token& t = peek();
    if (t.kind == Tok::kIdent && peek(1).kind == Tok::kSymbol && peek(1).text == "." &&
        !is_builtin(t.text)) {
      next();
      std::string path;
      while (accept_symbol(".")) {
        if (!path.empty()) path += '.';
        path += expect(Tok::kIdent, "property name").text;
      }
      return Expr{PropertyRef{t.text, path}, t.loc};
    }
    return primary();
  }

  static bool is_builtin(std::string_view name) {
    return name == "AgeInYearsAt" || name == "CoverageContinuity" || name == "Interval";
  }

  Expr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::kString:
        next();
        return Expr{StringLit{t.text}, t.loc};
      case Tok::kInteger:
        next();
        return Expr{IntegerLit{to_int(t)}, t.loc};
      case Tok::kDate: {
        next();
        auto d = Date::try_parse(t.text);
        if (!d) fail(t, "invalid date literal @" + t.text);
        return Expr{DateLit{*d}, t.loc};
      }
      case Tok::kQuoted:
        next();
        return Expr{ParamRef{t.text}, t.loc};
      case Tok::kSymbol:
        if (t.text == "(") {
          next();
          Expr inner = peek_symbol("[") ? query() : expr();
          expect_symbol(")");
          return inner;
        }
        if (t.text == "[") return query();
        if (t.text == "-") {
          next();
          const Token& n = expect(Tok::kInteger, "integer");
          return Expr{IntegerLit{-to_int(n)}, t.loc};
        }
        fail(t, "unexpected '" + t.text + "'");
      case Tok::kIdent:
        return ident_primary();
      case Tok::kEnd:
        fail(t, "unexpected end of input");
    }
    fail(t, "unexpected token");
  }

  Expr ident_primary() {
    const Token& t = next();
    if (t.text == "Interval") {
      if (accept_symbol("(")) {
        // Open lower bound: parse through and report.
        Expr lo = expr();
        expect_symbol(",");
        Expr hi = expr();
        if (!accept_symbol(")")) expect_symbol("]");
        return unsupported_node(t, "open interval", {std::move(lo), std::move(hi)});
      }
      expect_symbol("[");
      Expr lo = expr();
      expect_symbol(",");
      Expr hi = expr();
      if (accept_symbol(")")) {
        return unsupported_node(t, "open interval", {std::move(lo), std::move(hi)});
      }
      expect_symbol("]");
      if (lo.is<IntegerLit>() && hi.is<IntegerLit>()) {
        return Expr{IntervalLit{lo.as<IntegerLit>()->value, hi.as<IntegerLit>()->value}, t.loc};
      }
      if (lo.is<DateLit>() && hi.is<DateLit>()) {
        DateInterval iv{lo.as<DateLit>()->value, hi.as<DateLit>()->value};
        if (iv.end < iv.start) fail(t, "interval start after end");
        return Expr{DateIntervalLit{iv}, t.loc};
      }
      return unsupported_node(t, "computed interval bounds", {std::move(lo), std::move(hi)});
    }
    if (peek_symbol("(")) {
      next();
      std::vector<Expr> args;
      if (!peek_symbol(")")) {
        args.push_back(expr());
        while (accept_symbol(",")) args.push_back(expr());
      }
      expect_symbol(")");
      if (t.text == "AgeInYearsAt" && args.size() == 1) {
        return Expr{AgeInYearsAt{std::move(args[0])}, t.loc};
      }
      if (t.text == "CoverageContinuity" && args.size() == 1) {
        return Expr{CoverageContinuity{std::move(args[0])}, t.loc};
      }
      return unsupported_node(t, t.text, std::move(args));
    }
    return unsupported_node(t, "identifier reference " + t.text, {});
  }

  Expr query() {
    const Token& open = expect_symbol("[");
    const Token& type = expect(Tok::kIdent, "resource type");
    std::string valueset;
    bool has_valueset = false;
    if (accept_symbol(":")) {
      valueset = expect(Tok::kQuoted, "valueset name").text;
      has_valueset = true;
    }
    expect_symbol("]");
    std::string alias;
    if (peek().kind == Tok::kIdent && !kReserved.contains(peek().text)) alias = next().text;

    Expr source;
    auto kind = resource_from_name(type.text);
    if (!kind) {
      source = unsupported_node(type, "resource " + type.text, {});
    } else if (!has_valueset) {
      source = unsupported_node(open, "retrieve without valueset", {});
    } else {
      source = Expr{Retrieve{*kind, valueset, alias}, open.loc};
    }

    static const std::set<std::string, std::less<>> kClauses = {"with", "without", "let",
                                                               "return", "sort", "aggregate"};
    while (peek().kind == Tok::kIdent && kClauses.contains(peek().text)) {
      const Token& clause = next();
      skip_balanced_clause();
      source = unsupported_node(clause, clause.text + " clause", {std::move(source)});
    }
    if (accept_ident("where")) {
      Expr pred = expr();
      source = Expr{Where{std::move(source), std::move(pred)}, open.loc};
    }
    while (peek().kind == Tok::kIdent && kClauses.contains(peek().text)) {
      const Token& clause = next();
      skip_balanced_clause();
      source = unsupported_node(clause, clause.text + " clause", {std::move(source)});
    }
    return source;
  }

  // Skips tokens of an unsupported query clause up to the enclosing ')' or the
  // next statement.
  void skip_balanced_clause() {
    int depth = 0;
    while (!at_end()) {
      const Token& t = peek();
      if (t.kind == Tok::kSymbol && (t.text == "(" || t.text == "[")) ++depth;
      if (t.kind == Tok::kSymbol && (t.text == ")" || t.text == "]")) {
        if (depth == 0) return;
        --depth;
      }
      if (depth == 0 && t.kind == Tok::kIdent &&
          (t.text == "where" || kStatementKeywords.contains(t.text))) {
        return;
      }
      next();
    }
  }

  ParamValue constant_value() {
    const Token& t = peek();
    Expr e = expr();
    if (auto* iv = e.as<DateIntervalLit>()) return iv->value;
    if (auto* i = e.as<IntegerLit>()) return i->value;
    if (auto* s = e.as<StringLit>()) return s->value;
    fail(t, "parameter default must be a literal");
  }

  void skip_type_specifier() {
    // e.g. Interval<Date>, Integer, String
    if (peek().kind != Tok::kIdent || peek().text == "default" ||
        kStatementKeywords.contains(peek().text)) {
      return;
    }
    next();
    if (accept_symbol("<")) {
      int depth = 1;
      while (depth > 0 && !at_end()) {
        const Token& t = next();
        if (t.kind == Tok::kSymbol && t.text == "<") ++depth;
        if (t.kind == Tok::kSymbol && t.text == ">") --depth;
      }
    }
  }

  void unsupported_statement(const Token& t, const std::string& construct) {
    diagnostics_.push_back({construct, t.loc, "unsupported construct '" + construct + "'"});
    // Resume at the next statement keyword.
    next();
    while (!at_end() &&
           !(peek().kind == Tok::kIdent && kStatementKeywords.contains(peek().text))) {
      next();
    }
  }

  Expr unsupported_node(const Token& t, std::string construct, std::vector<Expr> args) {
    return Expr{Unsupported{std::move(construct), std::move(args)}, t.loc};
  }

  // Token helpers.

  std::string name_token(const char* what) {
    const Token& t = peek();
    if (t.kind == Tok::kIdent || t.kind == Tok::kQuoted) return next().text;
    fail(t, std::string("expected ") + what);
  }

  int64_t to_int(const Token& t) {
    int64_t v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{}) fail(t, "integer out of range");
    return v;
  }

  const Token& peek(size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == Tok::kEnd; }
  bool peek_ident(std::string_view s) const {
    return peek().kind == Tok::kIdent && peek().text == s;
  }
  bool peek_symbol(std::string_view s) const {
    return peek().kind == Tok::kSymbol && peek().text == s;
  }
  bool accept_ident(std::string_view s) {
    if (!peek_ident(s)) return false;
    next();
    return true;
  }
  bool accept_symbol(std::string_view s) {
    if (!peek_symbol(s)) return false;
    next();
    return true;
  }
  const Token& expect(Tok kind, const char* what) {
    if (peek().kind != kind) fail(peek(), std::string("expected ") + what);
    return next();
  }
  const Token& expect_symbol(std::string_view s) {
    if (!peek_symbol(s)) fail(peek(), "expected '" + std::string(s) + "'");
    return next();
  }
  [[noreturn]] void fail(const Token& t, const std::string& message) const {
    throw SyntaxError(t.loc.line, t.loc.column, message);
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
  std::vector<Diagnostic> diagnostics_;
};

}  // namespace

SourceLibrary parse_library(std::string_view text) {
  Parser p(Lexer(text).run());
  auto lib = p.library(text);
  if (lib.name.empty()) lib.name = "Measure";
  return lib;
}

const Define* SourceLibrary::find_define(std::string_view define_name) const {
  for (const auto& d : defines) {
    if (d.name == define_name) return &d;
  }
  return nullptr;
}

std::vector<Diagnostic> validate_subset(const SourceLibrary& lib) {
  std::vector<Diagnostic> out = lib.diagnostics;
  std::set<std::string, std::less<>> define_names;
  for (const auto& d : lib.defines) define_names.insert(d.name);
  for (const auto& d : lib.defines) {
    walk(d.body, [&](const Expr& e) {
      if (const auto* u = e.as<Unsupported>()) {
        out.push_back({u->construct, e.loc, "unsupported construct '" + u->construct + "'"});
      } else if (const auto* p = e.as<ParamRef>(); p && define_names.contains(p->name)) {
        out.push_back({"define reference", e.loc,
                       "unsupported construct 'define reference' (\"" + p->name + "\")"});
      }
    });
  }
  return out;
}

std::string format_diagnostic(std::string_view file, const Diagnostic& d) {
  return std::string(file) + ":" + std::to_string(d.loc.line) + ":" +
         std::to_string(d.loc.column) + ": " + d.message;
}

}  // namespace cqlflow::frontend
