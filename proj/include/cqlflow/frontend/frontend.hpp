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

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cqlflow/frontend/ast.hpp"

namespace cqlflow::frontend {

// Parses the supported CQL subset. Throws SyntaxError on malformed input and
// Error(kDuplicateDefine) on a repeated define name. Constructs outside the
// subset do not throw; they surface through validate_subset().
SourceLibrary parse_library(std::string_view text);

// Empty iff every construct is in the supported subset.
std::vector<Diagnostic> validate_subset(const SourceLibrary& lib);

// `file:line:col: message`
std::string format_diagnostic(std::string_view file, const Diagnostic& d);

// Renders a library (or one expression) back to CQL text that reparses to a
// structurally identical tree.
std::string to_cql(const SourceLibrary& lib);
std::string to_cql(const Expr& expr);

// Binds parameters and checks valueset references and operand types.
// `params` override library defaults.
MeasureAst resolve(const SourceLibrary& lib, const std::map<std::string, ParamValue>& params,
                   const std::set<std::string>& valueset_names);

// Parameter bindings document: {"Name": {"start": "YYYY-MM-DD", "end": ...} | int | string}
std::map<std::string, ParamValue> parse_params_json(std::string_view json_text);

}  // namespace cqlflow::frontend
