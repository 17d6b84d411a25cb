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

#include <stdexcept>
#include <string>
#include <string_view>

namespace cqlflow {

enum class ErrorCode {
  kSyntax,
  kDuplicateDefine,
  kUnsupported,
  kUnboundParameter,
  kUnknownValueSet,
  kMissingDefine,
  kInvalidOperand,
  kMalformedDocument,
  kDuplicateValueSet,
  kEmptyValueSet,
  kMissingValueSet,
  kInvalidArgument,
  kInvalidConfig,
  kIo,
  kCorruptData,
  kMissingTable,
  kMissingColumn,
  kSchemaMismatch,
  kCapacityExceeded,
  kUnknownImage,
  kUnknownConfig,
};

std::string_view error_code_name(ErrorCode code);

// Every module reports failures through this type. `subject()` names the
// offending entity (a valueset id, a define name, a file path) so callers and
// tests can match on it without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string subject, const std::string& message)
      : std::runtime_error(message), code_(code), subject_(std::move(subject)) {}

  Error(ErrorCode code, std::string subject)
      : Error(code, subject, std::string(error_code_name(code)) + "(" + subject + ")") {}

  ErrorCode code() const { return code_; }
  const std::string& subject() const { return subject_; }

 private:
  ErrorCode code_;
  std::string subject_;
};

// Syntax errors carry a 1-based source position.
class SyntaxError : public Error {
 public:
  SyntaxError(int line, int column, const std::string& message)
      : Error(ErrorCode::kSyntax, message,
              std::to_string(line) + ":" + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace cqlflow
