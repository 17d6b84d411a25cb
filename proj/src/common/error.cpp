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
#include "cqlflow/common/error.hpp"

namespace cqlflow {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSyntax: return "SyntaxError";
    case ErrorCode::kDuplicateDefine: return "DuplicateDefine";
    case ErrorCode::kUnsupported: return "Unsupported";
    case ErrorCode::kUnboundParameter: return "UnboundParameter";
    case ErrorCode::kUnknownValueSet: return "UnknownValueSet";
    case ErrorCode::kMissingDefine: return "MissingDefine";
    case ErrorCode::kInvalidOperand: return "InvalidOperand";
    case ErrorCode::kMalformedDocument: return "MalformedDocument";
    case ErrorCode::kDuplicateValueSet: return "DuplicateValueSet";
    case ErrorCode::kEmptyValueSet: return "EmptyValueSet";
    case ErrorCode::kMissingValueSet: return "MissingValueSet";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kCorruptData: return "CorruptData";
    case ErrorCode::kMissingTable: return "MissingTable";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kCapacityExceeded: return "CapacityExceeded";
    case ErrorCode::kUnknownImage: return "UnknownImage";
    case ErrorCode::kUnknownConfig: return "UnknownConfig";
  }
  return "Error";
}

}  // namespace cqlflow
