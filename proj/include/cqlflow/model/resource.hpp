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

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cqlflow/common/date.hpp"

namespace cqlflow {

enum class ResourceKind : uint8_t {
  kPatient,
  kCondition,
  kEncounter,
  kMedication,
  kProcedure,
  kObservation,
  kCoverage,
};

inline constexpr std::array<ResourceKind, 7> kAllResources = {
    ResourceKind::kPatient,   ResourceKind::kCondition,   ResourceKind::kEncounter,
    ResourceKind::kMedication, ResourceKind::kProcedure, ResourceKind::kObservation,
    ResourceKind::kCoverage};

std::string_view resource_name(ResourceKind kind);
// Lower-case form used for file names.
std::string resource_file_stem(ResourceKind kind);
std::optional<ResourceKind> resource_from_name(std::string_view name);

enum class FieldType : uint8_t { kInteger, kString, kCode, kDate };

std::string_view field_type_name(FieldType type);

struct FieldDef {
  std::string_view name;
  FieldType type;
};

struct CodeRef {
  std::string system;
  std::string code;

  friend bool operator==(const CodeRef&, const CodeRef&) = default;
  friend auto operator<=>(const CodeRef&, const CodeRef&) = default;
};

struct CodeRefHash {
  size_t operator()(const CodeRef& c) const noexcept {
    size_t h = std::hash<std::string>{}(c.system);
    return h ^ (std::hash<std::string>{}(c.code) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
  }
};

using Value = std::variant<int64_t, Date, std::string, CodeRef>;
using Record = std::vector<Value>;

// Declared physical schema of one resource table. Field 0 is always patient_id.
struct TableSchema {
  ResourceKind kind;
  std::span<const FieldDef> fields;
  // Column the columnar writer clusters rows by.
  int cluster_field;

  std::optional<int> field_index(std::string_view name) const;
  const FieldDef& field(int index) const { return fields[static_cast<size_t>(index)]; }
  int field_count() const { return static_cast<int>(fields.size()); }
  bool has_code() const;
  uint64_t hash() const;
};

const TableSchema& table_schema(ResourceKind kind);

inline constexpr int kPatientIdField = 0;

// How a CQL property path maps onto physical columns: a scalar column, or an
// interval stored as two date columns.
struct PropertyBinding {
  int field = -1;
  int end_field = -1;  // >= 0 only for intervals; `field` is then the start

  bool is_interval() const { return end_field >= 0; }
};

std::optional<PropertyBinding> bind_property(ResourceKind kind, std::string_view path);
// True if the field is the start or end column of some interval property.
bool is_interval_field(ResourceKind kind, int field);

// All rows of one table (or one partition of it), fully decoded.
struct TableData {
  ResourceKind kind = ResourceKind::kPatient;
  std::vector<Record> rows;
};

inline int64_t patient_id_of(const Record& r) { return std::get<int64_t>(r[kPatientIdField]); }

}  // namespace cqlflow
