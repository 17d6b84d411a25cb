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
#include "cqlflow/model/resource.hpp"

#include <algorithm>
#include <cctype>

#include "cqlflow/common/io.hpp"

namespace cqlflow {

namespace {

using FT = FieldType;

constexpr FieldDef kPatientFields[] = {{"patient_id", FT::kInteger},
                                       {"gender", FT::kString},
                                       {"birth_date", FT::kDate},
                                       {"name", FT::kString},
                                       {"postal_code", FT::kString}};
constexpr FieldDef kConditionFields[] = {{"patient_id", FT::kInteger},
                                         {"code", FT::kCode},
                                         {"clinical_status", FT::kString},
                                         {"prevalence_start", FT::kDate},
                                         {"prevalence_end", FT::kDate},
                                         {"severity", FT::kString}};
constexpr FieldDef kEncounterFields[] = {{"patient_id", FT::kInteger},
                                         {"code", FT::kCode},
                                         {"status", FT::kString},
                                         {"period_start", FT::kDate},
                                         {"period_end", FT::kDate},
                                         {"class", FT::kString}};
constexpr FieldDef kMedicationFields[] = {{"patient_id", FT::kInteger},
                                          {"code", FT::kCode},
                                          {"status", FT::kString},
                                          {"authored_on", FT::kDate},
                                          {"dosage_mg", FT::kInteger},
                                          {"route", FT::kString}};
constexpr FieldDef kProcedureFields[] = {{"patient_id", FT::kInteger},
                                         {"code", FT::kCode},
                                         {"status", FT::kString},
                                         {"performed_start", FT::kDate},
                                         {"performed_end", FT::kDate},
                                         {"body_site", FT::kString}};
constexpr FieldDef kObservationFields[] = {{"patient_id", FT::kInteger},
                                           {"code", FT::kCode},
                                           {"status", FT::kString},
                                           {"effective_time_start", FT::kDate},
                                           {"effective_time_end", FT::kDate},
                                           {"value", FT::kInteger},
                                           {"unit", FT::kString}};
constexpr FieldDef kCoverageFields[] = {{"patient_id", FT::kInteger},
                                        {"status", FT::kString},
                                        {"period_start", FT::kDate},
                                        {"period_end", FT::kDate},
                                        {"payer", FT::kString},
                                        {"plan_type", FT::kString}};

const TableSchema kSchemas[] = {
    {ResourceKind::kPatient, kPatientFields, 2},
    {ResourceKind::kCondition, kConditionFields, 3},
    {ResourceKind::kEncounter, kEncounterFields, 3},
    {ResourceKind::kMedication, kMedicationFields, 3},
    {ResourceKind::kProcedure, kProcedureFields, 3},
    {ResourceKind::kObservation, kObservationFields, 4},
    {ResourceKind::kCoverage, kCoverageFields, 2},
};

struct PathEntry {
  ResourceKind kind;
  std::string_view path;
  std::string_view field;
  std::string_view end_field;
};

constexpr PathEntry kPaths[] = {
    {ResourceKind::kPatient, "gender", "gender", ""},
    {ResourceKind::kPatient, "gender.value", "gender", ""},
    {ResourceKind::kPatient, "birthDate", "birth_date", ""},
    {ResourceKind::kPatient, "birthDate.value", "birth_date", ""},
    {ResourceKind::kPatient, "name", "name", ""},
    {ResourceKind::kPatient, "address.postalCode", "postal_code", ""},
    {ResourceKind::kCondition, "code", "code", ""},
    {ResourceKind::kCondition, "clinicalStatus", "clinical_status", ""},
    {ResourceKind::kCondition, "prevalencePeriod", "prevalence_start", "prevalence_end"},
    {ResourceKind::kCondition, "severity", "severity", ""},
    {ResourceKind::kEncounter, "code", "code", ""},
    {ResourceKind::kEncounter, "type", "code", ""},
    {ResourceKind::kEncounter, "status", "status", ""},
    {ResourceKind::kEncounter, "period", "period_start", "period_end"},
    {ResourceKind::kEncounter, "class", "class", ""},
    {ResourceKind::kMedication, "code", "code", ""},
    {ResourceKind::kMedication, "status", "status", ""},
    {ResourceKind::kMedication, "authoredOn", "authored_on", ""},
    {ResourceKind::kMedication, "dosage", "dosage_mg", ""},
    {ResourceKind::kMedication, "route", "route", ""},
    {ResourceKind::kProcedure, "code", "code", ""},
    {ResourceKind::kProcedure, "status", "status", ""},
    {ResourceKind::kProcedure, "performed", "performed_start", "performed_end"},
    {ResourceKind::kProcedure, "bodySite", "body_site", ""},
    {ResourceKind::kObservation, "code", "code", ""},
    {ResourceKind::kObservation, "status", "status", ""},
    {ResourceKind::kObservation, "effectiveTime", "effective_time_start", "effective_time_end"},
    {ResourceKind::kObservation, "effective", "effective_time_start", "effective_time_end"},
    {ResourceKind::kObservation, "value", "value", ""},
    {ResourceKind::kObservation, "unit", "unit", ""},
    {ResourceKind::kCoverage, "status", "status", ""},
    {ResourceKind::kCoverage, "period", "period_start", "period_end"},
    {ResourceKind::kCoverage, "payor", "payer", ""},
    {ResourceKind::kCoverage, "type", "plan_type", ""},
};

}  // namespace

std::string_view resource_name(ResourceKind kind) {
  switch (kind) {
    case ResourceKind::kPatient: return "Patient";
    case ResourceKind::kCondition: return "Condition";
    case ResourceKind::kEncounter: return "Encounter";
    case ResourceKind::kMedication: return "Medication";
    case ResourceKind::kProcedure: return "Procedure";
    case ResourceKind::kObservation: return "Observation";
    case ResourceKind::kCoverage: return "Coverage";
  }
  return "?";
}

std::string resource_file_stem(ResourceKind kind) {
  std::string s(resource_name(kind));
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::optional<ResourceKind> resource_from_name(std::string_view name) {
  for (auto kind : kAllResources) {
    if (resource_name(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string_view field_type_name(FieldType type) {
  switch (type) {
    case FieldType::kInteger: return "integer";
    case FieldType::kString: return "string";
    case FieldType::kCode: return "code";
    case FieldType::kDate: return "date";
  }
  return "?";
}

std::optional<int> TableSchema::field_index(std::string_view name) const {
  for (size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].name == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

bool TableSchema::has_code() const {
  return std::any_of(fields.begin(), fields.end(),
                     [](const FieldDef& f) { return f.type == FieldType::kCode; });
}

uint64_t TableSchema::hash() const {
  std::string text(resource_name(kind));
  for (const auto& f : fields) {
    text += ';';
    text += f.name;
    text += ':';
    text += field_type_name(f.type);
  }
  return fnv1a64(text);
}

const TableSchema& table_schema(ResourceKind kind) {
  return kSchemas[static_cast<size_t>(kind)];
}

std::optional<PropertyBinding> bind_property(ResourceKind kind, std::string_view path) {
  const auto& schema = table_schema(kind);
  for (const auto& e : kPaths) {
    if (e.kind != kind || e.path != path) continue;
    PropertyBinding b;
    b.field = *schema.field_index(e.field);
    if (!e.end_field.empty()) b.end_field = *schema.field_index(e.end_field);
    return b;
  }
  return std::nullopt;
}

bool is_interval_field(ResourceKind kind, int field) {
  const auto& schema = table_schema(kind);
  for (const auto& e : kPaths) {
    if (e.kind != kind || e.end_field.empty()) continue;
    if (*schema.field_index(e.field) == field || *schema.field_index(e.end_field) == field) {
      return true;
    }
  }
  return false;
}

}  // namespace cqlflow
