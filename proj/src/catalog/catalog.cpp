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
#include "cqlflow/catalog/catalog.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"

#include "cqlflow/common/error.hpp"
#include "cqlflow/planner/plan.hpp"

namespace cqlflow::catalog {

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::kMalformedDocument, "valuesets", "valueset document: " + what);
}

const nlohmann::json& field(const nlohmann::json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end() || !it->is_string()) malformed(std::string("missing string field '") + name + "'");
  return *it;
}

}  // namespace

ValueSetRegistry load_valuesets(std::string_view json_text) {
  ValueSetRegistry registry;
  if (std::all_of(json_text.begin(), json_text.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
    return registry;
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
  const nlohmann::json* list = &doc;
  if (doc.is_object()) {
    auto it = doc.find("valuesets");
    if (it == doc.end()) malformed("expected a \"valuesets\" array");
    list = &*it;
  }
  if (!list->is_array()) malformed("expected an array of valuesets");

  for (const auto& entry : *list) {
    if (!entry.is_object()) malformed("valueset entry must be an object");
    ValueSetDef def;
    def.id = field(entry, "id").get<std::string>();
    if (def.id.empty()) malformed("empty valueset id");
    if (auto v = entry.find("version"); v != entry.end()) {
      if (!v->is_string()) malformed("version must be a string");
      def.version = v->get<std::string>();
    }
    auto members = entry.find("members");
    if (members == entry.end() || !members->is_array()) malformed("valueset '" + def.id + "' has no members array");
    for (const auto& m : *members) {
      if (!m.is_object()) malformed("member must be an object");
      CodeRef c{field(m, "system").get<std::string>(), field(m, "code").get<std::string>()};
      if (c.system.empty() || c.code.empty()) malformed("empty system or code in '" + def.id + "'");
      def.members.push_back(std::move(c));
    }
    if (registry.contains(def.id)) throw Error(ErrorCode::kDuplicateValueSet, def.id);
    std::string id = def.id;
    registry.emplace(std::move(id), std::move(def));
  }
  return registry;
}

std::string dump_valuesets(const ValueSetRegistry& registry) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& [id, def] : registry) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : def.members) members.push_back({{"system", m.system}, {"code", m.code}});
    list.push_back({{"id", id}, {"version", def.version}, {"members", std::move(members)}});
  }
  return nlohmann::json{{"valuesets", std::move(list)}}.dump(1) + "\n";
}

std::set<std::string> valueset_ids(const ValueSetRegistry& registry) {
  std::set<std::string> ids;
  for (const auto& [id, def] : registry) ids.insert(id);
  return ids;
}

CompiledValueSet compile_valueset(const ValueSetDef& def) {
  if (def.members.empty()) throw Error(ErrorCode::kEmptyValueSet, def.id);
  CompiledValueSet out;
  out.id_ = def.id;
  out.version_ = def.version;
  out.members_.reserve(def.members.size());
  out.members_.insert(def.members.begin(), def.members.end());
  return out;
}

HyperCacheBundle::HyperCacheBundle(std::map<std::string, Entry> sets) {
  for (auto& [id, vs] : sets) {
    total_ += vs->size();
    sets_.emplace(id, std::move(vs));
  }
}

const CompiledValueSet* HyperCacheBundle::find(std::string_view id) const {
  auto it = sets_.find(id);
  return it == sets_.end() ? nullptr : it->second.get();
}

const CompiledValueSet& HyperCacheBundle::at(std::string_view id) const {
  const auto* vs = find(id);
  if (!vs) throw Error(ErrorCode::kMissingValueSet, std::string(id));
  return *vs;
}

HyperCacheBundle broadcast_handles(const ValueSetRegistry& registry,
                                   const std::set<std::string>& ids) {
  std::map<std::string, HyperCacheBundle::Entry> sets;
  for (const auto& id : ids) {
    auto it = registry.find(id);
    if (it == registry.end()) throw Error(ErrorCode::kMissingValueSet, id);
    sets.emplace(id, std::make_shared<const CompiledValueSet>(compile_valueset(it->second)));
  }
  return HyperCacheBundle(std::move(sets));
}

HyperCacheBundle broadcast_handles(const ValueSetRegistry& registry,
                                   const planner::LogicalPlan& plan) {
  return broadcast_handles(registry, planner::referenced_valuesets(plan));
}

}  // namespace cqlflow::catalog
