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

#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cqlflow/model/resource.hpp"

namespace cqlflow::planner {
struct LogicalPlan;
}

namespace cqlflow::catalog {

// A valueset as written in the source document. Members keep document order
// and may repeat.
struct ValueSetDef {
  std::string id;
  std::string version;
  std::vector<CodeRef> members;
};

using ValueSetRegistry = std::map<std::string, ValueSetDef, std::less<>>;

// Accepts a JSON array of {id, version, members:[{system, code}]} objects, or
// an object with a "valuesets" array. Blank text yields an empty registry.
ValueSetRegistry load_valuesets(std::string_view json_text);
std::string dump_valuesets(const ValueSetRegistry& registry);

std::set<std::string> valueset_ids(const ValueSetRegistry& registry);

class CompiledValueSet {
 public:
  const std::string& id() const { return id_; }
  const std::string& version() const { return version_; }
  size_t size() const { return members_.size(); }
  bool contains(const CodeRef& code) const { return members_.contains(code); }
  const std::unordered_set<CodeRef, CodeRefHash>& members() const { return members_; }

 private:
  friend CompiledValueSet compile_valueset(const ValueSetDef& def);
  CompiledValueSet() = default;

  std::string id_;
  std::string version_;
  std::unordered_set<CodeRef, CodeRefHash> members_;
};

// Throws Error(kEmptyValueSet) when `def` has no members.
CompiledValueSet compile_valueset(const ValueSetDef& def);

// Read-only set of compiled valuesets handed to every worker by reference.
class HyperCacheBundle {
 public:
  using Entry = std::shared_ptr<const CompiledValueSet>;

  HyperCacheBundle() = default;
  explicit HyperCacheBundle(std::map<std::string, Entry> sets);

  const CompiledValueSet* find(std::string_view id) const;
  const CompiledValueSet& at(std::string_view id) const;
  size_t size() const { return sets_.size(); }
  size_t total_member_count() const { return total_; }
  const std::map<std::string, Entry, std::less<>>& sets() const { return sets_; }

 private:
  std::map<std::string, Entry, std::less<>> sets_;
  size_t total_ = 0;
};

// Compiles exactly the valuesets named in `ids`. Throws Error(kMissingValueSet).
HyperCacheBundle broadcast_handles(const ValueSetRegistry& registry,
                                   const std::set<std::string>& ids);
// Same, for every valueset the plan references.
HyperCacheBundle broadcast_handles(const ValueSetRegistry& registry,
                                   const planner::LogicalPlan& plan);

}  // namespace cqlflow::catalog
