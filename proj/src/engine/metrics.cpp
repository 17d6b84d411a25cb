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
#include <algorithm>

#include "json.hpp"

#include "cqlflow/common/error.hpp"
#include "cqlflow/engine/engine.hpp"

namespace cqlflow::engine {

uint64_t RunMetrics::max_join_state() const {
  return peak_join_state_entries.empty()
             ? 0
             : *std::max_element(peak_join_state_entries.begin(), peak_join_state_entries.end());
}

uint64_t RunMetrics::max_dedup_state() const {
  return peak_dedup_state_entries.empty()
             ? 0
             : *std::max_element(peak_dedup_state_entries.begin(), peak_dedup_state_entries.end());
}

std::string RunMetrics::to_json() const {
  nlohmann::ordered_json doc;
  doc["wall_time"] = wall_time;
  doc["resources_scanned"] = resources_scanned;
  doc["throughput"] = throughput();
  nlohmann::ordered_json rows = nlohmann::ordered_json::object();
  for (const auto& [id, n] : rows_emitted) rows[std::to_string(id)] = n;
  doc["rows_emitted"] = rows;
  doc["peak_join_state_entries"] = {{"per_slot", peak_join_state_entries}, {"max", max_join_state()}};
  doc["peak_dedup_state_entries"] = {{"per_slot", peak_dedup_state_entries}, {"max", max_dedup_state()}};
  doc["values_read"] = values_read;
  doc["chunks_read"] = chunks_read;
  doc["chunks_skipped"] = chunks_skipped;
  doc["bytes_read"] = bytes_read;
  doc["exceeds_ram_budget"] = exceeds_ram_budget;
  return doc.dump(2) + "\n";
}

RunMetrics RunMetrics::from_json(std::string_view text) {
  RunMetrics m;
  try {
    auto doc = nlohmann::json::parse(text);
    m.wall_time = doc.at("wall_time").get<double>();
    m.resources_scanned = doc.at("resources_scanned").get<uint64_t>();
    for (const auto& [id, n] : doc.at("rows_emitted").items()) m.rows_emitted[std::stoi(id)] = n.get<uint64_t>();
    m.peak_join_state_entries = doc.at("peak_join_state_entries").at("per_slot").get<std::vector<uint64_t>>();
    m.peak_dedup_state_entries = doc.at("peak_dedup_state_entries").at("per_slot").get<std::vector<uint64_t>>();
    m.values_read = doc.at("values_read").get<uint64_t>();
    m.chunks_read = doc.at("chunks_read").get<uint64_t>();
    m.chunks_skipped = doc.at("chunks_skipped").get<uint64_t>();
    m.bytes_read = doc.at("bytes_read").get<uint64_t>();
    m.exceeds_ram_budget = doc.at("exceeds_ram_budget").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, "metrics", std::string("metrics: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::kMalformedDocument, "metrics", "metrics: bad node id");
  }
  return m;
}

}  // namespace cqlflow::engine
