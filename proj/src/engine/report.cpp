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
#include "cqlflow/engine/report.hpp"

#include "json.hpp"

#include "cqlflow/common/error.hpp"

namespace cqlflow::engine {

std::string MeasureReport::to_json() const {
  std::string out = "{\n";
  out += "  \"denominator_count\": " + std::to_string(denominator_count) + ",\n";
  out += "  \"numerator_count\": " + std::to_string(numerator_count) + ",\n";
  out += "  \"exclusion_count\": " + std::to_string(exclusion_count) + ",\n";
  out += "  \"flags\": [";
  for (size_t i = 0; i < flags.size(); ++i) {
    const auto& f = flags[i];
    out += i % 8 == 0 ? "\n    " : " ";
    out += "[" + std::to_string(f.patient_id) + "," + (f.denominator ? "1" : "0") + "," + (f.numerator ? "1" : "0") +
           "," + (f.exclusion ? "1" : "0") + "]";
    if (i + 1 < flags.size()) out += ",";
  }
  out += flags.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

MeasureReport MeasureReport::from_json(std::string_view text) {
  MeasureReport r;
  try {
    auto doc = nlohmann::json::parse(text);
    r.denominator_count = doc.at("denominator_count").get<int64_t>();
    r.numerator_count = doc.at("numerator_count").get<int64_t>();
    r.exclusion_count = doc.at("exclusion_count").get<int64_t>();
    if (doc.contains("flags")) {
      for (const auto& f : doc.at("flags")) {
        r.flags.push_back(PatientFlags{f.at(0).get<int64_t>(), f.at(1).get<int>() != 0, f.at(2).get<int>() != 0,
                                       f.at(3).get<int>() != 0});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, "report", std::string("report: ") + e.what());
  }
  return r;
}

}  // namespace cqlflow::engine
