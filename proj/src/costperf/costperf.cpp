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
#include "cqlflow/costperf/costperf.hpp"

#include <charconv>
#include <cmath>

#include "cqlflow/common/error.hpp"
#include "cqlflow/common/resources.hpp"

namespace cqlflow::costperf {

namespace {

using Row = std::vector<std::string>;

std::vector<Row> parse_csv(std::string_view text, std::string_view doc, const std::vector<std::string>& header) {
  std::vector<Row> rows;
  size_t line_no = 0;
  bool saw_header = false;
  while (!text.empty()) {
    size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    Row cells;
    size_t start = 0;
    while (true) {
      size_t comma = line.find(',', start);
      cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    auto where = std::string(doc) + ":" + std::to_string(line_no);
    if (!saw_header) {
      if (cells != header) throw Error(ErrorCode::kMalformedDocument, std::string(doc), where + ": unexpected header");
      saw_header = true;
      continue;
    }
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kMalformedDocument, std::string(doc),
                  where + ": expected " + std::to_string(header.size()) + " fields");
    }
    rows.push_back(std::move(cells));
  }
  if (!saw_header) throw Error(ErrorCode::kMalformedDocument, std::string(doc), std::string(doc) + ": empty table");
  return rows;
}

double number(const std::string& s, std::string_view doc) {
  double v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kMalformedDocument, std::string(doc), std::string(doc) + ": bad number '" + s + "'");
  }
  return v;
}

int count(const std::string& s, std::string_view doc) {
  int v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) {
    throw Error(ErrorCode::kMalformedDocument, std::string(doc), std::string(doc) + ": bad count '" + s + "'");
  }
  return v;
}

const std::vector<std::string> kConfigHeader = {"id",           "family",      "taskmanagers",
                                                "cores_per_tm", "ram_per_tm_gb", "parallelism",
                                                "network_bw_gbps", "ebs_bw_gbps"};
const std::vector<std::string> kImageHeader = {"image",  "cph_on_demand", "cph_spot",        "cph_reserved",
                                               "cpu",    "memory_gb",     "cores",           "network_bw_gbps",
                                               "ebs_bw_gbps", "storage"};
const std::vector<std::string> kFamilyHeader = {"family", "image"};

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out + "\n";
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

const ConfigRow& ConfigTables::config(std::string_view id) const {
  for (const auto& c : configs) {
    if (c.id == id) return c;
  }
  throw Error(ErrorCode::kUnknownConfig, std::string(id));
}

const ImageType& ConfigTables::image(std::string_view name) const {
  for (const auto& i : images) {
    if (i.name == name) return i;
  }
  throw Error(ErrorCode::kUnknownImage, std::string(name));
}

const ImageType& ConfigTables::image_for(const ConfigRow& row) const {
  auto it = families.find(row.family);
  if (it == families.end()) {
    throw Error(ErrorCode::kUnknownImage, row.family, "configuration " + row.id + " names unknown family " + row.family);
  }
  return image(it->second);
}

ConfigTables load_config_tables(std::string_view configs_csv, std::string_view images_csv,
                                std::string_view families_csv) {
  ConfigTables t;
  for (auto& r : parse_csv(images_csv, "images", kImageHeader)) {
    ImageType img{r[0],
                  number(r[1], "images"),
                  number(r[2], "images"),
                  number(r[3], "images"),
                  r[4],
                  number(r[5], "images"),
                  count(r[6], "images"),
                  number(r[7], "images"),
                  number(r[8], "images"),
                  r[9]};
    if (!(img.cph_on_demand > 0 && img.cph_spot > 0 && img.memory_gb > 0 && img.cores > 0)) {
      throw Error(ErrorCode::kMalformedDocument, img.name, "image " + img.name + " has non-positive fields");
    }
    t.images.push_back(std::move(img));
  }
  for (auto& r : parse_csv(families_csv, "families", kFamilyHeader)) {
    if (!t.families.emplace(r[0], r[1]).second) {
      throw Error(ErrorCode::kMalformedDocument, r[0], "family " + r[0] + " listed twice");
    }
    t.image(r[1]);
  }
  for (auto& r : parse_csv(configs_csv, "configurations", kConfigHeader)) {
    ConfigRow c{r[0],
                r[1],
                count(r[2], "configurations"),
                count(r[3], "configurations"),
                number(r[4], "configurations"),
                count(r[5], "configurations"),
                number(r[6], "configurations"),
                number(r[7], "configurations")};
    c.cluster();
    t.image_for(c);
    t.configs.push_back(std::move(c));
  }
  return t;
}

ConfigTables load_bundled_tables() {
  return load_config_tables(bundled_resource("configurations.csv"), bundled_resource("images.csv"),
                            bundled_resource("families.csv"));
}

std::string configs_to_csv(const std::vector<ConfigRow>& configs) {
  std::string out = join(kConfigHeader);
  for (const auto& c : configs) {
    out += join({c.id, c.family, std::to_string(c.taskmanagers), std::to_string(c.cores_per_tm),
                 format_number(c.ram_per_tm_gb), std::to_string(c.parallelism), format_number(c.network_bw_gbps),
                 format_number(c.ebs_bw_gbps)});
  }
  return out;
}

std::string images_to_csv(const std::vector<ImageType>& images) {
  std::string out = join(kImageHeader);
  for (const auto& i : images) {
    out += join({i.name, format_number(i.cph_on_demand), format_number(i.cph_spot), format_number(i.cph_reserved),
                 i.cpu, format_number(i.memory_gb), std::to_string(i.cores), format_number(i.network_bw_gbps),
                 format_number(i.ebs_bw_gbps), i.storage});
  }
  return out;
}

std::string families_to_csv(const std::map<std::string, std::string>& families) {
  std::string out = join(kFamilyHeader);
  for (const auto& [family, image] : families) out += join({family, image});
  return out;
}

double image_cph(const ImageType& img, Pricing pricing) {
  return pricing == Pricing::kSpot ? img.cph_spot : img.cph_on_demand;
}

double unit_cost(const ImageType& img, const CostModel& model) {
  if (!(model.alpha > 0)) throw Error(ErrorCode::kInvalidArgument, "alpha", "alpha must be > 0");
  return image_cph(img, model.pricing) / (model.alpha * img.cores + img.memory_gb);
}

double round_unit_cost(double u) { return std::round(u * 1000.0) / 1000.0; }

ConfigCost config_cost(const engine::ClusterConfig& cfg, const ImageType& img, const CostModel& model,
                       std::string id) {
  if (cfg.cores_per_tm() > img.cores || cfg.ram_per_tm_gb() > img.memory_gb) {
    throw Error(ErrorCode::kCapacityExceeded, id.empty() ? img.name : id,
                "taskmanager needs " + std::to_string(cfg.cores_per_tm()) + " cores / " +
                    format_number(cfg.ram_per_tm_gb()) + " GB but " + img.name + " offers " +
                    std::to_string(img.cores) + " / " + format_number(img.memory_gb));
  }
  ConfigCost c;
  c.id = std::move(id);
  c.cores_per_tm = cfg.cores_per_tm();
  c.ram_per_tm_gb = cfg.ram_per_tm_gb();
  c.total_cores = c.cores_per_tm * cfg.taskmanagers();
  c.total_ram_gb = c.ram_per_tm_gb * cfg.taskmanagers();
  c.unit_cost = unit_cost(img, model);
  if (model.paper_rounding) c.unit_cost = round_unit_cost(c.unit_cost);
  c.cph_per_tm = (model.alpha * c.cores_per_tm + c.ram_per_tm_gb) * c.unit_cost;
  c.cph_cluster = (model.alpha * c.total_cores + c.total_ram_gb) * c.unit_cost;
  return c;
}

std::vector<CostPerfRecord> cost_performance_records(const std::vector<RunInput>& runs, const ConfigTables& tables,
                                                     const CostModel& model) {
  std::vector<CostPerfRecord> out;
  for (const auto& run : runs) {
    if (!(run.metrics.wall_time > 0)) {
      throw Error(ErrorCode::kInvalidArgument, run.config_id, "run for " + run.config_id + " has no wall time");
    }
    const auto& row = tables.config(run.config_id);
    auto cluster = row.cluster();
    auto cost = config_cost(cluster, tables.image_for(row), model, row.id);
    out.push_back(CostPerfRecord{row.id, run.metrics.throughput() / 1e6, cost.cph_cluster, cluster.toc(),
                                 cluster.n_slots(), run.hypercache});
  }
  return out;
}

std::string records_header() { return "config_id,throughput_mrps,cph_config,toc,n_slots,hypercache"; }

std::string record_to_csv(const CostPerfRecord& r) {
  return r.config_id + "," + format_number(r.throughput_mrps) + "," + format_number(r.cph_config) + "," +
         format_number(r.toc) + "," + std::to_string(r.n_slots) + "," + (r.hypercache ? "on" : "off");
}

std::string records_to_csv(const std::vector<CostPerfRecord>& records) {
  std::string out = records_header() + "\n";
  for (const auto& r : records) out += record_to_csv(r) + "\n";
  return out;
}

}  // namespace cqlflow::costperf
