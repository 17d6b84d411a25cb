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
#include <string>
#include <string_view>
#include <vector>

#include "cqlflow/engine/engine.hpp"

namespace cqlflow::costperf {

struct ImageType {
  std::string name;
  double cph_on_demand = 0;
  double cph_spot = 0;
  double cph_reserved = 0;
  std::string cpu;
  double memory_gb = 0;  // N_r
  int cores = 0;         // N_c
  double network_bw_gbps = 0;
  double ebs_bw_gbps = 0;
  std::string storage;

  friend bool operator==(const ImageType&, const ImageType&) = default;
};

// One row of the configuration table; resources are per taskmanager.
struct ConfigRow {
  std::string id;
  std::string family;
  int taskmanagers = 0;
  int cores_per_tm = 0;
  double ram_per_tm_gb = 0;
  int parallelism = 0;
  double network_bw_gbps = 0;
  double ebs_bw_gbps = 0;

  engine::ClusterConfig cluster() const {
    return engine::ClusterConfig(taskmanagers, cores_per_tm, ram_per_tm_gb, parallelism);
  }
  friend bool operator==(const ConfigRow&, const ConfigRow&) = default;
};

struct ConfigTables {
  std::vector<ConfigRow> configs;
  std::vector<ImageType> images;
  std::map<std::string, std::string> families;  // family -> image name

  // Throw Error(kUnknownConfig) / Error(kUnknownImage).
  const ConfigRow& config(std::string_view id) const;
  const ImageType& image(std::string_view name) const;
  const ImageType& image_for(const ConfigRow& row) const;
};

// Throws Error(kMalformedDocument) on bad rows and Error(kUnknownImage) when a
// configuration names a family without an image.
ConfigTables load_config_tables(std::string_view configs_csv, std::string_view images_csv,
                                std::string_view families_csv);
ConfigTables load_bundled_tables();

std::string configs_to_csv(const std::vector<ConfigRow>& configs);
std::string images_to_csv(const std::vector<ImageType>& images);
std::string families_to_csv(const std::map<std::string, std::string>& families);

enum class Pricing { kOnDemand, kSpot };

struct CostModel {
  double alpha = 6.0;
  Pricing pricing = Pricing::kOnDemand;
  // Round the unit cost to three decimals before pricing a configuration.
  bool paper_rounding = false;
};

double image_cph(const ImageType& img, Pricing pricing);

// CpH / (alpha * N_c + N_r). Throws Error(kInvalidArgument) unless alpha > 0.
double unit_cost(const ImageType& img, const CostModel& model);

double round_unit_cost(double u);

struct ConfigCost {
  std::string id;
  double cores_per_tm = 0;
  double ram_per_tm_gb = 0;
  double total_cores = 0;
  double total_ram_gb = 0;
  double unit_cost = 0;
  double cph_per_tm = 0;
  double cph_cluster = 0;
};

// Throws Error(kCapacityExceeded) when a taskmanager needs more cores or RAM
// than one node of the image provides.
ConfigCost config_cost(const engine::ClusterConfig& cfg, const ImageType& img, const CostModel& model,
                       std::string id = {});

struct RunInput {
  std::string config_id;
  bool hypercache = true;
  engine::RunMetrics metrics;
};

struct CostPerfRecord {
  std::string config_id;
  double throughput_mrps = 0;  // million resources per second
  double cph_config = 0;       // whole cluster
  double toc = 0;
  int n_slots = 0;
  bool hypercache = true;
};

// Throws Error(kInvalidArgument) for a run without positive wall time.
std::vector<CostPerfRecord> cost_performance_records(const std::vector<RunInput>& runs, const ConfigTables& tables,
                                                     const CostModel& model);
std::string records_header();
std::string record_to_csv(const CostPerfRecord& r);
std::string records_to_csv(const std::vector<CostPerfRecord>& records);

// Shortest text that parses back to the same double.
std::string format_number(double v);

}  // namespace cqlflow::costperf
