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

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cqlflow/catalog/catalog.hpp"
#include "cqlflow/engine/report.hpp"
#include "cqlflow/planner/plan.hpp"
#include "cqlflow/storage/storage.hpp"

namespace cqlflow::engine {

// Cluster shape. Slot count and ToC are derived on demand.
class ClusterConfig {
 public:
  // Throws Error(kInvalidConfig) unless every count is >= 1 and ram > 0.
  ClusterConfig(int taskmanagers, int cores_per_tm, double ram_per_tm_gb, int parallelism);

  int taskmanagers() const { return taskmanagers_; }
  int cores_per_tm() const { return cores_per_tm_; }
  double ram_per_tm_gb() const { return ram_per_tm_gb_; }
  int parallelism() const { return parallelism_; }

  int n_slots() const { return parallelism_ * taskmanagers_; }
  int total_cores() const { return cores_per_tm_ * taskmanagers_; }
  double toc() const { return static_cast<double>(taskmanagers_) / total_cores(); }

  friend bool operator==(const ClusterConfig&, const ClusterConfig&) = default;

 private:
  int taskmanagers_;
  int cores_per_tm_;
  double ram_per_tm_gb_;
  int parallelism_;
};

// Bytes charged per state entry when checking the RAM budget.
inline constexpr uint64_t kStateEntryBytes = 64;

struct RunMetrics {
  double wall_time = 0;  // seconds
  uint64_t resources_scanned = 0;
  std::map<planner::NodeId, uint64_t> rows_emitted;
  std::vector<uint64_t> peak_join_state_entries;   // per slot
  std::vector<uint64_t> peak_dedup_state_entries;  // per slot
  uint64_t values_read = 0;
  uint64_t chunks_read = 0;
  uint64_t chunks_skipped = 0;
  uint64_t bytes_read = 0;
  bool exceeds_ram_budget = false;

  double throughput() const { return wall_time > 0 ? static_cast<double>(resources_scanned) / wall_time : 0.0; }
  uint64_t max_join_state() const;
  uint64_t max_dedup_state() const;

  std::string to_json() const;
  // Throws Error(kMalformedDocument).
  static RunMetrics from_json(std::string_view text);
};

struct SlotAssignment {
  int slot = 0;
  int taskmanager = 0;
  std::vector<uint32_t> partitions;
};

class JobGraph {
 public:
  const planner::LogicalPlan& plan() const { return plan_; }
  const planner::IndexSchema& schema() const { return schema_; }
  const ClusterConfig& config() const { return config_; }
  const std::vector<SlotAssignment>& slots() const { return slots_; }
  uint32_t partitions() const { return partitions_; }
  const catalog::HyperCacheBundle& bundle() const { return *bundle_; }

 private:
  friend JobGraph build_job(const planner::LogicalPlan&, const planner::IndexSchema&, const ClusterConfig&,
                            uint32_t, catalog::HyperCacheBundle);
  JobGraph(planner::LogicalPlan plan, planner::IndexSchema schema, ClusterConfig config)
      : plan_(std::move(plan)), schema_(std::move(schema)), config_(config) {}

  planner::LogicalPlan plan_;
  planner::IndexSchema schema_;
  ClusterConfig config_;
  std::vector<SlotAssignment> slots_;
  uint32_t partitions_ = 0;
  std::shared_ptr<const catalog::HyperCacheBundle> bundle_;
};

// Partitions go to slots round-robin. Throws Error(kInvalidArgument) for a
// partition count of zero or a plan that fails validation, and
// Error(kMissingValueSet) when the bundle lacks a referenced valueset.
JobGraph build_job(const planner::LogicalPlan& plan, const planner::IndexSchema& schema, const ClusterConfig& cfg,
                   uint32_t partitions, catalog::HyperCacheBundle bundle);

struct ExecuteOptions {
  bool collect_flags = true;
  // 0: min(slots, hardware threads).
  int threads = 0;
};

struct RunResult {
  MeasureReport report;
  RunMetrics metrics;
};

// Throws Error(kSchemaMismatch) when the dataset partitioning differs from
// the job, and propagates storage errors.
RunResult execute(const JobGraph& job, const storage::DatasetHandle& data, const ExecuteOptions& options = {});

// ---------------------------------------------------------------------------
// Operators, usable on their own.

// True iff the union of `intervals` clipped to `window` leaves no uncovered
// run longer than `max_gap_days`, counting the runs at either end of the
// window. No intervals: false.
bool coverage_gap_eval(std::span<const DateInterval> intervals, DateInterval window, int max_gap_days);

// Sorted distinct ids. `dedup_state`, when given, receives the peak size of
// the dedup table.
std::vector<int64_t> union_distinct_patients(const std::vector<std::vector<int64_t>>& streams,
                                             uint64_t* dedup_state = nullptr);

bool age_in_range(Date birth, int64_t lo, int64_t hi, Date as_of);

struct SemiJoinResult {
  std::vector<uint32_t> rows;  // indices of matching input rows
  uint64_t peak_state = 0;     // state entries this join held
};

// Broadcast probes the shared compiled set and holds no state of its own
// beyond the set; the baseline builds a private hash table from the set and
// remembers every match.
SemiJoinResult semi_join_valueset(std::span<const CodeRef> codes, const catalog::CompiledValueSet& vs,
                                  planner::JoinMode mode);

}  // namespace cqlflow::engine
