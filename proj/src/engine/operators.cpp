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
#include <unordered_set>

#include "cqlflow/common/error.hpp"
#include "operators.hpp"

namespace cqlflow::engine {

namespace {

template <typename CodeAt>
SemiJoinResult semi_join(size_t n, CodeAt code_at, const catalog::CompiledValueSet& vs, planner::JoinMode mode) {
  SemiJoinResult out;
  if (mode == planner::JoinMode::kBroadcast) {
    for (size_t i = 0; i < n; ++i) {
      if (vs.contains(code_at(i))) out.rows.push_back(static_cast<uint32_t>(i));
    }
    out.peak_state = vs.size();
    return out;
  }
  // Build side: a private copy of the valueset. Probe side: every row, with
  // each match kept until the join completes.
  std::unordered_set<CodeRef, CodeRefHash> build(vs.members().begin(), vs.members().end());
  for (size_t i = 0; i < n; ++i) {
    if (build.contains(code_at(i))) out.rows.push_back(static_cast<uint32_t>(i));
  }
  out.peak_state = build.size() + out.rows.size();
  return out;
}

}  // namespace

bool coverage_gap_eval(std::span<const DateInterval> intervals, DateInterval window, int max_gap_days) {
  if (intervals.empty()) return false;
  std::vector<DateInterval> clipped;
  clipped.reserve(intervals.size());
  for (const auto& iv : intervals) {
    Date s = std::max(iv.start, window.start);
    Date e = std::min(iv.end, window.end);
    if (s <= e) clipped.push_back({s, e});
  }
  std::sort(clipped.begin(), clipped.end(), [](const DateInterval& a, const DateInterval& b) {
    return a.start < b.start;
  });
  // First day not yet covered.
  int64_t cursor = window.start.days;
  for (const auto& iv : clipped) {
    if (iv.start.days - cursor > max_gap_days) return false;
    cursor = std::max<int64_t>(cursor, int64_t{iv.end.days} + 1);
  }
  return int64_t{window.end.days} + 1 - cursor <= max_gap_days;
}

std::vector<int64_t> union_distinct_patients(const std::vector<std::vector<int64_t>>& streams,
                                             uint64_t* dedup_state) {
  std::unordered_set<int64_t> seen;
  for (const auto& s : streams) seen.insert(s.begin(), s.end());
  if (dedup_state) *dedup_state = seen.size();
  std::vector<int64_t> out(seen.begin(), seen.end());
  std::sort(out.begin(), out.end());
  return out;
}

bool age_in_range(Date birth, int64_t lo, int64_t hi, Date as_of) {
  int64_t age = age_in_years(birth, as_of);
  return lo <= age && age <= hi;
}

SemiJoinResult semi_join_valueset(std::span<const CodeRef> codes, const catalog::CompiledValueSet& vs,
                                  planner::JoinMode mode) {
  return semi_join(codes.size(), [&](size_t i) -> const CodeRef& { return codes[i]; }, vs, mode);
}

namespace detail {

SemiJoinResult semi_join_valueset(std::span<const CodeRef* const> codes, const catalog::CompiledValueSet& vs,
                                  planner::JoinMode mode) {
  return semi_join(codes.size(), [&](size_t i) -> const CodeRef& { return *codes[i]; }, vs, mode);
}

}  // namespace detail

ClusterConfig::ClusterConfig(int taskmanagers, int cores_per_tm, double ram_per_tm_gb, int parallelism)
    : taskmanagers_(taskmanagers), cores_per_tm_(cores_per_tm), ram_per_tm_gb_(ram_per_tm_gb),
      parallelism_(parallelism) {
  if (taskmanagers < 1 || cores_per_tm < 1 || parallelism < 1) {
    throw Error(ErrorCode::kInvalidConfig, "cluster", "taskmanagers, cores and parallelism must be >= 1");
  }
  if (!(ram_per_tm_gb > 0)) throw Error(ErrorCode::kInvalidConfig, "cluster", "ram per taskmanager must be > 0");
}

}  // namespace cqlflow::engine
