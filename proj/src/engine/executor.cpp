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
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>
#include <variant>

#include "cqlflow/common/error.hpp"
#include "cqlflow/engine/engine.hpp"
#include "operators.hpp"

namespace cqlflow::engine {

using planner::JoinMode;
using planner::LogicalPlan;
using planner::NodeId;
using planner::PlanNode;
using planner::RowPredicate;
using Kind = RowPredicate::Kind;

JobGraph build_job(const LogicalPlan& plan, const planner::IndexSchema& schema, const ClusterConfig& cfg,
                   uint32_t partitions, catalog::HyperCacheBundle bundle) {
  if (partitions == 0) throw Error(ErrorCode::kInvalidArgument, "partitions", "dataset has no partitions");
  planner::validate(plan);
  for (const auto& id : planner::referenced_valuesets(plan)) bundle.at(id);
  JobGraph job(plan, schema, cfg);
  job.partitions_ = partitions;
  job.bundle_ = std::make_shared<const catalog::HyperCacheBundle>(std::move(bundle));
  job.slots_.resize(static_cast<size_t>(cfg.n_slots()));
  for (int s = 0; s < cfg.n_slots(); ++s) {
    job.slots_[static_cast<size_t>(s)].slot = s;
    job.slots_[static_cast<size_t>(s)].taskmanager = s / cfg.parallelism();
  }
  for (uint32_t p = 0; p < partitions; ++p) {
    job.slots_[p % job.slots_.size()].partitions.push_back(p);
  }
  return job;
}

namespace {

using Mask = std::vector<uint8_t>;
using PatientSet = std::vector<int64_t>;

// Rows of one table, as decoded chunks plus a per-chunk selection.
struct RowStream {
  std::shared_ptr<const std::vector<storage::Chunk>> chunks;
  std::vector<std::vector<uint32_t>> selected;

  uint64_t size() const {
    uint64_t n = 0;
    for (const auto& s : selected) n += s.size();
    return n;
  }
  template <typename F>
  void for_each(F f) const {
    for (size_t c = 0; c < selected.size(); ++c) {
      for (uint32_t r : selected[c]) f((*chunks)[c], r);
    }
  }
};

using NodeValue = std::variant<std::monostate, RowStream, PatientSet>;

int find_string(const storage::Column& col, const std::string& text) {
  for (size_t i = 0; i < col.strings.size(); ++i) {
    if (col.strings[i] == text) return static_cast<int>(i);
  }
  return -1;
}

void eval_mask(const RowPredicate& p, const storage::Chunk& chunk, const catalog::HyperCacheBundle& bundle,
               Mask& out) {
  size_t n = chunk.rows;
  out.assign(n, 0);
  switch (p.kind) {
    case Kind::kEquals: {
      const auto& col = chunk.column(p.field);
      int id = find_string(col, p.text);
      if (id < 0) return;
      for (size_t i = 0; i < n; ++i) out[i] = col.ids[i] == static_cast<uint32_t>(id);
      return;
    }
    case Kind::kRange: {
      const auto& col = chunk.column(p.field);
      for (size_t i = 0; i < n; ++i) out[i] = p.lo <= col.ints[i] && col.ints[i] <= p.hi;
      return;
    }
    case Kind::kInValueSet: {
      const auto& col = chunk.column(p.field);
      const auto& vs = bundle.at(p.text);
      std::vector<uint8_t> member(col.codes.size());
      for (size_t i = 0; i < col.codes.size(); ++i) member[i] = vs.contains(col.codes[i]);
      for (size_t i = 0; i < n; ++i) out[i] = member[col.ids[i]];
      return;
    }
    case Kind::kAll: {
      out.assign(n, 1);
      Mask tmp;
      for (const auto& c : p.children) {
        eval_mask(c, chunk, bundle, tmp);
        for (size_t i = 0; i < n; ++i) out[i] &= tmp[i];
      }
      return;
    }
    case Kind::kAny: {
      Mask tmp;
      for (const auto& c : p.children) {
        eval_mask(c, chunk, bundle, tmp);
        for (size_t i = 0; i < n; ++i) out[i] |= tmp[i];
      }
      return;
    }
  }
}

// False only when the chunk provably holds no matching row.
bool may_match(const RowPredicate& p, const storage::ChunkZones& zones, const catalog::HyperCacheBundle& bundle) {
  auto zone = [&]() -> const storage::ZoneMap& { return zones.fields[static_cast<size_t>(p.field)]; };
  switch (p.kind) {
    case Kind::kEquals:
      if (!zone().has_dictionary) return true;
      return std::find(zone().strings.begin(), zone().strings.end(), p.text) != zone().strings.end();
    case Kind::kRange:
      if (!zone().has_range) return true;
      return !(zone().max < p.lo || zone().min > p.hi);
    case Kind::kInValueSet: {
      if (!zone().has_dictionary) return true;
      const auto& vs = bundle.at(p.text);
      return std::any_of(zone().codes.begin(), zone().codes.end(), [&](const CodeRef& c) { return vs.contains(c); });
    }
    case Kind::kAll:
      return std::all_of(p.children.begin(), p.children.end(),
                         [&](const RowPredicate& c) { return may_match(c, zones, bundle); });
    case Kind::kAny:
      return std::any_of(p.children.begin(), p.children.end(),
                         [&](const RowPredicate& c) { return may_match(c, zones, bundle); });
  }
  return true;
}

struct PartitionResult {
  std::vector<uint64_t> rows_emitted;  // by node id
  storage::ScanStats stats;
  uint64_t join_state = 0;
  uint64_t dedup_state = 0;
  MeasureReport report;
};

using Readers = std::map<ResourceKind, std::unique_ptr<storage::TableReader>>;

// Runs every plan node over one partition.
class PartitionRun {
 public:
  PartitionRun(const JobGraph& job, const Readers& readers, const std::vector<NodeId>& order, uint32_t partition,
               bool collect_flags)
      : job_(job), plan_(job.plan()), bundle_(job.bundle()), readers_(readers), order_(order),
        partition_(partition), collect_flags_(collect_flags) {}

  PartitionResult run() {
    values_.assign(static_cast<size_t>(plan_.next_id), {});
    result_.rows_emitted.assign(static_cast<size_t>(plan_.next_id), 0);
    for (NodeId id : order_) {
      const PlanNode& node = plan_.at(id);
      NodeValue v = eval(id, node);
      uint64_t n = 0;
      if (const auto* rows = std::get_if<RowStream>(&v)) n = rows->size();
      if (const auto* set = std::get_if<PatientSet>(&v)) n = set->size();
      if (node.is<planner::Report>()) n = result_.report.flags.size();
      result_.rows_emitted[static_cast<size_t>(id)] = n;
      values_[static_cast<size_t>(id)] = std::move(v);
    }
    return std::move(result_);
  }

 private:
  const RowStream& rows(NodeId id) const { return std::get<RowStream>(values_[static_cast<size_t>(id)]); }
  const PatientSet& set(NodeId id) const { return std::get<PatientSet>(values_[static_cast<size_t>(id)]); }

  NodeValue eval(NodeId id, const PlanNode& node) {
    if (const auto* op = node.as<planner::Scan>()) return scan(*op);
    if (const auto* op = node.as<planner::Filter>()) return filter(rows(node.inputs[0]), op->predicate);
    if (const auto* op = node.as<planner::ValueSetSemiJoin>()) return semi_join(rows(node.inputs[0]), *op);
    if (const auto* op = node.as<planner::AgeFilter>()) return age(rows(node.inputs[0]), *op);
    if (const auto* op = node.as<planner::CoverageGapAgg>()) return coverage(rows(node.inputs[0]), *op);
    if (node.is<planner::ExistsPerPatient>()) return patients_of(rows(node.inputs[0]));
    if (node.is<planner::UnionDistinctPatients>()) {
      std::vector<PatientSet> streams;
      for (NodeId in : node.inputs) streams.push_back(patients_of(rows(in)));
      uint64_t state = 0;
      auto out = union_distinct_patients(streams, &state);
      result_.dedup_state += state;
      return out;
    }
    if (node.is<planner::AndPerPatient>()) {
      PatientSet acc = set(node.inputs[0]);
      for (size_t i = 1; i < node.inputs.size(); ++i) {
        PatientSet next;
        const auto& other = set(node.inputs[i]);
        std::set_intersection(acc.begin(), acc.end(), other.begin(), other.end(), std::back_inserter(next));
        acc = std::move(next);
      }
      return acc;
    }
    if (node.is<planner::OrPerPatient>()) {
      PatientSet acc;
      for (NodeId in : node.inputs) {
        PatientSet next;
        const auto& other = set(in);
        std::set_union(acc.begin(), acc.end(), other.begin(), other.end(), std::back_inserter(next));
        acc = std::move(next);
      }
      return acc;
    }
    if (node.is<planner::Report>()) {
      report(set(node.inputs[0]), set(node.inputs[1]), set(node.inputs[2]));
      return std::monostate{};
    }
    throw Error(ErrorCode::kInvalidArgument, "#" + std::to_string(id), "unknown plan node");
  }

  RowStream scan(const planner::Scan& op) {
    const auto& reader = *readers_.at(op.resource);
    std::set<int> wanted(op.projection.begin(), op.projection.end());
    wanted.insert(kPatientIdField);
    for (const auto& p : op.predicates) p.collect_fields(wanted);
    std::vector<int> fields(wanted.begin(), wanted.end());

    auto chunks = std::make_shared<std::vector<storage::Chunk>>();
    RowStream out;
    Mask mask, tmp;
    auto keep = [&](const storage::ChunkZones& zones) {
      for (const auto& p : op.predicates) {
        if (!may_match(p, zones, bundle_)) return false;
      }
      return true;
    };
    auto sink = [&](storage::Chunk& chunk) {
      mask.assign(chunk.rows, 1);
      for (const auto& p : op.predicates) {
        eval_mask(p, chunk, bundle_, tmp);
        for (size_t i = 0; i < mask.size(); ++i) mask[i] &= tmp[i];
      }
      std::vector<uint32_t> sel;
      for (uint32_t i = 0; i < chunk.rows; ++i) {
        if (mask[i]) sel.push_back(i);
      }
      if (sel.empty()) return;
      out.selected.push_back(std::move(sel));
      chunks->push_back(std::move(chunk));
    };
    reader.scan(partition_, fields, keep, sink, result_.stats);
    out.chunks = std::move(chunks);
    return out;
  }

  RowStream filter(const RowStream& in, const RowPredicate& pred) {
    RowStream out{in.chunks, {}};
    Mask mask;
    for (size_t c = 0; c < in.selected.size(); ++c) {
      eval_mask(pred, (*in.chunks)[c], bundle_, mask);
      std::vector<uint32_t> sel;
      for (uint32_t r : in.selected[c]) {
        if (mask[r]) sel.push_back(r);
      }
      out.selected.push_back(std::move(sel));
    }
    return out;
  }

  RowStream semi_join(const RowStream& in, const planner::ValueSetSemiJoin& op) {
    std::vector<const CodeRef*> codes;
    std::vector<std::pair<uint32_t, uint32_t>> where;
    for (size_t c = 0; c < in.selected.size(); ++c) {
      const auto& col = (*in.chunks)[c].column(op.code_field);
      for (uint32_t r : in.selected[c]) {
        codes.push_back(&col.codes[col.ids[r]]);
        where.emplace_back(static_cast<uint32_t>(c), r);
      }
    }
    auto joined = detail::semi_join_valueset(codes, bundle_.at(op.valueset), op.mode);
    // The broadcast set is charged once per slot, not per join.
    if (op.mode == JoinMode::kHashJoinBaseline) result_.join_state += joined.peak_state;
    RowStream out{in.chunks, std::vector<std::vector<uint32_t>>(in.selected.size())};
    for (uint32_t i : joined.rows) out.selected[where[i].first].push_back(where[i].second);
    return out;
  }

  RowStream age(const RowStream& in, const planner::AgeFilter& op) {
    RowStream out{in.chunks, {}};
    for (size_t c = 0; c < in.selected.size(); ++c) {
      const auto& births = (*in.chunks)[c].column(op.birth_field).ints;
      std::vector<uint32_t> sel;
      for (uint32_t r : in.selected[c]) {
        if (age_in_range(Date{static_cast<int32_t>(births[r])}, op.lo, op.hi, op.as_of)) sel.push_back(r);
      }
      out.selected.push_back(std::move(sel));
    }
    return out;
  }

  PatientSet coverage(const RowStream& in, const planner::CoverageGapAgg& op) {
    std::vector<std::pair<int64_t, DateInterval>> rows;
    in.for_each([&](const storage::Chunk& chunk, uint32_t r) {
      rows.emplace_back(chunk.column(kPatientIdField).ints[r],
                        DateInterval{Date{static_cast<int32_t>(chunk.column(op.start_field).ints[r])},
                                     Date{static_cast<int32_t>(chunk.column(op.end_field).ints[r])}});
    });
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    PatientSet out;
    std::vector<DateInterval> group;
    for (size_t i = 0; i < rows.size();) {
      size_t j = i;
      group.clear();
      while (j < rows.size() && rows[j].first == rows[i].first) group.push_back(rows[j++].second);
      if (coverage_gap_eval(group, op.window, op.max_gap_days)) out.push_back(rows[i].first);
      i = j;
    }
    return out;
  }

  static PatientSet patients_of(const RowStream& in) {
    PatientSet out;
    in.for_each([&](const storage::Chunk& chunk, uint32_t r) { out.push_back(chunk.column(kPatientIdField).ints[r]); });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  void report(const PatientSet& num, const PatientSet& den, const PatientSet& excl) {
    auto& rep = result_.report;
    rep.numerator_count = static_cast<int64_t>(num.size());
    rep.denominator_count = static_cast<int64_t>(den.size());
    rep.exclusion_count = static_cast<int64_t>(excl.size());
    if (!collect_flags_) return;
    PatientSet all;
    std::set_union(num.begin(), num.end(), den.begin(), den.end(), std::back_inserter(all));
    PatientSet any;
    std::set_union(all.begin(), all.end(), excl.begin(), excl.end(), std::back_inserter(any));
    for (int64_t pid : any) {
      rep.flags.push_back(PatientFlags{pid, std::binary_search(den.begin(), den.end(), pid),
                                       std::binary_search(num.begin(), num.end(), pid),
                                       std::binary_search(excl.begin(), excl.end(), pid)});
    }
  }

  const JobGraph& job_;
  const LogicalPlan& plan_;
  const catalog::HyperCacheBundle& bundle_;
  const Readers& readers_;
  const std::vector<NodeId>& order_;
  uint32_t partition_;
  bool collect_flags_;
  std::vector<NodeValue> values_;
  PartitionResult result_;
};

uint64_t broadcast_state(const LogicalPlan& plan, const catalog::HyperCacheBundle& bundle) {
  std::set<std::string> ids;
  for (const auto& [id, node] : plan.nodes) {
    const auto* j = node.as<planner::ValueSetSemiJoin>();
    if (j && j->mode == JoinMode::kBroadcast) ids.insert(j->valueset);
  }
  uint64_t n = 0;
  for (const auto& id : ids) n += bundle.at(id).size();
  return n;
}

}  // namespace

RunResult execute(const JobGraph& job, const storage::DatasetHandle& data, const ExecuteOptions& options) {
  auto started = std::chrono::steady_clock::now();
  if (data.partitions != job.partitions()) {
    throw Error(ErrorCode::kSchemaMismatch, data.dir.string(),
                "dataset has " + std::to_string(data.partitions) + " partitions, job expects " +
                    std::to_string(job.partitions()));
  }
  const auto& plan = job.plan();
  Readers readers;
  for (NodeId id : plan.scans()) {
    auto kind = plan.at(id).as<planner::Scan>()->resource;
    if (!readers.contains(kind)) readers[kind] = data.reader(kind);
  }
  for (const auto& [kind, fields] : job.schema()) {
    auto it = readers.find(kind);
    if (it == readers.end()) continue;
    for (const auto& f : fields) {
      if (!it->second->has_field(f.field)) {
        std::string name = std::string(resource_name(kind)) + "." + f.name;
        throw Error(ErrorCode::kMissingColumn, name, "column " + name + " missing from dataset");
      }
    }
  }
  auto order = plan.topological_order();

  const auto& slots = job.slots();
  std::vector<PartitionResult> parts(job.partitions());
  std::vector<uint64_t> slot_join(slots.size(), 0), slot_dedup(slots.size(), 0);
  std::atomic<size_t> next_slot{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    while (true) {
      size_t s = next_slot.fetch_add(1);
      if (s >= slots.size()) return;
      try {
        for (uint32_t p : slots[s].partitions) {
          parts[p] = PartitionRun(job, readers, order, p, options.collect_flags).run();
          slot_join[s] = std::max(slot_join[s], parts[p].join_state);
          slot_dedup[s] = std::max(slot_dedup[s], parts[p].dedup_state);
        }
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  size_t hw = std::max(1u, std::thread::hardware_concurrency());
  size_t threads = options.threads > 0 ? static_cast<size_t>(options.threads) : std::min(slots.size(), hw);
  threads = std::max<size_t>(1, std::min(threads, slots.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Merge in partition order.
  RunResult out;
  auto& m = out.metrics;
  storage::ScanStats stats;
  for (const auto& part : parts) {
    stats += part.stats;
    out.report.denominator_count += part.report.denominator_count;
    out.report.numerator_count += part.report.numerator_count;
    out.report.exclusion_count += part.report.exclusion_count;
    out.report.flags.insert(out.report.flags.end(), part.report.flags.begin(), part.report.flags.end());
    for (size_t id = 0; id < part.rows_emitted.size(); ++id) {
      if (plan.nodes.contains(static_cast<NodeId>(id))) m.rows_emitted[static_cast<NodeId>(id)] += part.rows_emitted[id];
    }
  }
  uint64_t shared = broadcast_state(plan, job.bundle());
  for (size_t s = 0; s < slots.size(); ++s) slot_join[s] += shared;
  m.resources_scanned = stats.rows_read;
  m.values_read = stats.values_read;
  m.chunks_read = stats.chunks_read;
  m.chunks_skipped = stats.chunks_skipped;
  m.bytes_read = stats.bytes_read;
  m.peak_join_state_entries = slot_join;
  m.peak_dedup_state_entries = slot_dedup;

  const auto& cfg = job.config();
  double budget = cfg.ram_per_tm_gb() * 1e9;
  std::vector<uint64_t> per_tm(static_cast<size_t>(cfg.taskmanagers()), 0);
  for (const auto& slot : slots) {
    per_tm[static_cast<size_t>(slot.taskmanager)] += slot_join[static_cast<size_t>(slot.slot)] +
                                                     slot_dedup[static_cast<size_t>(slot.slot)];
  }
  m.exceeds_ram_budget = std::any_of(per_tm.begin(), per_tm.end(), [&](uint64_t entries) {
    return static_cast<double>(entries * kStateEntryBytes) > budget;
  });
  m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

}  // namespace cqlflow::engine
