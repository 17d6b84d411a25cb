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
#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>

#include "cqlflow/catalog/catalog.hpp"
#include "cqlflow/common/error.hpp"
#include "cqlflow/common/io.hpp"
#include "cqlflow/oracle/oracle.hpp"
#include "support/support.hpp"

namespace cqlflow::engine {
namespace {

namespace fs = std::filesystem;
using planner::JoinMode;
using testing::bcs;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIo;
}

const ClusterConfig kSmall(1, 1, 4, 1);
const ClusterConfig kWide(4, 4, 16, 4);

RunResult run(const planner::LogicalPlan& plan, const storage::DatasetHandle& data, const ClusterConfig& cfg = kSmall) {
  return pipeline::run_plan(plan, bcs().registry, cfg, data);
}

planner::LogicalPlan opt(bool hypercache = true) { return pipeline::optimized_plan(bcs(), hypercache); }

// -- ClusterConfig

TEST(Cluster, SlotsAndToc) {
  ClusterConfig c(10, 8, 32, 10);
  EXPECT_EQ(c.n_slots(), 100);
  EXPECT_EQ(c.total_cores(), 80);
  EXPECT_DOUBLE_EQ(c.toc(), 0.125);
  EXPECT_EQ(ClusterConfig(1, 1, 1, 1).n_slots(), 1);
}

TEST(Cluster, RejectsEmptyShapes) {
  EXPECT_EQ(code_of([] { ClusterConfig(0, 1, 1, 1); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { ClusterConfig(1, 0, 1, 1); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { ClusterConfig(1, 1, 0, 1); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { ClusterConfig(1, 1, 1, 0); }), ErrorCode::kInvalidConfig);
}

TEST(Job, RoundRobinAssignment) {
  auto plan = opt();
  auto job = build_job(plan, planner::index_schema(plan), ClusterConfig(2, 2, 4, 2), 8,
                       catalog::broadcast_handles(bcs().registry, plan));
  ASSERT_EQ(job.slots().size(), 4u);
  for (const auto& s : job.slots()) {
    EXPECT_EQ(s.partitions, (std::vector<uint32_t>{static_cast<uint32_t>(s.slot), static_cast<uint32_t>(s.slot) + 4}));
    EXPECT_EQ(s.taskmanager, s.slot / 2);
  }
  auto single = build_job(plan, planner::index_schema(plan), kSmall, 8, catalog::broadcast_handles(bcs().registry, plan));
  ASSERT_EQ(single.slots().size(), 1u);
  EXPECT_EQ(single.slots()[0].partitions.size(), 8u);
}

TEST(Job, Errors) {
  auto plan = opt();
  auto schema = planner::index_schema(plan);
  EXPECT_EQ(code_of([&] { build_job(plan, schema, kSmall, 0, catalog::broadcast_handles(bcs().registry, plan)); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { build_job(plan, schema, kSmall, 4, catalog::HyperCacheBundle{}); }),
            ErrorCode::kMissingValueSet);
}

// -- coverage_gap_eval

const DateInterval kWindow{Date::from_ymd(2021, 1, 1), Date::from_ymd(2022, 12, 31)};

DateInterval iv(int y1, unsigned m1, unsigned d1, int y2, unsigned m2, unsigned d2) {
  return {Date::from_ymd(y1, m1, d1), Date::from_ymd(y2, m2, d2)};
}

TEST(Coverage, Examples) {
  std::vector<DateInterval> full = {iv(2020, 1, 1, 2023, 6, 1)};
  EXPECT_TRUE(coverage_gap_eval(full, kWindow, 45));
  // 60-day interior gap: Mar 2 .. Apr 30 uncovered.
  std::vector<DateInterval> gap60 = {iv(2020, 1, 1, 2021, 3, 1), {Date::from_ymd(2021, 3, 1).plus_days(61), kWindow.end}};
  EXPECT_FALSE(coverage_gap_eval(gap60, kWindow, 45));
  std::vector<DateInterval> gap30 = {iv(2020, 1, 1, 2021, 3, 1), {Date::from_ymd(2021, 3, 1).plus_days(31), kWindow.end}};
  EXPECT_TRUE(coverage_gap_eval(gap30, kWindow, 45));
  EXPECT_FALSE(coverage_gap_eval({}, kWindow, 45));
}

TEST(Coverage, EndsOfWindowCount) {
  std::vector<DateInterval> late_start = {{kWindow.start.plus_days(45), kWindow.end}};
  EXPECT_TRUE(coverage_gap_eval(late_start, kWindow, 45));
  late_start[0].start = kWindow.start.plus_days(46);
  EXPECT_FALSE(coverage_gap_eval(late_start, kWindow, 45));
  std::vector<DateInterval> early_end = {{kWindow.start, kWindow.end.plus_days(-45)}};
  EXPECT_TRUE(coverage_gap_eval(early_end, kWindow, 45));
  early_end[0].end = kWindow.end.plus_days(-46);
  EXPECT_FALSE(coverage_gap_eval(early_end, kWindow, 45));
}

// Day-by-day reference.
bool brute_force_coverage(const std::vector<DateInterval>& ivs, DateInterval w, int max_gap) {
  if (ivs.empty()) return false;
  int run = 0;
  for (int32_t d = w.start.days; d <= w.end.days; ++d) {
    bool covered = false;
    for (const auto& i : ivs) covered = covered || (i.start.days <= d && d <= i.end.days);
    run = covered ? 0 : run + 1;
    if (run > max_gap) return false;
  }
  return true;
}

TEST(Coverage, AgreesWithDayByDayCheck) {
  std::mt19937_64 rng(2024);
  int positives = 0;
  for (int t = 0; t < 10000; ++t) {
    int32_t w0 = 18000 + static_cast<int32_t>(rng() % 100);
    DateInterval w{Date{w0}, Date{w0 + static_cast<int32_t>(rng() % 400)}};
    int max_gap = static_cast<int>(rng() % 60);
    std::vector<DateInterval> ivs(rng() % 8);
    for (auto& i : ivs) {
      int32_t a = w0 - 100 + static_cast<int32_t>(rng() % 600);
      i = {Date{a}, Date{a + static_cast<int32_t>(rng() % 200)}};
    }
    bool want = brute_force_coverage(ivs, w, max_gap);
    positives += want;
    ASSERT_EQ(coverage_gap_eval(ivs, w, max_gap), want) << "case " << t;
  }
  EXPECT_GT(positives, 1000);
  EXPECT_LT(positives, 9000);
}

// -- union / age / semi-join

TEST(Union, Examples) {
  uint64_t state = 0;
  EXPECT_EQ(union_distinct_patients({{1, 2}, {2, 3}}, &state), (std::vector<int64_t>{1, 2, 3}));
  EXPECT_EQ(state, 3u);
  EXPECT_TRUE(union_distinct_patients({{}, {}}, &state).empty());
  EXPECT_TRUE(union_distinct_patients({}).empty());
  EXPECT_EQ(union_distinct_patients({{5, 5, 1}, {1}}), (std::vector<int64_t>{1, 5}));
}

int reference_age(Date birth, Date as_of) {
  using namespace std::chrono;
  year_month_day b{sys_days{days{birth.days}}}, a{sys_days{days{as_of.days}}};
  int age = static_cast<int>(a.year()) - static_cast<int>(b.year());
  if (std::pair{static_cast<unsigned>(a.month()), static_cast<unsigned>(a.day())} <
      std::pair{static_cast<unsigned>(b.month()), static_cast<unsigned>(b.day())}) {
    --age;
  }
  return age;
}

TEST(Age, Examples) {
  Date as_of = Date::from_ymd(2022, 12, 31);
  EXPECT_TRUE(age_in_range(Date::from_ymd(1970, 6, 1), 52, 74, as_of));
  EXPECT_TRUE(age_in_range(Date::from_ymd(1970, 12, 31), 52, 74, as_of));
  EXPECT_FALSE(age_in_range(Date::from_ymd(1971, 1, 1), 52, 74, as_of));
  EXPECT_TRUE(age_in_range(Date::from_ymd(1948, 1, 1), 52, 74, as_of));
  EXPECT_FALSE(age_in_range(Date::from_ymd(1947, 12, 31), 52, 74, as_of));
}

TEST(Age, AgreesWithCalendarReference) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20000; ++t) {
    Date birth{static_cast<int32_t>(-3000 + rng() % 25000)};
    Date as_of{static_cast<int32_t>(birth.days + rng() % 36000)};
    int want = reference_age(birth, as_of);
    ASSERT_EQ(age_in_years(birth, as_of), want) << birth.days << " " << as_of.days;
    ASSERT_EQ(age_in_range(birth, 52, 74, as_of), want >= 52 && want <= 74);
  }
  Date leap = Date::from_ymd(2000, 2, 29);
  EXPECT_EQ(age_in_years(leap, Date::from_ymd(2001, 2, 28)), 0);
  EXPECT_EQ(age_in_years(leap, Date::from_ymd(2001, 3, 1)), 1);
}

catalog::CompiledValueSet vs_of(std::vector<CodeRef> members) {
  return catalog::compile_valueset({"vs", "1", std::move(members)});
}

TEST(SemiJoin, Examples) {
  std::vector<CodeRef> rows = {{"S", "a"}, {"S", "b"}, {"S", "c"}};
  auto vs = vs_of({{"S", "b"}});
  for (auto mode : {JoinMode::kBroadcast, JoinMode::kHashJoinBaseline}) {
    auto r = semi_join_valueset(rows, vs, mode);
    EXPECT_EQ(r.rows, (std::vector<uint32_t>{1}));
  }
  EXPECT_EQ(semi_join_valueset(rows, vs, JoinMode::kBroadcast).peak_state, 1u);
  EXPECT_EQ(semi_join_valueset(rows, vs, JoinMode::kHashJoinBaseline).peak_state, 2u);
  EXPECT_THROW(vs_of({}), Error);
}

TEST(SemiJoin, BaselineStateGrowsWithMatches) {
  auto vs = vs_of({{"S", "x"}, {"S", "y"}});
  std::vector<CodeRef> rows(1000, CodeRef{"S", "x"});
  rows.push_back({"T", "x"});
  auto broadcast = semi_join_valueset(rows, vs, JoinMode::kBroadcast);
  auto baseline = semi_join_valueset(rows, vs, JoinMode::kHashJoinBaseline);
  EXPECT_EQ(broadcast.rows, baseline.rows);
  EXPECT_EQ(broadcast.rows.size(), 1000u);
  EXPECT_EQ(broadcast.peak_state, 2u);
  EXPECT_EQ(baseline.peak_state, 1002u);
}

// -- whole runs

TEST(Run, EngineOracleManifestAgree) {
  for (auto format : {storage::Format::kColumnar, storage::Format::kRow}) {
    const auto& ds = testing::dataset({.patients = 2000, .format = format});
    auto engine = run(opt(), ds.handle).report;
    auto oracle = oracle::evaluate_dataset(ds.handle, bcs().ast, bcs().registry, 45);
    auto truth = testing::manifest_report(ds.manifest);
    EXPECT_EQ(engine, oracle);
    EXPECT_EQ(engine, truth);
    EXPECT_EQ(engine.denominator_count, ds.manifest.denominator_count);
  }
}

TEST(Run, EmptyDataset) {
  auto dir = testing::scratch_dir("empty_ds");
  datagen::generate_workload({.n_patients = 0}, bcs().registry, dir);
  auto r = run(opt(), storage::DatasetHandle::open(dir), kWide);
  EXPECT_EQ(r.report.denominator_count, 0);
  EXPECT_EQ(r.report.numerator_count, 0);
  EXPECT_EQ(r.report.exclusion_count, 0);
  EXPECT_TRUE(r.report.flags.empty());
  EXPECT_EQ(r.metrics.resources_scanned, 0u);
}

TEST(Run, ParallelismInvariance) {
  const auto& ds = testing::dataset({.patients = 3000, .partitions = 9});
  auto plan = opt();
  auto ref = run(plan, ds.handle, kSmall).report.to_json();
  for (const auto& cfg : {kWide, ClusterConfig(2, 3, 8, 3), ClusterConfig(3, 1, 2, 1), ClusterConfig(16, 1, 1, 2)}) {
    EXPECT_EQ(run(plan, ds.handle, cfg).report.to_json(), ref);
    for (int threads : {1, 3}) {
      auto r = pipeline::run_plan(plan, bcs().registry, cfg, ds.handle, {.threads = threads});
      EXPECT_EQ(r.report.to_json(), ref);
    }
  }
}

TEST(Run, CountersIndependentOfConfig) {
  const auto& ds = testing::dataset({});
  auto a = run(opt(), ds.handle, kSmall).metrics;
  auto b = run(opt(), ds.handle, kWide).metrics;
  EXPECT_EQ(a.resources_scanned, b.resources_scanned);
  EXPECT_EQ(a.rows_emitted, b.rows_emitted);
  EXPECT_EQ(a.values_read, b.values_read);
  EXPECT_EQ(a.peak_join_state_entries.size(), 1u);
  EXPECT_EQ(b.peak_join_state_entries.size(), 16u);
}

TEST(Run, ResourcesScannedCountsEveryRowRead) {
  const auto& ds = testing::dataset({.format = storage::Format::kRow});
  auto m = run(opt(), ds.handle).metrics;
  // Row mode cannot skip, and the optimized plan reads each referenced table once.
  uint64_t want = 0;
  for (const auto& [kind, fields] : planner::index_schema(opt())) want += ds.manifest.table_rows.at(kind);
  EXPECT_EQ(m.resources_scanned, want);
  auto naive = run(bcs().plan, ds.handle).metrics;
  EXPECT_GT(naive.resources_scanned, m.resources_scanned);
}

TEST(Run, WithoutFlags) {
  const auto& ds = testing::dataset({});
  auto r = pipeline::run_plan(opt(), bcs().registry, kSmall, ds.handle, {.collect_flags = false});
  EXPECT_TRUE(r.report.flags.empty());
  EXPECT_EQ(r.report.denominator_count, ds.manifest.denominator_count);
}

TEST(Run, PlansAgree) {
  const auto& ds = testing::dataset({});
  auto ref = run(bcs().plan, ds.handle).report;
  EXPECT_EQ(run(opt(true), ds.handle).report, ref);
  EXPECT_EQ(run(opt(false), ds.handle).report, ref);
  EXPECT_EQ(ref, testing::manifest_report(ds.manifest));
}

// Every ordering of the passes that yields a valid plan keeps the report.
TEST(Run, PassOrderSoundness) {
  const auto& ds = testing::dataset({.patients = 1500});
  const auto& m = bcs();
  auto ref = testing::manifest_report(ds.manifest);
  using Pass = std::function<planner::LogicalPlan(const planner::LogicalPlan&)>;
  std::vector<Pass> passes = {
      [](const auto& p) { return planner::push_predicates(p); },
      [](const auto& p) { return planner::fuse_shared_scans(p); },
      [&](const auto& p) { return planner::bind_valuesets(p, m.registry, true); },
  };
  std::vector<int> order = {0, 1, 2};
  int runs = 0;
  do {
    for (size_t len = 0; len <= 3; ++len) {
      auto plan = m.plan;
      for (size_t i = 0; i < len; ++i) plan = passes[static_cast<size_t>(order[i])](plan);
      EXPECT_EQ(run(plan, ds.handle).report, ref) << order[0] << order[1] << order[2] << " len " << len;
      ++runs;
    }
  } while (std::next_permutation(order.begin(), order.end()));
  EXPECT_EQ(runs, 24);
}

TEST(Run, BroadcastStateBound) {
  const auto& ds = testing::dataset({});
  auto plan = opt(true);
  auto bound = catalog::broadcast_handles(bcs().registry, plan).total_member_count();
  for (const auto& cfg : {kSmall, kWide}) {
    auto m = run(plan, ds.handle, cfg).metrics;
    for (auto s : m.peak_join_state_entries) EXPECT_LE(s, bound);
    EXPECT_EQ(m.max_join_state(), bound);
  }
}

TEST(Run, BaselineStateExceedsBroadcast) {
  const auto& ds = testing::dataset({});
  auto broadcast = run(opt(true), ds.handle);
  auto baseline = run(opt(false), ds.handle);
  EXPECT_EQ(broadcast.report, baseline.report);
  EXPECT_GT(baseline.metrics.max_join_state(), broadcast.metrics.max_join_state());
  EXPECT_EQ(broadcast.metrics.max_dedup_state(), baseline.metrics.max_dedup_state());
}

TEST(Run, RamBudget) {
  const auto& ds = testing::dataset({});
  EXPECT_FALSE(run(opt(), ds.handle, ClusterConfig(1, 1, 1, 1)).metrics.exceeds_ram_budget);
  EXPECT_TRUE(run(opt(), ds.handle, ClusterConfig(1, 1, 1e-9, 1)).metrics.exceeds_ram_budget);
}

// Pushing keeps node ids, so each scan can be compared with itself.
TEST(Run, PushdownNeverEmitsMore) {
  const auto& ds = testing::dataset({});
  auto unpushed = planner::bind_valuesets(bcs().plan, bcs().registry, true);
  auto pushed = planner::bind_valuesets(planner::push_predicates(bcs().plan), bcs().registry, true);
  ASSERT_EQ(unpushed.scans(), pushed.scans());
  auto a = run(unpushed, ds.handle), b = run(pushed, ds.handle);
  EXPECT_EQ(a.report, b.report);
  int strictly = 0;
  for (auto id : pushed.scans()) {
    EXPECT_LE(b.metrics.rows_emitted.at(id), a.metrics.rows_emitted.at(id)) << id;
    strictly += b.metrics.rows_emitted.at(id) < a.metrics.rows_emitted.at(id);
  }
  EXPECT_GT(strictly, 0);
}

// The pushed Observation scan emits exactly the rows whose end date falls in
// the window, counted here straight from the files.
TEST(Run, ObservationScanEmitsWindowRows) {
  const auto& ds = testing::dataset({});
  auto plan = opt();
  auto m = run(plan, ds.handle).metrics;
  auto scans = plan.scans();
  auto obs_scan = *std::find_if(scans.begin(), scans.end(), [&](auto id) {
    return plan.at(id).template as<planner::Scan>()->resource == ResourceKind::kObservation;
  });
  auto reader = ds.handle.reader(ResourceKind::kObservation);
  int end_field = *table_schema(ResourceKind::kObservation).field_index("effective_time_end");
  uint64_t want = 0;
  for (uint32_t p = 0; p < reader->partition_count(); ++p) {
    for (const auto& rec : reader->read_records(p)) {
      auto d = std::get<Date>(rec[static_cast<size_t>(end_field)]);
      want += d >= ds.manifest.window.start && d <= ds.manifest.window.end;
    }
  }
  EXPECT_EQ(m.rows_emitted.at(obs_scan), want);
  EXPECT_LT(want, ds.manifest.table_rows.at(ResourceKind::kObservation));
}

TEST(Run, ColumnarReadsOnlyReferencedFields) {
  const auto& col = testing::dataset({.patients = 20000});
  const auto& row = testing::dataset({.patients = 20000, .format = storage::Format::kRow});
  auto plan = opt();
  auto a = run(plan, col.handle).metrics;
  auto b = run(plan, row.handle).metrics;
  uint64_t referenced = 0, all = 0;
  for (const auto& [kind, fields] : planner::index_schema(plan)) {
    referenced += row.manifest.table_rows.at(kind) * fields.size();
    all += row.manifest.table_rows.at(kind) * static_cast<uint64_t>(table_schema(kind).field_count());
  }
  EXPECT_EQ(b.values_read, all);
  EXPECT_LE(a.values_read, referenced);
  EXPECT_GT(a.chunks_skipped, 0u);
  EXPECT_EQ(b.chunks_skipped, 0u);
  EXPECT_EQ(run(plan, col.handle).report, run(plan, row.handle).report);
}

fs::path copy_dataset(const fs::path& from, const std::string& name) {
  auto to = testing::scratch_dir(name);
  for (const auto& e : fs::directory_iterator(from)) fs::copy_file(e.path(), to / e.path().filename());
  return to;
}

// A dataset holding only the index schema's columns runs; dropping any
// further column fails.
TEST(Run, IndexSchemaIsSufficientAndMinimal) {
  const auto& ds = testing::dataset({.patients = 1500});
  auto plan = opt();
  auto schema = planner::index_schema(plan);
  auto write_subset = [&](const std::string& name, ResourceKind drop_kind, int drop_field) {
    auto dir = testing::scratch_dir(name);
    fs::copy_file(ds.dir / "manifest.json", dir / "manifest.json");
    for (auto kind : kAllResources) {
      std::vector<int> fields = {0};
      if (auto it = schema.find(kind); it != schema.end()) {
        fields.clear();
        for (const auto& f : it->second) {
          if (!(kind == drop_kind && f.field == drop_field)) fields.push_back(f.field);
        }
      }
      auto reader = ds.handle.reader(kind);
      storage::TableWriter w(dir / storage::table_file_name(kind, ds.handle.format), kind, ds.handle.format,
                             ds.handle.partitions, fields);
      for (uint32_t p = 0; p < ds.handle.partitions; ++p) w.write_partition(p, reader->read_records(p));
      w.finish();
    }
    return storage::DatasetHandle::open(dir);
  };
  auto minimal = write_subset("minimal", ResourceKind::kPatient, -1);
  EXPECT_EQ(run(plan, minimal).report, testing::manifest_report(ds.manifest));
  for (const auto& [kind, fields] : schema) {
    for (const auto& f : fields) {
      if (f.field == kPatientIdField) continue;
      auto h = write_subset("drop", kind, f.field);
      EXPECT_EQ(code_of([&] { run(plan, h); }), ErrorCode::kMissingColumn) << resource_name(kind) << "." << f.name;
    }
  }
}

// Row segments are verified whole; columnar blocks only when read, which the
// storage tests cover.
TEST(Run, CorruptSegmentSurfaces) {
  const auto& ds = testing::dataset({.format = storage::Format::kRow});
  auto dir = copy_dataset(ds.dir, "corrupt_ds");
  auto file = dir / storage::table_file_name(ResourceKind::kObservation, ds.handle.format);
  auto bytes = read_file(file);
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
  { std::ofstream(file, std::ios::binary | std::ios::trunc) << bytes; }
  EXPECT_EQ(code_of([&] { run(opt(), storage::DatasetHandle::open(dir)); }), ErrorCode::kCorruptData);
}

TEST(Run, MissingTableAndPartitionMismatch) {
  const auto& ds = testing::dataset({});
  auto dir = copy_dataset(ds.dir, "missing_ds");
  fs::remove(dir / storage::table_file_name(ResourceKind::kCoverage, ds.handle.format));
  EXPECT_EQ(code_of([&] { storage::DatasetHandle::open(dir); }), ErrorCode::kMissingTable);

  auto plan = opt();
  auto job = build_job(plan, planner::index_schema(plan), kSmall, ds.handle.partitions + 1,
                       catalog::broadcast_handles(bcs().registry, plan));
  EXPECT_EQ(code_of([&] { execute(job, ds.handle); }), ErrorCode::kSchemaMismatch);
}

TEST(Metrics, JsonRoundTrip) {
  const auto& ds = testing::dataset({});
  auto m = run(opt(), ds.handle, kWide).metrics;
  auto back = RunMetrics::from_json(m.to_json());
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_EQ(back.rows_emitted, m.rows_emitted);
  EXPECT_EQ(back.peak_join_state_entries, m.peak_join_state_entries);
  EXPECT_DOUBLE_EQ(back.throughput(), m.throughput());
  EXPECT_GT(m.wall_time, 0);
  EXPECT_EQ(code_of([] { RunMetrics::from_json("{\"wall_time\": 1}"); }), ErrorCode::kMalformedDocument);
}

TEST(Report, JsonRoundTrip) {
  const auto& ds = testing::dataset({});
  auto r = run(opt(), ds.handle).report;
  EXPECT_EQ(MeasureReport::from_json(r.to_json()), r);
  EXPECT_EQ(code_of([] { MeasureReport::from_json("[1,2]"); }), ErrorCode::kMalformedDocument);
}

}  // namespace
}  // namespace cqlflow::engine
