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

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "cqlflow/common/io.hpp"
#include "cqlflow/costperf/costperf.hpp"
#include "support/support.hpp"

namespace cqlflow {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome cli(const std::string& args) {
  static int n = 0;
  auto dir = testing::scratch_dir("cli_io");
  auto out = dir / ("out" + std::to_string(n)), err = dir / ("err" + std::to_string(n));
  ++n;
  std::string cmd = testing::cli_path() + " " + args + " >" + out.string() + " 2>" + err.string();
  int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = read_file(out);
  o.err = read_file(err);
  return o;
}

size_t count_of(const std::string& text, const std::string& needle) {
  size_t n = 0;
  for (size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// One small dataset shared by the tests below.
const fs::path& data_dir() {
  static const fs::path dir = [] {
    auto d = testing::scratch_dir("cli_data") / "ds";
    auto o = cli("gen --patients 400 --seed 5 --out " + d.string());
    EXPECT_EQ(o.code, 0) << o.err;
    return d;
  }();
  return dir;
}

TEST(Gen, WritesTablesAndManifest) {
  const auto& d = data_dir();
  EXPECT_TRUE(fs::exists(d / "manifest.json"));
  auto h = storage::DatasetHandle::open(d);
  EXPECT_EQ(h.format, storage::Format::kColumnar);
  auto m = datagen::TruthManifest::from_json(read_file(d / "manifest.json"));
  EXPECT_EQ(m.n_patients, 400);
  EXPECT_EQ(m.seed, 5u);

  auto row = testing::scratch_dir("cli_row") / "ds";
  auto o = cli("gen --patients 50 --match-rate 0.3 --format row --partitions 3 --out " + row.string());
  ASSERT_EQ(o.code, 0) << o.err;
  auto hr = storage::DatasetHandle::open(row);
  EXPECT_EQ(hr.format, storage::Format::kRow);
  EXPECT_EQ(hr.partitions, 3u);
}

TEST(Gen, UsageErrors) {
  EXPECT_EQ(cli("gen --out /tmp/x").code, 2);
  EXPECT_EQ(cli("gen --patients 10").code, 2);
  EXPECT_EQ(cli("gen --patients 10 --format parquet --out /tmp/x").code, 2);
  auto o = cli("gen --patients 10 --match-rate 1.5 --out " + (testing::scratch_dir("bad_r") / "x").string());
  EXPECT_EQ(o.code, 1);
  EXPECT_FALSE(o.err.empty());
}

TEST(Compile, PlanShapes) {
  auto plan = cli("compile --emit plan");
  ASSERT_EQ(plan.code, 0) << plan.err;
  EXPECT_GE(count_of(plan.out, "Scan(Procedure"), 2u);
  auto opt = cli("compile --emit plan-opt");
  ASSERT_EQ(opt.code, 0);
  EXPECT_EQ(count_of(opt.out, "Scan(Procedure"), 1u);
  EXPECT_EQ(opt.out, read_file(testing::golden_path("bcs.plan-opt.txt")));
  auto explicit_file = cli("compile " + std::string(CQLFLOW_DATA_DIR) + "/bcs.cql --emit plan-opt");
  EXPECT_EQ(explicit_file.out, opt.out);
  EXPECT_EQ(cli("compile --emit plan-opt --hypercache off").out,
            read_file(testing::golden_path("bcs.plan-opt.hypercache-off.txt")));
  EXPECT_EQ(cli("compile --emit schema").out, read_file(testing::golden_path("bcs.schema.txt")));
  auto ast = cli("compile --emit ast");
  EXPECT_EQ(ast.code, 0);
  EXPECT_NE(ast.out.find("Numerator"), std::string::npos);
}

TEST(Compile, ToFileAndErrors) {
  auto out = testing::scratch_dir("cli_compile") / "plan.txt";
  ASSERT_EQ(cli("compile --emit plan --out " + out.string()).code, 0);
  EXPECT_EQ(read_file(out), read_file(testing::golden_path("bcs.plan.txt")));

  auto bad = testing::scratch_dir("cli_bad") / "bad.cql";
  write_file_atomic(bad, "library X\ndefine \"Numerator\": Foo(\n");
  auto o = cli("compile " + bad.string() + " --emit plan");
  EXPECT_EQ(o.code, 1);
  EXPECT_FALSE(o.err.empty());
  EXPECT_EQ(cli("compile --emit tree").code, 2);
  EXPECT_EQ(cli("compile /nonexistent/m.cql").code, 1);
}

TEST(Run, ReportMatchesManifestAndIsStable) {
  auto dir = testing::scratch_dir("cli_run");
  std::string base = "run --data " + data_dir().string() + " --taskmanagers 2 --parallelism 2 ";
  ASSERT_EQ(cli(base + "--report " + (dir / "a.json").string() + " --metrics " + (dir / "m.json").string()).code, 0);
  ASSERT_EQ(cli("run --data " + data_dir().string() + " --report " + (dir / "b.json").string()).code, 0);
  ASSERT_EQ(cli(base + "--plan plan --hypercache off --report " + (dir / "c.json").string()).code, 0);
  auto a = read_file(dir / "a.json");
  EXPECT_EQ(a, read_file(dir / "b.json"));
  EXPECT_EQ(a, read_file(dir / "c.json"));
  auto manifest = datagen::TruthManifest::from_json(read_file(data_dir() / "manifest.json"));
  EXPECT_EQ(engine::MeasureReport::from_json(a), testing::manifest_report(manifest));
  auto metrics = engine::RunMetrics::from_json(read_file(dir / "m.json"));
  EXPECT_EQ(metrics.peak_join_state_entries.size(), 4u);
  EXPECT_GT(metrics.resources_scanned, 0u);

  auto oracle = cli("oracle --data " + data_dir().string());
  ASSERT_EQ(oracle.code, 0);
  EXPECT_EQ(engine::MeasureReport::from_json(oracle.out), engine::MeasureReport::from_json(a));

  auto noflags = cli("run --no-flags --data " + data_dir().string());
  EXPECT_EQ(engine::MeasureReport::from_json(noflags.out).flags.size(), 0u);
}

TEST(Run, ExitCodes) {
  EXPECT_EQ(cli("run").code, 2);
  EXPECT_EQ(cli("run --data " + data_dir().string() + " --taskmanagers 0").code, 1);
  EXPECT_EQ(cli("run --data /nonexistent/dataset").code, 1);
  EXPECT_EQ(cli("run --data " + data_dir().string() + " --format row").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 2);
}

TEST(Cost, RoundedC18B) {
  auto o = cli("cost --config C18B --paper-rounding");
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("cph_per_tm 0.14\n"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("unit_cost 0.005\n"), std::string::npos) << o.out;
  auto exact = cli("cost --config C18B");
  EXPECT_NE(exact.out.find("unit_cost 0.0048\n"), std::string::npos) << exact.out;
  EXPECT_EQ(cli("cost --config C99").code, 1);
  EXPECT_EQ(cli("cost").code, 2);
  EXPECT_EQ(cli("cost --config C1 --spot").code, 0);
}

TEST(Report, JoinsRunsWithCosts) {
  auto dir = testing::scratch_dir("cli_report");
  engine::RunMetrics m;
  m.wall_time = 0.5;
  m.resources_scanned = 2'000'000;
  write_file_atomic(dir / "m.json", m.to_json());
  write_file_atomic(dir / "runs.json", R"([{"config": "C18B", "hypercache": true, "metrics": "m.json"},
    {"config": "C1", "hypercache": false, "metrics": )" + m.to_json() + "}]");
  auto o = cli("report --runs " + (dir / "runs.json").string() + " --out " + (dir / "r.csv").string());
  ASSERT_EQ(o.code, 0) << o.err;
  auto rows = lines(read_file(dir / "r.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], costperf::records_header());
  EXPECT_EQ(rows[1].rfind("C18B,4,", 0), 0u) << rows[1];
  EXPECT_EQ(rows[2].substr(rows[2].size() - 4), ",off");
  write_file_atomic(dir / "bad.json", "[{\"config\": \"C1\"}]");
  EXPECT_EQ(cli("report --runs " + (dir / "bad.json").string()).code, 1);
}

TEST(Bench, GridRowsAndFailedCells) {
  auto dir = testing::scratch_dir("cli_bench");
  auto o = cli("bench --patients 60 120 --configs C1 C3 --hypercache on off --reps 3 --formats col --data-root " +
               (dir / "data").string() + " --out " + (dir / "r.csv").string());
  ASSERT_EQ(o.code, 0) << o.err;
  auto rows = lines(read_file(dir / "r.csv"));
  ASSERT_EQ(rows.size(), 1u + 2 * 2 * 2 * 3);
  for (size_t i = 1; i < rows.size(); ++i) EXPECT_NE(rows[i].find(",ok,"), std::string::npos) << rows[i];
  auto summary = lines(read_file(dir / "r.csv.summary.csv"));
  EXPECT_EQ(summary.size(), 1u + 2 * 2 * 2);

  auto f = cli("bench --patients 60 --configs C1 NOPE --reps 1 --data-root " + (dir / "data").string() + " --out " +
               (dir / "f.csv").string());
  EXPECT_EQ(f.code, 0);
  auto frows = lines(read_file(dir / "f.csv"));
  // Defaults: one format and one hypercache mode per cell; the bad cell is
  // recorded and the grid carries on.
  ASSERT_EQ(frows.size(), 3u);
  EXPECT_NE(frows[1].find(",ok,"), std::string::npos);
  EXPECT_NE(frows[2].find(",failed,UnknownConfig(NOPE)"), std::string::npos) << frows[2];
  EXPECT_FALSE(f.err.empty());
}

TEST(Help, EverySubcommand) {
  for (std::string sub : {"gen", "compile", "run", "oracle", "cost", "report", "bench"}) {
    auto o = cli(sub + " --help");
    EXPECT_EQ(o.code, 0) << sub;
    EXPECT_NE(o.out.find("Usage"), std::string::npos) << sub;
  }
}

}  // namespace
}  // namespace cqlflow
