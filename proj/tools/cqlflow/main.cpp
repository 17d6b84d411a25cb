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
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cqlflow/common/error.hpp"
#include "cqlflow/common/io.hpp"
#include "cqlflow/common/resources.hpp"
#include "cqlflow/costperf/costperf.hpp"
#include "cqlflow/datagen/datagen.hpp"
#include "cqlflow/frontend/frontend.hpp"
#include "cqlflow/oracle/oracle.hpp"
#include "cqlflow/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cqlflow;

namespace {

constexpr int kUsageError = 2;
constexpr int kModuleError = 1;

// Options shared by the commands that load a measure. Empty paths fall back
// to the bundled breast cancer screening files.
struct MeasureOptions {
  std::string measure;
  std::string params;
  std::string valuesets;
  int max_gap_days = 45;

  void add(CLI::App* cmd, bool positional_measure = false) {
    if (positional_measure) {
      cmd->add_option("measure", measure, "CQL measure file (default: bundled BCS)");
    } else {
      cmd->add_option("--measure", measure, "CQL measure file (default: bundled BCS)");
    }
    cmd->add_option("--params", params, "parameter bindings JSON (default: bundled)");
    cmd->add_option("--valuesets", valuesets, "valueset JSON (default: bundled)");
    cmd->add_option("--max-gap-days", max_gap_days, "longest allowed coverage gap in days")
        ->check(CLI::NonNegativeNumber);
  }

  pipeline::MeasureInputs inputs() const {
    auto in = pipeline::MeasureInputs::bundled();
    if (!measure.empty()) in.cql = read_file(measure);
    if (!params.empty()) in.params_json = read_file(params);
    if (!valuesets.empty()) in.valuesets_json = read_file(valuesets);
    return in;
  }
};

bool parse_switch(const std::string& text) { return text == "on"; }

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file_atomic(path, text);
  }
}

// -- gen --------------------------------------------------------------------

struct GenArgs {
  int64_t patients = 0;
  double match_rate = 0.2;
  uint64_t seed = 42;
  std::string out;
  std::string format = "col";
  uint32_t partitions = 0;
  int max_gap_days = 45;
  std::string valuesets;
};

int cmd_gen(const GenArgs& a) {
  datagen::WorkloadSpec spec;
  spec.n_patients = a.patients;
  spec.r = a.match_rate;
  spec.seed = a.seed;
  spec.format = storage::parse_format(a.format);
  spec.partitions = a.partitions;
  spec.max_gap_days = a.max_gap_days;
  auto registry = catalog::load_valuesets(a.valuesets.empty() ? std::string(bundled_resource("bcs-valuesets.json"))
                                                              : read_file(a.valuesets));
  auto m = datagen::generate_workload(spec, registry, a.out);
  uint64_t rows = 0;
  for (const auto& [kind, n] : m.table_rows) rows += n;
  std::cout << "patients " << m.n_patients << ", resources " << rows << ", partitions " << m.partitions
            << ", denominator " << m.denominator_count << ", numerator " << m.numerator_count << ", exclusion "
            << m.exclusion_count << "\n";
  return 0;
}

// -- compile ----------------------------------------------------------------

struct CompileArgs {
  MeasureOptions measure;
  std::string emit = "plan-opt";
  std::string hypercache = "on";
  std::string out;
};

int cmd_compile(const CompileArgs& a) {
  auto m = pipeline::compile_measure(a.measure.inputs(), a.measure.max_gap_days);
  std::string text;
  if (a.emit == "ast") {
    text = "Numerator: " + frontend::describe(m.ast.numerator) + "\n" +
           "Denominator: " + frontend::describe(m.ast.denominator) + "\n" +
           "Exclusions: " + frontend::describe(m.ast.exclusions) + "\n";
  } else if (a.emit == "plan") {
    text = planner::plan_to_text(m.plan);
  } else if (a.emit == "plan-opt") {
    text = planner::plan_to_text(pipeline::optimized_plan(m, parse_switch(a.hypercache)));
  } else {
    text = planner::index_schema_to_text(planner::index_schema(pipeline::optimized_plan(m, parse_switch(a.hypercache))));
  }
  emit(a.out, text);
  return 0;
}

// -- run / oracle -----------------------------------------------------------

struct ClusterArgs {
  int taskmanagers = 1;
  int cores_per_tm = 1;
  double ram_per_tm = 16;
  int parallelism = 1;

  void add(CLI::App* cmd) {
    cmd->add_option("--taskmanagers", taskmanagers, "number of taskmanagers");
    cmd->add_option("--cores-per-tm", cores_per_tm, "cores per taskmanager");
    cmd->add_option("--ram-per-tm", ram_per_tm, "RAM per taskmanager in GB");
    cmd->add_option("--parallelism", parallelism, "slots per taskmanager");
  }
  engine::ClusterConfig config() const {
    return engine::ClusterConfig(taskmanagers, cores_per_tm, ram_per_tm, parallelism);
  }
};

struct RunArgs {
  MeasureOptions measure;
  ClusterArgs cluster;
  std::string data;
  std::string hypercache = "on";
  std::string format;
  std::string plan = "plan-opt";
  std::string report;
  std::string metrics;
  bool no_flags = false;
};

int cmd_run(const RunArgs& a) {
  auto m = pipeline::compile_measure(a.measure.inputs(), a.measure.max_gap_days);
  auto cfg = a.cluster.config();
  auto data = storage::DatasetHandle::open(a.data);
  if (!a.format.empty() && storage::parse_format(a.format) != data.format) {
    throw Error(ErrorCode::kSchemaMismatch, a.data,
                "dataset " + a.data + " is stored as " + std::string(storage::format_name(data.format)));
  }
  auto plan = a.plan == "plan" ? m.plan : pipeline::optimized_plan(m, parse_switch(a.hypercache));
  engine::ExecuteOptions options;
  options.collect_flags = !a.no_flags;
  auto result = pipeline::run_plan(plan, m.registry, cfg, data, options);
  emit(a.report, result.report.to_json());
  if (!a.metrics.empty()) write_file_atomic(a.metrics, result.metrics.to_json());
  if (!a.report.empty()) {
    std::cerr << "denominator " << result.report.denominator_count << ", numerator "
              << result.report.numerator_count << ", exclusion " << result.report.exclusion_count << ", "
              << result.metrics.resources_scanned << " resources in " << result.metrics.wall_time << " s\n";
  }
  return 0;
}

struct OracleArgs {
  MeasureOptions measure;
  std::string data;
  std::string report;
};

int cmd_oracle(const OracleArgs& a) {
  auto m = pipeline::compile_measure(a.measure.inputs(), a.measure.max_gap_days);
  auto data = storage::DatasetHandle::open(a.data);
  auto report = oracle::evaluate_dataset(data, m.ast, m.registry, m.max_gap_days);
  emit(a.report, report.to_json());
  return 0;
}

// -- cost / report ----------------------------------------------------------

struct CostArgs {
  std::string config;
  bool spot = false;
  bool paper_rounding = false;
  double alpha = 6.0;
};

costperf::CostModel model_of(bool spot, bool paper_rounding, double alpha) {
  costperf::CostModel model;
  model.alpha = alpha;
  model.pricing = spot ? costperf::Pricing::kSpot : costperf::Pricing::kOnDemand;
  model.paper_rounding = paper_rounding;
  return model;
}

int cmd_cost(const CostArgs& a) {
  auto tables = costperf::load_bundled_tables();
  const auto& row = tables.config(a.config);
  const auto& img = tables.image_for(row);
  auto cluster = row.cluster();
  auto cost = costperf::config_cost(cluster, img, model_of(a.spot, a.paper_rounding, a.alpha), row.id);
  using costperf::format_number;
  std::cout << "config " << row.id << "\n"
            << "image " << img.name << "\n"
            << "taskmanagers " << cluster.taskmanagers() << "\n"
            << "n_slots " << cluster.n_slots() << "\n"
            << "toc " << format_number(cluster.toc()) << "\n"
            << "unit_cost " << format_number(cost.unit_cost) << "\n"
            << "cph_per_tm " << format_number(cost.cph_per_tm) << "\n"
            << "cph_cluster " << format_number(cost.cph_cluster) << "\n";
  return 0;
}

struct ReportArgs {
  std::string runs;
  std::string out;
  bool spot = false;
  bool paper_rounding = false;
  double alpha = 6.0;
};

// runs.json: [{"config": "C18B", "hypercache": true, "metrics": {...} | "path"}]
int cmd_report(const ReportArgs& a) {
  std::vector<costperf::RunInput> runs;
  fs::path base = fs::path(a.runs).parent_path();
  try {
    auto doc = nlohmann::json::parse(read_file(a.runs));
    for (const auto& r : doc) {
      costperf::RunInput in;
      in.config_id = r.at("config").get<std::string>();
      in.hypercache = r.value("hypercache", true);
      const auto& metrics = r.at("metrics");
      in.metrics = metrics.is_string() ? engine::RunMetrics::from_json(read_file(base / metrics.get<std::string>()))
                                       : engine::RunMetrics::from_json(metrics.dump());
      runs.push_back(std::move(in));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, a.runs, a.runs + ": " + e.what());
  }
  auto tables = costperf::load_bundled_tables();
  auto records = costperf::cost_performance_records(runs, tables, model_of(a.spot, a.paper_rounding, a.alpha));
  emit(a.out, costperf::records_to_csv(records));
  return 0;
}

// -- bench ------------------------------------------------------------------

struct BenchArgs {
  MeasureOptions measure;
  std::vector<int64_t> patients;
  std::vector<std::string> configs;
  std::vector<std::string> hypercache = {"on"};
  std::vector<std::string> formats = {"col"};
  int reps = 3;
  double match_rate = 0.2;
  uint64_t seed = 42;
  std::string data_root = "bench-data";
  std::string out;
  std::string summary;
};

std::string clean(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

fs::path ensure_dataset(const BenchArgs& a, int64_t patients, storage::Format format,
                        const catalog::ValueSetRegistry& registry) {
  char name[128];
  std::snprintf(name, sizeof name, "p%lld_r%g_s%llu_%s", static_cast<long long>(patients), a.match_rate,
                static_cast<unsigned long long>(a.seed), std::string(storage::format_name(format)).c_str());
  fs::path dir = fs::path(a.data_root) / name;
  if (fs::exists(dir / "manifest.json")) return dir;
  datagen::WorkloadSpec spec;
  spec.n_patients = patients;
  spec.r = a.match_rate;
  spec.seed = a.seed;
  spec.format = format;
  spec.max_gap_days = a.measure.max_gap_days;
  datagen::generate_workload(spec, registry, dir);
  return dir;
}

int cmd_bench(const BenchArgs& a) {
  auto m = pipeline::compile_measure(a.measure.inputs(), a.measure.max_gap_days);
  auto tables = costperf::load_bundled_tables();
  costperf::CostModel model;

  std::string rows =
      "patients,format,config_id,hypercache,rep,status,error,throughput_mrps,cph_config,toc,n_slots,wall_time,"
      "resources_scanned,values_read,chunks_skipped,peak_join_state,peak_dedup_state,rows_emitted\n";
  std::string summary = "patients,format,config_id,hypercache,status,reps_ok,median_throughput_mrps,"
                        "median_wall_time,cph_config,toc,n_slots\n";
  int failed = 0;
  for (int64_t patients : a.patients) {
    for (const auto& fmt : a.formats) {
      auto format = storage::parse_format(fmt);
      std::optional<storage::DatasetHandle> data;
      std::string data_error;
      try {
        data = storage::DatasetHandle::open(ensure_dataset(a, patients, format, m.registry));
      } catch (const Error& e) {
        data_error = e.what();
      }
      for (const auto& config_id : a.configs) {
        for (const auto& hc : a.hypercache) {
          std::vector<double> throughputs, walls;
          std::string cell = std::to_string(patients) + "," + std::string(storage::format_name(format)) + "," +
                             clean(config_id) + "," + hc;
          double cph = 0, toc = 0;
          int slots = 0;
          std::string status = "ok";
          for (int rep = 0; rep < a.reps; ++rep) {
            std::string line = cell + "," + std::to_string(rep) + ",";
            try {
              if (!data) throw Error(ErrorCode::kIo, "dataset", data_error);
              const auto& row = tables.config(config_id);
              auto cluster = row.cluster();
              auto cost = costperf::config_cost(cluster, tables.image_for(row), model, row.id);
              auto plan = pipeline::optimized_plan(m, parse_switch(hc));
              engine::ExecuteOptions options;
              options.collect_flags = false;
              auto result = pipeline::run_plan(plan, m.registry, cluster, *data, options);
              const auto& mt = result.metrics;
              cph = cost.cph_cluster;
              toc = cluster.toc();
              slots = cluster.n_slots();
              throughputs.push_back(mt.throughput() / 1e6);
              walls.push_back(mt.wall_time);
              std::string counters;
              for (const auto& [id, n] : mt.rows_emitted) {
                counters += (counters.empty() ? "" : ";") + std::to_string(id) + "=" + std::to_string(n);
              }
              line += "ok,," + costperf::format_number(mt.throughput() / 1e6) + "," + costperf::format_number(cph) +
                      "," + costperf::format_number(toc) + "," + std::to_string(slots) + "," +
                      costperf::format_number(mt.wall_time) + "," + std::to_string(mt.resources_scanned) + "," +
                      std::to_string(mt.values_read) + "," + std::to_string(mt.chunks_skipped) + "," +
                      std::to_string(mt.max_join_state()) + "," + std::to_string(mt.max_dedup_state()) + "," +
                      counters;
            } catch (const Error& e) {
              ++failed;
              status = "failed";
              line += "failed," + clean(e.what()) + ",,,,,,,,,,,";
            }
            rows += line + "\n";
          }
          summary += cell + "," + status + "," + std::to_string(throughputs.size()) + "," +
                     (throughputs.empty() ? "" : costperf::format_number(median(throughputs))) + "," +
                     (walls.empty() ? "" : costperf::format_number(median(walls))) + "," +
                     (throughputs.empty() ? "" : costperf::format_number(cph)) + "," +
                     (throughputs.empty() ? "" : costperf::format_number(toc)) + "," +
                     (throughputs.empty() ? "" : std::to_string(slots)) + "\n";
        }
      }
    }
  }
  emit(a.out, rows);
  std::string summary_path = a.summary;
  if (summary_path.empty() && !a.out.empty() && a.out != "-") summary_path = a.out + ".summary.csv";
  if (!summary_path.empty()) write_file_atomic(summary_path, summary);
  if (failed) std::cerr << failed << " bench cell repetitions failed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cqlflow: compile and run clinical quality measures over partitioned patient data"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic patient dataset");
  g->add_option("--patients", gen.patients, "number of patients")->required()->check(CLI::NonNegativeNumber);
  g->add_option("--match-rate", gen.match_rate, "per-rule flag probability");
  g->add_option("--seed", gen.seed, "generator seed");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--format", gen.format, "row or col")->check(CLI::IsMember({"row", "col", "columnar"}));
  g->add_option("--partitions", gen.partitions, "partition count (default: by size)");
  g->add_option("--max-gap-days", gen.max_gap_days, "coverage gap allowance")->check(CLI::NonNegativeNumber);
  g->add_option("--valuesets", gen.valuesets, "valueset JSON (default: bundled)");

  CompileArgs compile;
  auto* c = app.add_subcommand("compile", "print the AST, plans or index schema of a measure");
  compile.measure.add(c, true);
  c->add_option("--emit", compile.emit, "ast, plan, plan-opt or schema")
      ->check(CLI::IsMember({"ast", "plan", "plan-opt", "schema"}));
  c->add_option("--hypercache", compile.hypercache, "on or off")->check(CLI::IsMember({"on", "off"}));
  c->add_option("--out", compile.out, "output file (default: stdout)");

  RunArgs run;
  auto* r = app.add_subcommand("run", "execute a measure with the engine");
  run.measure.add(r);
  run.cluster.add(r);
  r->add_option("--data", run.data, "dataset directory")->required();
  r->add_option("--hypercache", run.hypercache, "on or off")->check(CLI::IsMember({"on", "off"}));
  r->add_option("--format", run.format, "expected dataset format")->check(CLI::IsMember({"row", "col", "columnar"}));
  r->add_option("--plan", run.plan, "plan or plan-opt")->check(CLI::IsMember({"plan", "plan-opt"}));
  r->add_option("--report", run.report, "report JSON (default: stdout)");
  r->add_option("--metrics", run.metrics, "metrics JSON");
  r->add_flag("--no-flags", run.no_flags, "omit the per-patient flag list");

  OracleArgs orc;
  auto* o = app.add_subcommand("oracle", "evaluate a measure with the reference interpreter");
  orc.measure.add(o);
  o->add_option("--data", orc.data, "dataset directory")->required();
  o->add_option("--report", orc.report, "report JSON (default: stdout)");

  CostArgs cost;
  auto* co = app.add_subcommand("cost", "price a configuration from the bundled tables");
  co->add_option("--config", cost.config, "configuration id, e.g. C18B")->required();
  co->add_flag("--spot", cost.spot, "use spot prices");
  co->add_flag("--paper-rounding", cost.paper_rounding, "round the unit cost to three decimals");
  co->add_option("--alpha", cost.alpha, "CPU to RAM weight");

  ReportArgs rep;
  auto* re = app.add_subcommand("report", "join run metrics with configuration costs");
  re->add_option("--runs", rep.runs, "runs JSON")->required();
  re->add_option("--out", rep.out, "records CSV (default: stdout)");
  re->add_flag("--spot", rep.spot, "use spot prices");
  re->add_flag("--paper-rounding", rep.paper_rounding, "round the unit cost to three decimals");
  re->add_option("--alpha", rep.alpha, "CPU to RAM weight");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "run a workload by configuration grid");
  bench.measure.add(b);
  b->add_option("--patients", bench.patients, "workload sizes")->required()->delimiter(',');
  b->add_option("--configs", bench.configs, "configuration ids")->required()->delimiter(',');
  b->add_option("--hypercache", bench.hypercache, "on,off")->delimiter(',')->check(CLI::IsMember({"on", "off"}));
  b->add_option("--formats", bench.formats, "row,col")->delimiter(',')->check(CLI::IsMember({"row", "col"}));
  b->add_option("--reps", bench.reps, "repetitions per cell")->check(CLI::PositiveNumber);
  b->add_option("--match-rate", bench.match_rate, "per-rule flag probability");
  b->add_option("--seed", bench.seed, "generator seed");
  b->add_option("--data-root", bench.data_root, "where generated datasets live");
  b->add_option("--out", bench.out, "results CSV (default: stdout)");
  b->add_option("--summary", bench.summary, "median summary CSV (default: <out>.summary.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (g->parsed()) return cmd_gen(gen);
    if (c->parsed()) return cmd_compile(compile);
    if (r->parsed()) return cmd_run(run);
    if (o->parsed()) return cmd_oracle(orc);
    if (co->parsed()) return cmd_cost(cost);
    if (re->parsed()) return cmd_report(rep);
    if (b->parsed()) return cmd_bench(bench);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kModuleError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kModuleError;
  }
  return kUsageError;
}
