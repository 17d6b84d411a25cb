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

#include "cqlflow/common/error.hpp"
#include "cqlflow/common/io.hpp"
#include "cqlflow/planner/plan.hpp"
#include "support/support.hpp"

namespace cqlflow::planner {
namespace {

using testing::bcs;

// A measure whose three defines are given directly.
pipeline::CompiledMeasure measure(const std::string& num, const std::string& den, const std::string& excl) {
  auto in = pipeline::MeasureInputs::bundled();
  in.cql = "parameter \"Measurement Period\" Interval<Date> default Interval[@2021-01-01, @2022-12-31]\n"
           "define \"Numerator\": " + num + "\ndefine \"Denominator\": " + den + "\ndefine \"Exclusions\": " + excl + "\n";
  in.params_json = "{}";
  return pipeline::compile_measure(in);
}

std::vector<NodeId> nodes_of(const LogicalPlan& plan, const std::function<bool(const PlanNode&)>& pred) {
  std::vector<NodeId> out;
  for (const auto& [id, node] : plan.nodes) {
    if (pred(node)) out.push_back(id);
  }
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIo;
}

TEST(Lower, ProcedureScannedPerClause) {
  const auto& plan = bcs().plan;
  EXPECT_GE(plan.count_scans(ResourceKind::kProcedure), 2);
  EXPECT_EQ(plan.count_scans(ResourceKind::kProcedure), 3);
  EXPECT_EQ(plan.count_scans(ResourceKind::kObservation), 1);
  EXPECT_EQ(plan.count_scans(ResourceKind::kMedication), 0);
  for (NodeId id : plan.scans()) EXPECT_TRUE(plan.at(id).as<Scan>()->predicates.empty());
  EXPECT_EQ(plan.nodes.size(), 30u);
  EXPECT_NO_THROW(validate(plan));
}

TEST(Lower, PatientOnlyMeasure) {
  auto m = measure("Patient.gender = 'female'", "Patient.birthDate >= @1950-01-01",
                   "AgeInYearsAt(date from end of \"Measurement Period\") >= 80");
  const auto& plan = m.plan;
  EXPECT_EQ(plan.count_scans(ResourceKind::kPatient), 3);
  EXPECT_EQ(plan.scans().size(), 3u);
  const auto& report = plan.at(plan.report);
  for (NodeId define : report.inputs) {
    // ExistsPerPatient <- (Filter | AgeFilter) <- Scan(Patient)
    const auto& exists = plan.at(define);
    ASSERT_TRUE(exists.is<ExistsPerPatient>());
    const auto& step = plan.at(exists.inputs.at(0));
    ASSERT_TRUE(step.is<Filter>() || step.is<AgeFilter>());
    EXPECT_TRUE(plan.at(step.inputs.at(0)).is<Scan>());
  }
  EXPECT_EQ(plan.at(plan.at(report.inputs[2]).inputs[0]).as<AgeFilter>()->hi, RowPredicate::kMaxBound);
}

TEST(Lower, NegativeGapRejected) {
  EXPECT_EQ(code_of([] { lower(bcs().ast, LowerOptions{-1}); }), ErrorCode::kInvalidArgument);
}

TEST(Push, StatusFilterMovesIntoScan) {
  auto m = measure("exists ([Encounter: \"Hospice Encounter\"] e where e.status = 'completed')",
                   "Patient.gender = 'female'", "Patient.gender = 'male'");
  auto pushed = push_predicates(m.plan);
  auto scans = nodes_of(pushed, [](const PlanNode& n) {
    return n.is<Scan>() && n.as<Scan>()->resource == ResourceKind::kEncounter;
  });
  ASSERT_EQ(scans.size(), 1u);
  const auto& preds = pushed.at(scans[0]).as<Scan>()->predicates;
  ASSERT_EQ(preds.size(), 1u);
  EXPECT_EQ(preds[0], RowPredicate::equals(2, "completed"));
  EXPECT_EQ(predicate_to_text(preds[0], ResourceKind::kEncounter), "status = 'completed'");
  // The valueset filter stays above the scan.
  for (NodeId id : nodes_of(pushed, [](const PlanNode& n) { return n.is<Filter>(); })) {
    EXPECT_EQ(pushed.at(id).as<Filter>()->predicate.kind, RowPredicate::Kind::kInValueSet);
  }
}

TEST(Push, NothingToPushIsIdentity) {
  auto m = measure("exists ([Observation: \"Mammogram\"] m)", "exists ([Condition: \"Absence of Breast\"] c)",
                   "CoverageContinuity(\"Measurement Period\")");
  EXPECT_EQ(push_predicates(m.plan), m.plan);
}

TEST(Push, ReachesFixpoint) {
  auto once = push_predicates(bcs().plan);
  EXPECT_EQ(push_predicates(once), once);
  EXPECT_NO_THROW(validate(once));
  EXPECT_EQ(once.count_scans(ResourceKind::kProcedure), 3);
}

TEST(Fuse, SingleProcedureScanFansOut) {
  auto fused = fuse_shared_scans(push_predicates(bcs().plan));
  auto scans = nodes_of(fused, [](const PlanNode& n) {
    return n.is<Scan>() && n.as<Scan>()->resource == ResourceKind::kProcedure;
  });
  ASSERT_EQ(scans.size(), 1u);
  EXPECT_EQ(fused.consumers().at(scans[0]).size(), 3u);
  EXPECT_EQ(fused.count_scans(ResourceKind::kPatient), 1);
  EXPECT_NO_THROW(validate(fused));
}

TEST(Fuse, DisjointResourcesUnchanged) {
  auto m = measure("exists ([Observation: \"Mammogram\"] m where m.effectiveTime ends during \"Measurement Period\")",
                   "exists ([Condition: \"Absence of Breast\"] c)", "exists ([Encounter: \"Hospice Encounter\"] e)");
  auto pushed = push_predicates(m.plan);
  EXPECT_EQ(fuse_shared_scans(pushed), pushed);
}

TEST(Fuse, AtMostOneScanPerResourceAndProjection) {
  std::vector<LogicalPlan> plans = {bcs().plan,
                                    measure("exists ([Procedure: \"Mastectomy\"] p) or exists ([Procedure: \"Mastectomy\"] q)",
                                            "exists ([Procedure: \"Hospice Intervention\"] p where p.status = 'x')",
                                            "Patient.gender = 'female' and Patient.gender = 'male'")
                                        .plan};
  for (const auto& plan : plans) {
    for (const auto& fused : {fuse_shared_scans(push_predicates(plan)), fuse_shared_scans(plan)}) {
      std::set<std::pair<ResourceKind, std::vector<int>>> seen;
      for (NodeId id : fused.scans()) {
        const auto* s = fused.at(id).as<Scan>();
        EXPECT_TRUE(seen.insert({s->resource, s->projection}).second);
      }
      EXPECT_NO_THROW(validate(fused));
    }
  }
}

TEST(Bind, BroadcastWhenHyperCacheOn) {
  auto bound = bind_valuesets(bcs().plan, bcs().registry, true);
  auto joins = nodes_of(bound, [](const PlanNode& n) { return n.is<ValueSetSemiJoin>(); });
  EXPECT_EQ(joins.size(), 6u);
  for (NodeId id : joins) EXPECT_EQ(bound.at(id).as<ValueSetSemiJoin>()->mode, JoinMode::kBroadcast);
  const auto& obs_join = *bound.at(1).as<ValueSetSemiJoin>();
  EXPECT_EQ(obs_join.valueset, "Mammogram");
  EXPECT_EQ(bound.source_resource(1), ResourceKind::kObservation);
  EXPECT_TRUE(bound.at(bound.at(1).inputs[0]).is<Scan>());
}

TEST(Bind, BaselineWhenHyperCacheOff) {
  auto bound = bind_valuesets(bcs().plan, bcs().registry, false);
  for (NodeId id : nodes_of(bound, [](const PlanNode& n) { return n.is<ValueSetSemiJoin>(); })) {
    EXPECT_EQ(bound.at(id).as<ValueSetSemiJoin>()->mode, JoinMode::kHashJoinBaseline);
  }
  EXPECT_EQ(with_join_mode(bound, JoinMode::kBroadcast), bind_valuesets(bcs().plan, bcs().registry, true));
}

TEST(Bind, UnknownValueSet) {
  auto reg = bcs().registry;
  reg.erase("Mammogram");
  try {
    bind_valuesets(bcs().plan, reg, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownValueSet);
    EXPECT_EQ(e.subject(), "Mammogram");
  }
}

TEST(Optimize, IsTheThreePassesInOrder) {
  const auto& m = bcs();
  EXPECT_EQ(optimize(m.plan, m.registry, true),
            bind_valuesets(fuse_shared_scans(push_predicates(m.plan)), m.registry, true));
  EXPECT_EQ(referenced_valuesets(optimize(m.plan, m.registry, true)),
            (std::set<std::string>{"Absence of Breast", "Hospice Encounter", "Hospice Intervention", "Mammogram",
                                   "Mastectomy"}));
}

TEST(Schema, PatientFields) {
  auto schema = index_schema(optimize(bcs().plan, bcs().registry, true));
  std::vector<std::string> names;
  for (const auto& f : schema.at(ResourceKind::kPatient)) names.push_back(f.name);
  EXPECT_EQ(names, (std::vector<std::string>{"patient_id", "gender", "birth_date"}));
}

TEST(Schema, ObservationFields) {
  auto schema = index_schema(optimize(bcs().plan, bcs().registry, true));
  const auto& obs = schema.at(ResourceKind::kObservation);
  ASSERT_EQ(obs.size(), 3u);
  EXPECT_EQ(obs[0], (IndexField{"patient_id", "integer", 0}));
  EXPECT_EQ(obs[1], (IndexField{"code", "code", 1}));
  EXPECT_EQ(obs[2], (IndexField{"effective_time_end", "interval", 4}));
  EXPECT_FALSE(schema.contains(ResourceKind::kMedication));
}

TEST(Schema, UnreferencedResourceAbsent) {
  auto m = measure("exists ([Observation: \"Mammogram\"] m)", "Patient.gender = 'female'", "Patient.gender = 'male'");
  auto schema = index_schema(m.plan);
  EXPECT_FALSE(schema.contains(ResourceKind::kCoverage));
  EXPECT_EQ(schema.size(), 2u);
}

TEST(Schema, PatientIdAlwaysFirst) {
  for (const auto& [kind, fields] : index_schema(bcs().plan)) {
    ASSERT_FALSE(fields.empty());
    EXPECT_EQ(fields.front().name, "patient_id");
    for (const auto& f : fields) EXPECT_LT(f.field, table_schema(kind).field_count());
  }
}

TEST(Schema, SameBeforeAndAfterPasses) {
  EXPECT_EQ(index_schema(bcs().plan), index_schema(optimize(bcs().plan, bcs().registry, true)));
}

TEST(Golden, NaivePlan) {
  EXPECT_EQ(plan_to_text(bcs().plan), read_file(testing::golden_path("bcs.plan.txt")));
}

TEST(Golden, OptimizedPlan) {
  const auto& m = bcs();
  EXPECT_EQ(plan_to_text(optimize(m.plan, m.registry, true)), read_file(testing::golden_path("bcs.plan-opt.txt")));
  EXPECT_EQ(plan_to_text(optimize(m.plan, m.registry, false)),
            read_file(testing::golden_path("bcs.plan-opt.hypercache-off.txt")));
}

TEST(Golden, Schema) {
  EXPECT_EQ(index_schema_to_text(index_schema(bcs().plan)), read_file(testing::golden_path("bcs.schema.txt")));
}

TEST(Golden, OptimizedTextHasOneProcedureScan) {
  auto text = plan_to_text(optimize(bcs().plan, bcs().registry, true));
  size_t count = 0;
  for (size_t pos = text.find("Scan(Procedure"); pos != std::string::npos; pos = text.find("Scan(Procedure", pos + 1)) {
    ++count;
  }
  EXPECT_EQ(count, 1u);
}

TEST(Validate, RejectsMalformedPlans) {
  auto plan = bcs().plan;
  auto bad_report = plan;
  bad_report.at(bad_report.report).inputs.pop_back();
  EXPECT_EQ(code_of([&] { validate(bad_report); }), ErrorCode::kInvalidArgument);

  auto cycle = plan;
  NodeId scan = cycle.scans().front();
  NodeId consumer = cycle.consumers().at(scan).front();
  cycle.at(scan).inputs.push_back(consumer);
  EXPECT_EQ(code_of([&] { validate(cycle); }), ErrorCode::kInvalidArgument);

  auto wrong_table = plan;
  for (auto& [id, node] : wrong_table.nodes) {
    if (auto* s = node.as<Scan>(); s && s->resource == ResourceKind::kObservation) s->resource = ResourceKind::kPatient;
  }
  EXPECT_EQ(code_of([&] { validate(wrong_table); }), ErrorCode::kInvalidArgument);

  auto valueset_in_scan = push_predicates(plan);
  valueset_in_scan.at(valueset_in_scan.scans().front()).as<Scan>()->predicates.push_back(
      RowPredicate::in_valueset(1, "Mammogram"));
  EXPECT_EQ(code_of([&] { validate(valueset_in_scan); }), ErrorCode::kInvalidArgument);
}

TEST(Text, PredicateForms) {
  auto k = ResourceKind::kProcedure;
  int64_t lo = Date::from_ymd(2021, 1, 1).days, hi = Date::from_ymd(2022, 12, 31).days;
  EXPECT_EQ(predicate_to_text(RowPredicate::range(3, lo, hi), k), "performed_start in [2021-01-01, 2022-12-31]");
  EXPECT_EQ(predicate_to_text(RowPredicate::range(3, lo, RowPredicate::kMaxBound), k), "performed_start >= 2021-01-01");
  EXPECT_EQ(predicate_to_text(RowPredicate::in_valueset(1, "Mastectomy"), k), "code in valueset \"Mastectomy\"");
  EXPECT_EQ(predicate_to_text(RowPredicate::all({}), k), "true");
  EXPECT_EQ(predicate_to_text(RowPredicate::any({}), k), "false");
  EXPECT_EQ(RowPredicate::all({RowPredicate::equals(2, "x")}), RowPredicate::equals(2, "x"));
}

}  // namespace
}  // namespace cqlflow::planner
