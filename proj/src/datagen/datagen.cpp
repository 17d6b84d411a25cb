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
#include "cqlflow/datagen/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "json.hpp"

#include "cqlflow/common/error.hpp"
#include "cqlflow/common/io.hpp"

namespace cqlflow::datagen {

namespace {

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ull;

uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

using CodeSet = std::unordered_set<CodeRef, CodeRefHash>;

enum class Pick { kValid, kInvalid, kFree };

// Exclusion clauses, in measure order.
enum Clause { kHospiceEncounter, kHospiceIntervention, kMastectomyCompleted, kMastectomyFinished, kAbsenceOfBreast };

constexpr int kFreeDaysBefore = 5 * 365 + 1;

}  // namespace

double TableMeans::mean_for(ResourceKind kind) const {
  switch (kind) {
    case ResourceKind::kPatient: return 1.0;
    case ResourceKind::kCondition: return condition;
    case ResourceKind::kEncounter: return encounter;
    case ResourceKind::kMedication: return medication;
    case ResourceKind::kProcedure: return procedure;
    case ResourceKind::kObservation: return observation;
    case ResourceKind::kCoverage: return coverage;
  }
  return 0;
}

GenerationPlan derive_generation_plan(double r, const TableMeans& means) {
  if (!(r > 0.0 && r < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "match_rate", "match rate must lie strictly between 0 and 1");
  }
  for (auto kind : kAllResources) {
    if (!(means.mean_for(kind) > 0)) {
      throw Error(ErrorCode::kInvalidArgument, "means", "table means must be positive");
    }
  }
  GenerationPlan plan;
  plan.r = r;
  plan.p_patient_valid = std::sqrt(r);
  plan.p_coverage_valid = std::sqrt(r);
  plan.p_numerator_flag = r;
  plan.p_exclusion_flag = r;
  plan.means = means;
  plan.total_per_patient = means.total_per_patient();
  plan.valid_per_patient = r * plan.total_per_patient;
  return plan;
}

StreamRng::StreamRng(uint64_t seed, uint64_t key) : key_(mix64(seed ^ mix64(key + kGolden))) {}

StreamRng::result_type StreamRng::operator()() { return mix64(key_ + (++counter_) * kGolden); }

DateInterval default_window() { return {Date::from_ymd(2021, 1, 1), Date::from_ymd(2022, 12, 31)}; }

uint32_t default_partitions(int64_t n_patients) {
  int64_t p = (std::max<int64_t>(n_patients, 0) + 16383) / 16384;
  return static_cast<uint32_t>(std::max<int64_t>(4, p));
}

// ---------------------------------------------------------------------------

struct Generator::Pools {
  std::vector<CodeRef> mammogram, hospice_encounter, hospice_intervention, mastectomy, absence_of_breast;
  CodeSet mammogram_set, hospice_encounter_set, hospice_intervention_set, mastectomy_set, absence_set;
  std::vector<CodeRef> other_observation, other_encounter, other_procedure, other_condition, other_medication;
};

namespace {

void load_members(const catalog::ValueSetRegistry& registry, const std::string& id,
                  std::vector<CodeRef>& list, CodeSet& set) {
  auto it = registry.find(id);
  if (it == registry.end()) throw Error(ErrorCode::kMissingValueSet, id);
  for (const auto& c : it->second.members) {
    if (set.insert(c).second) list.push_back(c);
  }
  if (list.empty()) throw Error(ErrorCode::kEmptyValueSet, id);
}

template <typename F>
std::vector<CodeRef> outside_codes(const std::string& system, F make, const std::vector<const CodeSet*>& avoid) {
  std::vector<CodeRef> out;
  for (int k = 0; out.size() < 200; ++k) {
    CodeRef c{system, make(k)};
    bool member = std::any_of(avoid.begin(), avoid.end(), [&](const CodeSet* s) { return s->contains(c); });
    if (!member) out.push_back(std::move(c));
  }
  return out;
}

const std::vector<std::string> kEncounterStatus = {"completed", "in-progress", "cancelled", "planned", "finished"};
const std::vector<std::string> kProcedureStatus = {"completed", "finished", "in-progress", "stopped", "not-done"};
const std::vector<std::string> kObservationStatus = {"final", "amended", "preliminary"};
const std::vector<std::string> kClinicalStatus = {"active", "resolved", "inactive", "remission"};
const std::vector<std::string> kSeverity = {"mild", "moderate", "severe"};
const std::vector<std::string> kEncounterClass = {"AMB", "IMP", "EMER", "HH"};
const std::vector<std::string> kMedicationStatus = {"active", "completed", "stopped"};
const std::vector<std::string> kRoute = {"oral", "iv", "topical", "im"};
const std::vector<std::string> kBodySite = {"left", "right", "bilateral"};
const std::vector<std::string> kUnits = {"mm", "score", "count"};
const std::vector<std::string> kCoverageStatus = {"active", "cancelled", "draft"};
const std::vector<std::string> kPayers = {"Medicare", "Medicaid", "Aetna", "Cigna", "Humana", "BlueCross"};
const std::vector<std::string> kPlanTypes = {"HMO", "PPO", "EPO", "POS"};

}  // namespace

// Draws one patient's rows from its own stream.
class Generator::PatientBuilder {
 public:
  PatientBuilder(const Generator& g, int64_t pid)
      : g_(g), p_(*g.pools_), w_(g.window_), pid_(pid), rng_(g.seed_, static_cast<uint64_t>(pid)) {}

  PatientRows build() {
    const auto& plan = g_.plan_;
    PatientRows out;
    out.truth.patient_id = pid_;
    bool patient_valid = bern(plan.p_patient_valid);
    bool coverage_valid = bern(plan.p_coverage_valid);
    bool numerator = bern(plan.p_numerator_flag);
    bool excluded = bern(plan.p_exclusion_flag);
    int clause = uniform(0, 4);
    out.truth.in_denominator = patient_valid && coverage_valid;
    out.truth.in_numerator = numerator;
    out.truth.excluded = excluded;

    const auto& m = plan.means;
    int* count = nullptr;
    int n_condition = 0, n_encounter = 0, n_procedure = 0;
    if (excluded) {
      count = clause == kHospiceEncounter ? &n_encounter
              : clause == kAbsenceOfBreast ? &n_condition
                                           : &n_procedure;
    }
    n_condition = rows_for(m.condition, count == &n_condition);
    n_encounter = rows_for(m.encounter, count == &n_encounter);
    int n_medication = rows_for(m.medication, false);
    n_procedure = rows_for(m.procedure, count == &n_procedure);
    int n_observation = rows_for(m.observation, numerator);
    int n_coverage = rows_for(m.coverage, coverage_valid);

    out.rows(ResourceKind::kPatient).push_back(patient_row(patient_valid));

    int valid_obs = numerator ? uniform(0, n_observation - 1) : -1;
    for (int i = 0; i < n_observation; ++i) {
      out.rows(ResourceKind::kObservation).push_back(i == valid_obs ? observation_row(Pick::kValid, Pick::kValid)
                                                                    : invalid_observation());
    }

    int designated = excluded ? uniform(0, *count - 1) : -1;
    auto valid_here = [&](int c, int i) { return excluded && clause == c && i == designated; };
    auto valid_in = [&](std::initializer_list<int> cs, int i) {
      for (int c : cs) {
        if (valid_here(c, i)) return c;
      }
      return -1;
    };

    for (int i = 0; i < n_encounter; ++i) {
      out.rows(ResourceKind::kEncounter)
          .push_back(valid_here(kHospiceEncounter, i) ? encounter_row(Pick::kValid, Pick::kValid, Pick::kValid)
                                                      : invalid_encounter());
    }
    for (int i = 0; i < n_procedure; ++i) {
      int c = valid_in({kHospiceIntervention, kMastectomyCompleted, kMastectomyFinished}, i);
      out.rows(ResourceKind::kProcedure)
          .push_back(c >= 0 ? procedure_row(c, Pick::kValid, Pick::kValid, Pick::kValid) : invalid_procedure());
    }
    for (int i = 0; i < n_condition; ++i) {
      out.rows(ResourceKind::kCondition)
          .push_back(valid_here(kAbsenceOfBreast, i) ? condition_row(Pick::kValid, Pick::kValid)
                                                     : invalid_condition());
    }
    for (int i = 0; i < n_medication; ++i) out.rows(ResourceKind::kMedication).push_back(medication_row());

    auto coverage = coverage_valid ? valid_coverage(n_coverage) : invalid_coverage(n_coverage);
    for (const auto& iv : coverage) out.rows(ResourceKind::kCoverage).push_back(coverage_row(iv));
    return out;
  }

 private:
  // -- primitives
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool bern(double p) { return std::bernoulli_distribution(p)(rng_); }
  int poisson(double mean) { return std::poisson_distribution<int>(mean)(rng_); }
  // A table that must hold one valid row gets 1 + Poisson(mean - 1), so its
  // expected size is the same as when it is unconstrained.
  int rows_for(double mean, bool needs_one) {
    if (!needs_one) return poisson(mean);
    return mean > 1 ? 1 + poisson(mean - 1) : 1;
  }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<size_t>(uniform(0, static_cast<int>(v.size()) - 1))];
  }
  std::string pick_except(const std::vector<std::string>& v, const std::string& avoid) {
    while (true) {
      const auto& s = pick(v);
      if (s != avoid) return s;
    }
  }
  std::string pick_except(const std::vector<std::string>& v, const std::string& a, const std::string& b) {
    while (true) {
      const auto& s = pick(v);
      if (s != a && s != b) return s;
    }
  }

  Date day(int32_t lo, int32_t hi) { return Date{uniform(lo, hi)}; }
  // Free dates spread over several years, mostly before the window.
  Date free_date() { return day(w_.start.days - kFreeDaysBefore, w_.end.days + 90); }
  Date inside_date() { return day(w_.start.days, w_.end.days); }
  Date outside_date() {
    if (bern(0.85)) return day(w_.start.days - kFreeDaysBefore, w_.start.days - 1);
    return day(w_.end.days + 1, w_.end.days + 180);
  }
  DateInterval interval(Pick mode) {
    switch (mode) {
      case Pick::kValid: {
        Date s = inside_date();
        return {s, s.plus_days(uniform(0, std::min(30, w_.end.days - s.days)))};
      }
      case Pick::kInvalid:
        if (bern(0.5)) {
          Date s = day(w_.start.days - kFreeDaysBefore, w_.start.days - 1);
          return {s, s.plus_days(uniform(0, 30))};
        } else {
          Date e = day(w_.end.days + 1, w_.end.days + 180);
          return {e.plus_days(-uniform(0, 30)), e};
        }
      case Pick::kFree: {
        Date s = free_date();
        return {s, s.plus_days(uniform(0, 30))};
      }
    }
    return {};
  }
  const CodeRef& code(Pick mode, const std::vector<CodeRef>& members, const std::vector<CodeRef>& others) {
    if (mode == Pick::kValid || (mode == Pick::kFree && bern(0.5))) return pick(members);
    return pick(others);
  }

  bool during(Date s, Date e) const { return s >= w_.start && e <= w_.end; }
  static const CodeRef& code_of(const Record& r) { return std::get<CodeRef>(r[1]); }
  static const std::string& str(const Record& r, int f) { return std::get<std::string>(r[f]); }
  static Date date(const Record& r, int f) { return std::get<Date>(r[f]); }

  // -- Patient
  Record patient_row(bool valid) {
    while (true) {
      std::string gender;
      int age;
      if (valid) {
        gender = "female";
        age = uniform(52, 74);
      } else if (bern(0.5)) {
        gender = pick(std::vector<std::string>{"male", "other", "unknown"});
        age = uniform(30, 95);
      } else {
        gender = bern(0.5) ? "female" : "male";
        age = bern(0.5) ? uniform(20, 51) : uniform(75, 95);
      }
      Date latest = w_.end.plus_years(-age);
      Date earliest = w_.end.plus_years(-(age + 1)).plus_days(1);
      Date birth = day(earliest.days, latest.days);
      int actual = age_in_years(birth, w_.end);
      bool ok = gender == "female" && actual >= 52 && actual <= 74;
      if (actual != age || ok != valid) continue;
      char postal[8];
      std::snprintf(postal, sizeof postal, "%05d", uniform(1000, 99999));
      return Record{pid_, gender, birth, "P" + std::to_string(pid_), std::string(postal)};
    }
  }

  // -- Observation: code in Mammogram and effective end inside the window.
  Record observation_row(Pick code_mode, Pick date_mode) {
    const CodeRef& c = code(code_mode, p_.mammogram, p_.other_observation);
    Date end = date_mode == Pick::kValid ? inside_date() : date_mode == Pick::kInvalid ? outside_date() : free_date();
    Date start = end.plus_days(-uniform(0, 3));
    return Record{pid_, c, pick(kObservationStatus), start, end, int64_t{uniform(0, 400)}, pick(kUnits)};
  }
  bool observation_matches(const Record& r) const {
    return p_.mammogram_set.contains(code_of(r)) && w_.contains(date(r, 4));
  }
  Record invalid_observation() {
    for (int attempt = 0; attempt < 64; ++attempt) {
      Record r = bern(0.5) ? observation_row(Pick::kInvalid, Pick::kFree) : observation_row(Pick::kFree, Pick::kInvalid);
      if (!observation_matches(r)) return r;
    }
    return observation_row(Pick::kInvalid, Pick::kInvalid);
  }

  // -- Encounter: Hospice Encounter, completed, period during the window.
  Record encounter_row(Pick code_mode, Pick status_mode, Pick period_mode) {
    const CodeRef& c = code(code_mode, p_.hospice_encounter, p_.other_encounter);
    std::string status = status_mode == Pick::kValid     ? "completed"
                         : status_mode == Pick::kInvalid ? pick_except(kEncounterStatus, "completed")
                                                         : pick(kEncounterStatus);
    auto period = interval(period_mode);
    return Record{pid_, c, status, period.start, period.end, pick(kEncounterClass)};
  }
  bool encounter_matches(const Record& r) const {
    return p_.hospice_encounter_set.contains(code_of(r)) && str(r, 2) == "completed" &&
           during(date(r, 3), date(r, 4));
  }
  Record invalid_encounter() {
    for (int attempt = 0; attempt < 64; ++attempt) {
      int field = uniform(0, 2);
      Record r = encounter_row(field == 0 ? Pick::kInvalid : Pick::kFree, field == 1 ? Pick::kInvalid : Pick::kFree,
                               field == 2 ? Pick::kInvalid : Pick::kFree);
      if (!encounter_matches(r)) return r;
    }
    return encounter_row(Pick::kInvalid, Pick::kInvalid, Pick::kInvalid);
  }

  // -- Procedure: three clauses share the table.
  Record procedure_row(int clause, Pick code_mode, Pick status_mode, Pick performed_mode) {
    CodeRef c;
    if (code_mode == Pick::kFree) {
      int which = uniform(0, 2);
      c = which == 0 ? pick(p_.hospice_intervention) : which == 1 ? pick(p_.mastectomy) : pick(p_.other_procedure);
    } else {
      const auto& members = clause == kHospiceIntervention ? p_.hospice_intervention : p_.mastectomy;
      c = code(code_mode, members, p_.other_procedure);
    }
    std::string required = clause == kMastectomyCompleted ? "completed" : "finished";
    std::string status = status_mode == Pick::kValid     ? required
                         : status_mode == Pick::kInvalid ? pick_except(kProcedureStatus, required)
                                                         : pick(kProcedureStatus);
    auto performed = interval(clause == kHospiceIntervention ? performed_mode : Pick::kFree);
    return Record{pid_, c, status, performed.start, performed.end, pick(kBodySite)};
  }
  bool procedure_matches(const Record& r) const {
    const auto& c = code_of(r);
    const auto& status = str(r, 2);
    if (p_.hospice_intervention_set.contains(c) && status == "finished" && during(date(r, 3), date(r, 4))) return true;
    return p_.mastectomy_set.contains(c) && (status == "completed" || status == "finished");
  }
  Record invalid_procedure() {
    for (int attempt = 0; attempt < 64; ++attempt) {
      int clause = uniform(kHospiceIntervention, kMastectomyFinished);
      int fields = clause == kHospiceIntervention ? 3 : 2;
      int field = uniform(0, fields - 1);
      Record r = procedure_row(clause, field == 0 ? Pick::kInvalid : Pick::kFree,
                               field == 1 ? Pick::kInvalid : Pick::kFree, field == 2 ? Pick::kInvalid : Pick::kFree);
      if (!procedure_matches(r)) return r;
    }
    auto performed = interval(Pick::kFree);
    return Record{pid_, pick(p_.other_procedure), pick_except(kProcedureStatus, "completed", "finished"),
                  performed.start, performed.end, pick(kBodySite)};
  }

  // -- Condition: Absence of Breast, prevalence during the window.
  Record condition_row(Pick code_mode, Pick period_mode) {
    const CodeRef& c = code(code_mode, p_.absence_of_breast, p_.other_condition);
    auto period = interval(period_mode);
    return Record{pid_, c, pick(kClinicalStatus), period.start, period.end, pick(kSeverity)};
  }
  bool condition_matches(const Record& r) const {
    return p_.absence_set.contains(code_of(r)) && during(date(r, 3), date(r, 4));
  }
  Record invalid_condition() {
    for (int attempt = 0; attempt < 64; ++attempt) {
      Record r = bern(0.5) ? condition_row(Pick::kInvalid, Pick::kFree) : condition_row(Pick::kFree, Pick::kInvalid);
      if (!condition_matches(r)) return r;
    }
    return condition_row(Pick::kInvalid, Pick::kInvalid);
  }

  Record medication_row() {
    return Record{pid_, pick(p_.other_medication), pick(kMedicationStatus), free_date(),
                  int64_t{uniform(1, 100) * 5}, pick(kRoute)};
  }

  // -- Coverage
  Record coverage_row(const DateInterval& iv) {
    return Record{pid_, pick(kCoverageStatus), iv.start, iv.end, pick(kPayers), pick(kPlanTypes)};
  }

  // Uncovered runs inside the window, leading and trailing included.
  bool continuous(const std::vector<DateInterval>& ivs) const {
    if (ivs.empty()) return false;
    std::vector<bool> covered(static_cast<size_t>(w_.length_days()), false);
    for (const auto& iv : ivs) {
      for (int32_t d = std::max(iv.start.days, w_.start.days); d <= std::min(iv.end.days, w_.end.days); ++d) {
        covered[static_cast<size_t>(d - w_.start.days)] = true;
      }
    }
    int run = 0;
    for (bool c : covered) {
      run = c ? 0 : run + 1;
      if (run > g_.max_gap_days_) return false;
    }
    return true;
  }

  // k intervals spanning the window with interior gaps of at most max_gap days.
  std::vector<DateInterval> tiling(int k) {
    int32_t lo = w_.start.days, hi = w_.end.days;
    int gap_limit = g_.max_gap_days_;
    std::vector<int32_t> cuts;
    int span = hi - lo - 1;
    k = std::min(k, std::max(1, span / 2));
    while (static_cast<int>(cuts.size()) < k - 1) {
      int32_t c = uniform(lo + 1, hi - 1);
      if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<DateInterval> out;
    int32_t start = lo - uniform(0, 200);
    for (size_t i = 0; i < cuts.size(); ++i) {
      out.push_back({Date{start}, Date{cuts[i]}});
      int32_t next_end = i + 1 < cuts.size() ? cuts[i + 1] : hi + 200;
      int gap = std::min(uniform(0, gap_limit), next_end - cuts[i] - 1);
      start = cuts[i] + 1 + gap;
    }
    out.push_back({Date{start}, Date{std::max(start, hi + uniform(0, 200))}});
    return out;
  }

  std::vector<DateInterval> valid_coverage(int k) {
    while (true) {
      auto ivs = tiling(k);
      if (continuous(ivs)) return ivs;
    }
  }

  std::vector<DateInterval> invalid_coverage(int k) {
    int window = w_.length_days();
    if (k == 0 || window <= g_.max_gap_days_) return {};
    while (true) {
      auto base = tiling(k);
      int len = std::min(window, uniform(g_.max_gap_days_ + 1, g_.max_gap_days_ + 91));
      int32_t h = uniform(w_.start.days, w_.end.days - len + 1);
      int32_t h_end = h + len - 1;
      std::vector<DateInterval> out;
      for (const auto& iv : base) {
        if (iv.end.days < h || iv.start.days > h_end) {
          out.push_back(iv);
          continue;
        }
        // Trim rather than split so the row count stays k.
        bool left = iv.start.days < h, right = iv.end.days > h_end;
        if (left && (!right || h - iv.start.days >= iv.end.days - h_end)) {
          out.push_back({iv.start, Date{h - 1}});
        } else if (right) {
          out.push_back({Date{h_end + 1}, iv.end});
        } else {
          int32_t end = w_.start.days - uniform(1, 300);
          out.push_back({Date{end - uniform(0, 60)}, Date{end}});
        }
      }
      if (!continuous(out)) return out;
    }
  }

  const Generator& g_;
  const Pools& p_;
  DateInterval w_;
  int64_t pid_;
  StreamRng rng_;
};

Generator::Generator(uint64_t seed, GenerationPlan plan, const catalog::ValueSetRegistry& valuesets,
                     DateInterval window, int max_gap_days)
    : seed_(seed), plan_(plan), window_(window), max_gap_days_(max_gap_days) {
  if (window.end < window.start) throw Error(ErrorCode::kInvalidArgument, "window", "window start after end");
  if (window.length_days() < 3) throw Error(ErrorCode::kInvalidArgument, "window", "window too short");
  if (max_gap_days < 0) throw Error(ErrorCode::kInvalidArgument, "max_gap_days", "max_gap_days must be >= 0");
  auto pools = std::make_shared<Pools>();
  load_members(valuesets, "Mammogram", pools->mammogram, pools->mammogram_set);
  load_members(valuesets, "Hospice Encounter", pools->hospice_encounter, pools->hospice_encounter_set);
  load_members(valuesets, "Hospice Intervention", pools->hospice_intervention, pools->hospice_intervention_set);
  load_members(valuesets, "Mastectomy", pools->mastectomy, pools->mastectomy_set);
  load_members(valuesets, "Absence of Breast", pools->absence_of_breast, pools->absence_set);
  std::vector<const CodeSet*> all = {&pools->mammogram_set, &pools->hospice_encounter_set,
                                     &pools->hospice_intervention_set, &pools->mastectomy_set,
                                     &pools->absence_set};
  pools->other_observation = outside_codes("LOINC", [](int k) { return std::to_string(30000 + k) + "-" + std::to_string(k % 10); }, all);
  pools->other_encounter = outside_codes("SNOMED", [](int k) { return std::to_string(185000000 + k * 11); }, all);
  pools->other_procedure = outside_codes("CPT", [](int k) { return std::to_string(20000 + k * 3); }, all);
  pools->other_condition = outside_codes("ICD10", [](int k) { return "E" + std::to_string(10 + k / 10) + "." + std::to_string(k % 10); }, all);
  pools->other_medication = outside_codes("RXNORM", [](int k) { return std::to_string(197000 + k * 7); }, all);
  pools_ = std::move(pools);
}

PatientRows Generator::generate_patient(int64_t patient_id) const {
  if (patient_id < 1) throw Error(ErrorCode::kInvalidArgument, "patient_id", "patient ids start at 1");
  return PatientBuilder(*this, patient_id).build();
}

// ---------------------------------------------------------------------------

std::string TruthManifest::to_json() const {
  std::string out = "{\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", r);
  out += "  \"seed\": " + std::to_string(seed) + ",\n";
  out += "  \"match_rate\": " + std::string(buf) + ",\n";
  out += "  \"patients\": " + std::to_string(n_patients) + ",\n";
  out += "  \"max_gap_days\": " + std::to_string(max_gap_days) + ",\n";
  out += "  \"format\": \"" + std::string(storage::format_name(format)) + "\",\n";
  out += "  \"partitions\": " + std::to_string(partitions) + ",\n";
  out += "  \"window\": {\"start\": \"" + window.start.to_string() + "\", \"end\": \"" + window.end.to_string() + "\"},\n";
  out += "  \"summary\": {\"denominator\": " + std::to_string(denominator_count) +
         ", \"numerator\": " + std::to_string(numerator_count) +
         ", \"exclusion\": " + std::to_string(exclusion_count) + "},\n";
  out += "  \"table_rows\": {";
  bool first = true;
  for (const auto& [kind, n] : table_rows) {
    if (!first) out += ", ";
    first = false;
    out += "\"" + std::string(resource_name(kind)) + "\": " + std::to_string(n);
  }
  out += "},\n  \"records\": [";
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& t = records[i];
    out += i % 8 == 0 ? "\n    " : " ";
    out += "[" + std::to_string(t.patient_id) + "," + (t.in_denominator ? "1" : "0") + "," +
           (t.in_numerator ? "1" : "0") + "," + (t.excluded ? "1" : "0") + "]";
    if (i + 1 < records.size()) out += ",";
  }
  out += records.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

TruthManifest TruthManifest::from_json(std::string_view text) {
  TruthManifest m;
  try {
    auto doc = nlohmann::json::parse(text);
    m.seed = doc.at("seed").get<uint64_t>();
    m.r = doc.at("match_rate").get<double>();
    m.n_patients = doc.at("patients").get<int64_t>();
    m.max_gap_days = doc.at("max_gap_days").get<int>();
    m.format = storage::parse_format(doc.at("format").get<std::string>());
    m.partitions = doc.at("partitions").get<uint32_t>();
    m.window = {Date::parse(doc.at("window").at("start").get<std::string>()),
                Date::parse(doc.at("window").at("end").get<std::string>())};
    const auto& s = doc.at("summary");
    m.denominator_count = s.at("denominator").get<int64_t>();
    m.numerator_count = s.at("numerator").get<int64_t>();
    m.exclusion_count = s.at("exclusion").get<int64_t>();
    for (const auto& [name, n] : doc.at("table_rows").items()) {
      auto kind = resource_from_name(name);
      if (!kind) throw Error(ErrorCode::kMalformedDocument, name, "unknown table '" + name + "' in manifest");
      m.table_rows[*kind] = n.get<uint64_t>();
    }
    for (const auto& rec : doc.at("records")) {
      m.records.push_back(TruthRecord{rec.at(0).get<int64_t>(), rec.at(1).get<int>() != 0,
                                      rec.at(2).get<int>() != 0, rec.at(3).get<int>() != 0});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, "manifest", std::string("manifest: ") + e.what());
  }
  return m;
}

TruthManifest generate_workload(const WorkloadSpec& spec, const catalog::ValueSetRegistry& valuesets,
                                const std::filesystem::path& out_dir) {
  if (spec.n_patients < 0) throw Error(ErrorCode::kInvalidArgument, "patients", "patient count must be >= 0");
  auto plan = derive_generation_plan(spec.r, spec.means);
  Generator gen(spec.seed, plan, valuesets, spec.window, spec.max_gap_days);
  uint32_t partitions = spec.partitions ? spec.partitions : default_partitions(spec.n_patients);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, out_dir.string(), "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::vector<int64_t>> buckets(partitions);
  for (int64_t pid = 1; pid <= spec.n_patients; ++pid) buckets[storage::partition_of(pid, partitions)].push_back(pid);

  std::vector<std::unique_ptr<storage::TableWriter>> writers;
  for (auto kind : kAllResources) {
    writers.push_back(std::make_unique<storage::TableWriter>(out_dir / storage::table_file_name(kind, spec.format),
                                                             kind, spec.format, partitions));
  }

  TruthManifest manifest;
  manifest.seed = spec.seed;
  manifest.r = spec.r;
  manifest.n_patients = spec.n_patients;
  manifest.max_gap_days = spec.max_gap_days;
  manifest.format = spec.format;
  manifest.partitions = partitions;
  manifest.window = spec.window;
  manifest.records.resize(static_cast<size_t>(spec.n_patients));
  for (auto kind : kAllResources) manifest.table_rows[kind] = 0;

  for (uint32_t p = 0; p < partitions; ++p) {
    std::array<std::vector<Record>, kAllResources.size()> tables;
    for (int64_t pid : buckets[p]) {
      PatientRows rows = gen.generate_patient(pid);
      for (size_t t = 0; t < tables.size(); ++t) {
        for (auto& r : rows.tables[t]) tables[t].push_back(std::move(r));
      }
      manifest.records[static_cast<size_t>(pid - 1)] = rows.truth;
    }
    for (size_t t = 0; t < tables.size(); ++t) {
      manifest.table_rows[kAllResources[t]] += tables[t].size();
      writers[t]->write_partition(p, std::move(tables[t]));
    }
  }
  for (auto& w : writers) w->finish();

  for (const auto& t : manifest.records) {
    manifest.denominator_count += t.in_denominator;
    manifest.numerator_count += t.in_numerator;
    manifest.exclusion_count += t.excluded;
  }
  write_file_atomic(out_dir / "manifest.json", manifest.to_json());
  return manifest;
}

MatchStats expected_match_stats(const GenerationPlan& plan, int64_t n_patients) {
  auto flag = [&](double p) {
    FlagStats s;
    s.p = p;
    double n = static_cast<double>(std::max<int64_t>(n_patients, 0));
    s.mean = n * p;
    s.sigma = std::sqrt(n * p * (1.0 - p));
    s.lo = s.mean - 4 * s.sigma;
    s.hi = s.mean + 4 * s.sigma;
    return s;
  };
  return MatchStats{flag(plan.p_patient_valid * plan.p_coverage_valid), flag(plan.p_numerator_flag),
                    flag(plan.p_exclusion_flag)};
}

}  // namespace cqlflow::datagen
