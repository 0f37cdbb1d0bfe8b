// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria (capped at 1).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "dq/kernels.hpp"
#include "dq/orchestrator.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace dq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) detail << "first failure: " << what << "; ";
    ok = ok && cond;
  }
};

std::string tally(const anomaly::Tally& t) {
  return std::to_string(t.detected) + "/" + std::to_string(t.total);
}

// Shared state: one complete seed-42 run in a scratch directory.
struct World {
  orch::Config config;
  orch::Paths paths;
  orch::WorkflowResult run;
};

World& world() {
  static World w = [] {
    World w;
    w.config.output_dir = dqt::fresh_dir("acceptance");
    w.config = orch::with_defaults(w.config);
    w.paths = orch::paths_for(w.config);
    w.run = orch::run_workflow(w.config);
    return w;
  }();
  return w;
}

nlohmann::json read_json(const fs::path& f) { return nlohmann::json::parse(dqt::slurp(f)); }

void criterion1(Outcome& o) {
  auto& w = world();
  auto start = std::chrono::steady_clock::now();
  auto r = orch::experiment(w.config);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& base = r.matrix(anomaly::Condition::manual_only);
  o.expect(base.total == anomaly::Tally{7, 16}, "manual_only " + tally(base.total));
  o.expect(base.batches.at('A') == anomaly::Tally{4, 4}, "batch A");
  o.expect(base.batches.at('B') == anomaly::Tally{0, 6}, "batch B");
  o.expect(base.batches.at('C') == anomaly::Tally{3, 6}, "batch C");
  o.expect(r.matrix(anomaly::Condition::manual_expanded).total == anomaly::Tally{16, 16}, "expanded");
  o.expect(r.matrix(anomaly::Condition::manual_llm).total == anomaly::Tally{16, 16}, "llm");
  o.expect(r.absolute_gain_pp && std::abs(*r.absolute_gain_pp - 56.25) < 1e-9, "gain");
  o.expect(r.relative_improvement_pct && std::abs(*r.relative_improvement_pct - 128.57) <= 0.01, "relative");
  o.expect(secs < 60, "runtime");
  o.detail << "manual_only " << tally(base.total) << ", expanded "
           << tally(r.matrix(anomaly::Condition::manual_expanded).total) << ", llm "
           << tally(r.matrix(anomaly::Condition::manual_llm).total) << ", +" << r.absolute_gain_pp.value_or(-1)
           << " pp, +" << r.relative_improvement_pct.value_or(-1) << "%, " << secs << " s";
}

void criterion2(Outcome& o) {
  auto& w = world();
  o.expect(!w.run.mismatch, "full run reported a mismatch");
  auto j = read_json(w.paths.crossstore_report);
  o.expect(j["status"] == "MATCH" && j["matched"] == 3, "3/3 MATCH");
  std::vector<int64_t> counts;
  for (const auto& t : j["tables"]) {
    counts.push_back(t["row_count"]["local"].get<int64_t>());
    o.expect(t["row_count"]["local"] == t["row_count"]["remote"], "row counts");
    o.expect(t["checksum"]["local"] == t["checksum"]["remote"], "checksums");
    o.expect(t["row_diffs"].empty(), "row diffs");
    for (auto& [col, n] : t["null_summary"].items()) o.expect(n["local"] == n["remote"], "nulls " + col);
  }
  o.expect(counts == std::vector<int64_t>{20, 100, 100}, "20/100/100");

  // Corrupt one cell in a copy of the warehouse.
  auto dir = dqt::fresh_dir("acceptance-corrupt");
  fs::copy_file(w.paths.warehouse_store, dir / "wh.db");
  store::LocalStore local(w.paths.local_store, store::LocalStore::Mode::read_only);
  store::WarehouseStore wh(dir / "wh.db");
  wh.execute("UPDATE \"migrated\".\"FCT_MATCHES\" SET \"HOME_GOALS\" = \"HOME_GOALS\" + 1 WHERE \"MATCH_ID\" = 42");
  auto r = xstore::validate_all(local, wh, {{"dim_teams", {"team_id"}}, {"fct_matches", {"match_id"}},
                                            {"fct_training_dataset", {"match_id"}}});
  o.expect(r.status == xstore::Verdict::mismatch && r.matched() == 2, "corruption not isolated");
  o.expect(r.tables[1].status == xstore::Verdict::mismatch && r.tables[1].row_diffs.size() == 1 &&
               r.tables[1].row_diffs[0].key == "match_id=42",
           "one keyed diff");
  o.detail << "clean " << j["matched"] << "/3 MATCH, counts 20/100/100; corrupted fct_matches -> "
           << xstore::verdict_name(r.tables[1].status) << " with " << r.tables[1].row_diffs.size() << " diff ("
           << (r.tables[1].row_diffs.empty() ? "" : r.tables[1].row_diffs[0].key) << ")";
}

void criterion3(Outcome& o) {
  auto& w = world();
  auto gen = read_json(w.paths.generation);
  auto audit = read_json(w.paths.usefulness_audit);
  std::vector<int> items;
  for (const auto& m : gen["per_model"]) items.push_back(m["items"]);
  o.expect(items == std::vector<int>{3, 13, 9}, "items per model");
  const auto& t = audit["totals"];
  o.expect(t["useful"] == 9 && t["redundant"] == 4 && t["low_value"] == 12 && t["invalid"] == 0, "totals");
  auto pm = [&](const char* m, int u, int r, int l) {
    const auto& x = audit["per_model"][m];
    o.expect(x["useful"] == u && x["redundant"] == r && x["low_value"] == l && x["invalid"] == 0, m);
  };
  pm("dim_teams", 1, 2, 0);
  pm("fct_matches", 5, 2, 6);
  pm("fct_training_dataset", 3, 0, 6);
  o.detail << t["total"] << " items " << items[0] << "/" << items[1] << "/" << items[2] << ", " << t["useful"]
           << " useful / " << t["redundant"] << " redundant / " << t["low_value"] << " low_value / "
           << t["invalid"] << " invalid";
}

void criterion4(Outcome& o) {
  auto& w = world();
  for (auto mode : {orch::C5Mode::frozen, orch::C5Mode::fresh}) {
    auto r = orch::run_c5(w.config, mode, 5);
    int good = 0;
    for (const auto& t : r.trials)
      good += t.totals && t.totals->manual_only == anomaly::Tally{7, 16} &&
              t.totals->manual_expanded == anomaly::Tally{16, 16} && t.totals->manual_llm == anomaly::Tally{16, 16};
    o.expect(r.stable && r.trials.size() == 5 && good == 5, orch::c5_mode_name(mode));
    o.detail << orch::c5_mode_name(mode) << " " << good << "/5 stable at 7/16,16/16,16/16; ";
  }
}

void criterion5(Outcome& o) {
  auto j = read_json(world().paths.model_run);
  std::map<std::string, int64_t> rows;
  for (auto& [m, n] : j.items()) rows[m] = n.get<int64_t>();
  o.expect(rows == std::map<std::string, int64_t>{{"stg_matches", 100}, {"dim_teams", 20}, {"fct_matches", 100},
                                                  {"fct_training_dataset", 100}},
           "row counts");
  for (const auto& [m, n] : rows) o.detail << m << "=" << n << " ";
}

void criterion6(Outcome& o) {
  auto log = orch::run_log_from_json(read_json(world().paths.runtime_log));
  o.expect(log.stages.size() == 8, "8 stages");
  int64_t sum = 0;
  for (std::size_t i = 0; i < log.stages.size(); ++i) {
    const auto& s = log.stages[i];
    o.expect(s.ordinal == static_cast<int>(i + 1) && s.name == orch::kStageNames[i], "order");
    o.expect(s.duration_ns > 0 && s.ok, "duration/status " + s.name);
    sum += s.duration_ns;
  }
  auto j = read_json(world().paths.runtime_log);
  double ms_sum = 0;
  for (const auto& s : j["stages"]) ms_sum += s["duration_ms"].get<double>();
  o.expect(log.total_ns() == sum && std::abs(j["total_duration_ms"].get<double>() - ms_sum) < 1e-6, "total");
  o.detail << log.stages.size() << " stages in order, total " << log.total_duration_ms() << " ms = sum of stages";
}

Row mutate(std::mt19937_64& rng, Row row, std::size_t col) {
  Value& v = row[col];
  if (auto* i = std::get_if<int64_t>(&v)) *i += 1 + static_cast<int64_t>(rng() % 7);
  else if (auto* s = std::get_if<std::string>(&v)) *s += '#';
  else if (auto* d = std::get_if<Date>(&v)) d->days -= 1 + static_cast<int32_t>(rng() % 3);
  else if (is_null(v)) v = std::string("0");
  else v = Value{};
  return row;
}

void criterion7(Outcome& o) {
  auto& w = world();
  store::LocalStore local(w.paths.local_store, store::LocalStore::Mode::read_only);
  std::mt19937_64 rng(20240601);
  int perms = 0, mutations = 0;
  std::vector<TypedTable> tables;
  for (const auto& m : models::model_catalog()) tables.push_back(local.read_table(m.name));
  for (auto& t : tables) {
    auto ref = canonical::table_checksum(t);
    o.expect(ref.value == dqt::oracle::multiset_hash(canonical::encode_rows(t)), "oracle hash " + t.schema.name);
    for (int i = 0; i < 1000; ++i, ++perms) {
      std::shuffle(t.rows.begin(), t.rows.end(), rng);
      if (!(canonical::table_checksum(t) == ref)) {
        o.expect(false, "permutation changed " + t.schema.name);
        break;
      }
    }
  }
  for (int i = 0; i < 500; ++i, ++mutations) {
    auto& t = tables[rng() % tables.size()];
    auto ref = canonical::table_checksum(t).value;
    auto copy = t;
    auto r = rng() % t.rows.size();
    copy.rows[r] = mutate(rng, t.rows[r], rng() % t.schema.columns.size());
    if (canonical::encode_row(copy.rows[r], t.schema) == canonical::encode_row(t.rows[r], t.schema)) {
      --i;  // no-op edit; draw again
      --mutations;
      continue;
    }
    o.expect(canonical::table_checksum(copy).value != ref, "mutation undetected in " + t.schema.name);
  }
  store::WarehouseStore wh(w.paths.warehouse_store, w.config.warehouse_namespace);
  int equal = 0;
  for (const auto& m : models::curated_model_names())
    equal += canonical::table_checksum(local.read_table(m)) == canonical::table_checksum(wh.read_table(m));
  o.expect(equal == 3, "migrated checksums");
  o.detail << perms << " permutations stable, " << mutations << " mutations detected, " << equal
           << "/3 migrated checksums bit-equal (kernel " << kernels::isa_name(kernels::active_isa()) << ")";
}

void criterion8(Outcome& o) {
  auto& w = world();
  const auto catalog = models::catalog_schemas();
  auto merged = engine::parse_schema_file(dqt::slurp(w.paths.active_schema), catalog);
  std::vector<std::pair<std::string, engine::SchemaFile>> schemas = {
      {"manual_baseline", dqt::fixture_schema("manual_baseline")},
      {"manual_expanded", dqt::fixture_schema("manual_expanded")},
      {"merged_llm", merged}};
  auto anomalies = anomaly::load_catalog(w.config.anomaly_catalog);
  store::LocalStore local(w.paths.local_store);
  auto snap = store::load_snapshot(w.paths.snapshot);
  int states = 0, comparisons = 0;

  auto check_state = [&](const std::string& label) {
    for (const auto& m : models::curated_model_names())
      o.expect(local.count_rows(m) <= 200, "table too large for brute force");
    auto tables = dqt::oracle::load_tables(local, models::curated_model_names());
    for (const auto& [name, schema] : schemas) {
      auto report = engine::execute_tests(local, schema, catalog);
      for (const auto& t : schema.all_tests()) {
        auto* r = report.find(t.id);
        bool same = r && r->failing_rows && *r->failing_rows == dqt::oracle::failing_rows(t, tables);
        o.expect(same, label + " " + name + " " + t.id);
        ++comparisons;
      }
    }
    ++states;
  };

  store::restore(local, snap);
  check_state("clean");
  for (const auto& a : anomalies.anomalies) {
    store::restore(local, snap);
    anomaly::inject(local, a);
    check_state(a.id);
  }
  store::restore(local, snap);
  o.detail << comparisons << " test/state comparisons over " << states << " states (clean + "
           << anomalies.anomalies.size() << " injected), all equal to the row scan";
}

void criterion9(Outcome& o) {
  auto& w = world();
  const auto catalog = models::catalog_schemas();
  auto base = dqt::fixture_schema("manual_baseline");
  auto generated = engine::parse_schema_file(dqt::slurp(w.paths.generated_schema), catalog, engine::Origin::generated);
  auto once = engine::merge_schemas(base, generated, catalog);
  auto twice = engine::merge_schemas(once.merged, generated, catalog);
  std::vector<std::string> a, b;
  for (const auto& t : once.merged.all_tests()) a.push_back(t.id);
  for (const auto& t : twice.merged.all_tests()) b.push_back(t.id);
  o.expect(a == b && twice.added.empty(), "merge not idempotent");
  o.expect(engine::serialize(once.backup) == engine::serialize(base), "backup differs");
  o.expect(dqt::slurp(w.paths.schema_backup) == engine::serialize(base), "persisted backup differs");

  store::LocalStore local(w.paths.local_store);
  auto snap = store::load_snapshot(w.paths.snapshot);
  auto anomalies = anomaly::load_catalog(w.config.anomaly_catalog);
  int restored = 0;
  for (const auto& an : anomalies.anomalies) {
    anomaly::inject(local, an);
    store::restore(local, snap);
    bool all = true;
    for (const auto& t : snap.captured_tables)
      all = all && canonical::table_checksum(local.read_table(t.table)).value == t.checksum;
    restored += all;
  }
  o.expect(restored == static_cast<int>(anomalies.anomalies.size()), "restore mismatch");
  o.detail << "merge twice -> " << b.size() << " tests, 0 added; backup byte-equal; " << restored << "/"
           << anomalies.anomalies.size() << " inject/restore cycles reproduce clean checksums";
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria = {
      {"golden comparator matrix", criterion1}, {"cross-store MATCH", criterion2},
      {"audit distribution", criterion3},       {"C5 stability", criterion4},
      {"model row counts", criterion5},         {"instrumentation structure", criterion6},
      {"checksum properties", criterion7},      {"engine soundness oracle", criterion8},
      {"merge/backup contract", criterion9}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail << "exception: " << e.what();
    }
    failed += !o.ok;
    std::printf("%s criterion %zu (%s): %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
