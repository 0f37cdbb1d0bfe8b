#include "dq/orchestrator.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <functional>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "dq/errors.hpp"

#ifndef DQ_DEFAULT_DATA_DIR
#define DQ_DEFAULT_DATA_DIR "data"
#endif

namespace dq::orch {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& file, const std::string& text) {
  fs::create_directories(file.parent_path());
  auto tmp = fs::path(file.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + file.string());
    out << text;
  }
  fs::rename(tmp, file);
}

void write_json(const fs::path& file, const json& j) { write_text(file, j.dump(2) + "\n"); }

json read_json(const fs::path& file) {
  try {
    return json::parse(read_text(file));
  } catch (const json::exception& e) {
    throw Error("malformed JSON in " + file.string() + ": " + e.what());
  }
}

void require(const fs::path& file, std::string_view produced_by) {
  if (!fs::exists(file))
    throw Error("missing " + file.string() + "; run `" + std::string(produced_by) + "` first");
}

engine::SchemaFile load_schema(const fs::path& file, engine::Origin origin) {
  return engine::parse_schema_file(read_text(file), models::catalog_schemas(), origin);
}

std::vector<xstore::TableKeys> curated_keys() {
  std::vector<xstore::TableKeys> out;
  for (const auto& name : models::curated_model_names())
    out.push_back({name, models::model(name).schema.primary_key});
  return out;
}

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string new_run_id() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  std::random_device rd;
  char suffix[9];
  std::snprintf(suffix, sizeof suffix, "%08x", rd());
  return std::string("run-") + buf + "-" + suffix;
}

engine::MergeResult merge_generated(const Config& c) {
  Paths p = paths_for(c);
  require(p.generated_schema, "generate-tests");
  auto base = load_schema(c.baseline_schema, engine::Origin::manual);
  auto generated = load_schema(p.generated_schema, engine::Origin::generated);
  return engine::merge_schemas(base, generated, models::catalog_schemas());
}

std::vector<synth::ModelContext> contexts(const Config& c, const store::Backend& local) {
  std::vector<synth::ModelContext> out;
  for (const auto& m : models::curated_model_names())
    out.push_back(synth::extract_context(local, m, c.sample_n));
  return out;
}

synth::GenerationResult generate_with(const Config& c, const store::Backend& local, uint64_t seed) {
  auto provider = synth::make_provider(c.provider, c.mock_profile, c.http_endpoint, c.http_model);
  synth::RetryPolicy policy;
  policy.base_delay = std::chrono::milliseconds(c.retry_base_delay_ms);
  return synth::generate_tests(*provider, contexts(c, local), seed, models::catalog_schemas(),
                               policy);
}

anomaly::ComparatorReport compare(const Config& c, const engine::SchemaFile& llm_schema) {
  Paths p = paths_for(c);
  require(p.snapshot, "run-models");
  anomaly::Schemas schemas{load_schema(c.baseline_schema, engine::Origin::manual),
                           load_schema(c.expanded_schema, engine::Origin::expanded), llm_schema};
  store::LocalStore local(p.local_store);
  store::Snapshot snap = store::load_snapshot(p.snapshot);
  return anomaly::run_comparator(local, snap, schemas, models::catalog_schemas(),
                                 anomaly::load_catalog(c.anomaly_catalog));
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.empty() || p.is_absolute() ? p : base / p;
}

}  // namespace

// ---- configuration -----------------------------------------------------------

Config with_defaults(Config c) {
  const fs::path data_dir = DQ_DEFAULT_DATA_DIR;
  if (c.local_store.empty()) c.local_store = c.output_dir / "store" / "local.db";
  if (c.warehouse_store.empty()) c.warehouse_store = c.output_dir / "store" / "warehouse.db";
  if (c.baseline_schema.empty()) c.baseline_schema = data_dir / "schemas" / "manual_baseline.yml";
  if (c.expanded_schema.empty()) c.expanded_schema = data_dir / "schemas" / "manual_expanded.yml";
  if (c.anomaly_catalog.empty()) c.anomaly_catalog = data_dir / "anomaly_catalog.json";
  return c;
}

Config load_config(const fs::path& file) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(file.string());
  } catch (const YAML::Exception& e) {
    throw InvalidParameter("config " + file.string() + ": " + e.what());
  }
  const fs::path base = file.parent_path();
  Config c;
  auto check_keys = [&](const YAML::Node& node, const std::string& where,
                        std::initializer_list<std::string_view> allowed) {
    if (!node) return;
    if (!node.IsMap()) throw InvalidParameter("config: '" + where + "' must be a mapping");
    for (const auto& kv : node) {
      auto key = kv.first.as<std::string>();
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        throw InvalidParameter("config: unknown key '" + where + key + "'");
    }
  };
  try {
    if (root.IsNull()) return with_defaults(c);
    check_keys(root, "", {"output_dir", "seed", "dataset", "backend", "llm", "fixtures"});
    check_keys(root["dataset"], "dataset.", {"num_teams", "num_matches"});
    check_keys(root["backend"], "backend.", {"local_path", "warehouse_path", "warehouse_namespace"});
    check_keys(root["llm"], "llm.",
               {"provider", "mock_profile", "sample_n", "endpoint", "model", "retry_base_delay_ms"});
    check_keys(root["fixtures"], "fixtures.", {"baseline_schema", "expanded_schema", "anomaly_catalog"});

    if (root["output_dir"]) c.output_dir = resolve(base, root["output_dir"].as<std::string>());
    if (root["seed"]) c.seed = root["seed"].as<uint64_t>();
    if (auto d = root["dataset"]) {
      if (d["num_teams"]) c.num_teams = d["num_teams"].as<int>();
      if (d["num_matches"]) c.num_matches = d["num_matches"].as<int>();
    }
    if (auto b = root["backend"]) {
      if (b["local_path"]) c.local_store = resolve(base, b["local_path"].as<std::string>());
      if (b["warehouse_path"]) c.warehouse_store = resolve(base, b["warehouse_path"].as<std::string>());
      if (b["warehouse_namespace"]) c.warehouse_namespace = b["warehouse_namespace"].as<std::string>();
    }
    if (auto l = root["llm"]) {
      if (l["provider"]) c.provider = l["provider"].as<std::string>();
      if (l["mock_profile"]) c.mock_profile = l["mock_profile"].as<std::string>();
      if (l["sample_n"]) c.sample_n = l["sample_n"].as<int>();
      if (l["endpoint"]) c.http_endpoint = l["endpoint"].as<std::string>();
      if (l["model"]) c.http_model = l["model"].as<std::string>();
      if (l["retry_base_delay_ms"]) c.retry_base_delay_ms = l["retry_base_delay_ms"].as<int>();
    }
    if (auto f = root["fixtures"]) {
      if (f["baseline_schema"]) c.baseline_schema = resolve(base, f["baseline_schema"].as<std::string>());
      if (f["expanded_schema"]) c.expanded_schema = resolve(base, f["expanded_schema"].as<std::string>());
      if (f["anomaly_catalog"]) c.anomaly_catalog = resolve(base, f["anomaly_catalog"].as<std::string>());
    }
  } catch (const YAML::Exception& e) {
    throw InvalidParameter("config " + file.string() + ": " + e.what());
  }
  return with_defaults(c);
}

fs::path Paths::c5(std::string_view mode) const {
  return experiments / ("c5_" + std::string(mode) + ".json");
}

Paths paths_for(const Config& cfg) {
  Config c = with_defaults(cfg);
  Paths p;
  p.root = c.output_dir;
  p.data = p.root / "data";
  p.store = p.root / "store";
  p.schemas = p.root / "schemas";
  p.experiments = p.root / "experiments";
  p.llm_raw = p.experiments / "llm_raw";
  p.raw_matches = p.data / "raw_matches.json";
  p.local_store = c.local_store;
  p.snapshot = store::default_snapshot_path(c.local_store);
  p.warehouse_store = c.warehouse_store;
  p.active_schema = p.schemas / "active_schema.yml";
  p.schema_backup = p.schemas / "schema_backup.yml";
  p.generated_schema = p.schemas / "generated_tests.yml";
  p.model_run = p.experiments / "model_run.json";
  p.generation = p.llm_raw / "generation.json";
  p.merge_record = p.experiments / "merge_record.json";
  p.test_results = p.experiments / "test_results.json";
  p.test_run = p.experiments / "test_run.json";
  p.migration_report = p.experiments / "migration_report.json";
  p.crossstore_report = p.experiments / "crossstore_report.json";
  p.anomaly_results = p.experiments / "anomaly_results.json";
  p.usefulness_audit = p.experiments / "usefulness_audit.json";
  p.runtime_log = p.experiments / "runtime_log.json";
  p.research_summary = p.experiments / "research_summary.json";
  p.lock = p.root / ".dq.lock";
  return p;
}

RunLock::RunLock(const fs::path& output_dir) : file_(output_dir / ".dq.lock") {
  fs::create_directories(output_dir);
  int fd = ::open(file_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw Error("output directory is locked by another run (" + file_.string() +
                "); remove the file if that run is gone");
  std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(file_, ec);
}

// ---- run log -----------------------------------------------------------------

int64_t RunLog::total_ns() const {
  int64_t t = 0;
  for (const auto& s : stages) t += s.duration_ns;
  return t;
}

bool RunLog::complete() const {
  if (stages.size() != kStageNames.size()) return false;
  for (const auto& s : stages)
    if (!s.ok) return false;
  return true;
}

json to_json(const RunLog& log) {
  json stages = json::array();
  for (const auto& s : log.stages)
    stages.push_back({{"ordinal", s.ordinal},
                      {"name", s.name},
                      {"started_at", s.started_at},
                      {"duration_ns", s.duration_ns},
                      {"duration_ms", s.duration_ms()},
                      {"status", s.ok ? "ok" : "failed"},
                      {"error", s.error}});
  return {{"run_id", log.run_id},
          {"stages", stages},
          {"total_duration_ns", log.total_ns()},
          {"total_duration_ms", log.total_duration_ms()}};
}

RunLog run_log_from_json(const json& j) {
  RunLog log;
  log.run_id = j.at("run_id").get<std::string>();
  for (const auto& s : j.at("stages"))
    log.stages.push_back({s.at("ordinal"), s.at("name"), s.at("started_at"), s.at("duration_ns"),
                          s.at("status") == "ok", s.value("error", "")});
  return log;
}

StageFailure::StageFailure(int ordinal, const std::string& name, const std::string& what)
    : Error("stage " + std::to_string(ordinal) + " (" + name + ") failed: " + what),
      ordinal_(ordinal) {}

// ---- steps -------------------------------------------------------------------

void reset_workspace(const Config& c) {
  Paths p = paths_for(c);
  // Clearing every downstream artifact keeps a halted run from leaving stale
  // files that look like they came from later stages.
  for (const auto& dir : {p.experiments, p.schemas, p.data}) fs::remove_all(dir);
  for (const auto& f : {p.local_store, p.snapshot, fs::path(p.snapshot.string() + ".json")})
    fs::remove(f);
  // The warehouse may live somewhere stage 6 cannot reach; that is its failure to report.
  std::error_code ec;
  fs::remove(p.warehouse_store, ec);
  fs::create_directories(p.schemas);
  fs::create_directories(p.experiments);
  // Restore the pristine manual baseline as the active schema.
  auto baseline = load_schema(c.baseline_schema, engine::Origin::manual);
  write_text(p.active_schema, engine::serialize(baseline));
}

void ingest(const Config& c) {
  Paths p = paths_for(c);
  fs::create_directories(p.data);
  models::write_season(p.raw_matches, models::generate_season(c.seed, c.num_teams, c.num_matches));
}

models::ModelRunReport build_models(const Config& c) {
  Paths p = paths_for(c);
  require(p.raw_matches, "ingest");
  auto raw = models::read_season(p.raw_matches);
  fs::create_directories(p.local_store.parent_path());
  store::LocalStore local(p.local_store);
  auto report = models::run_models(local, raw, true);
  store::snapshot(local, p.snapshot);
  write_json(p.model_run, models::to_json(report));
  return report;
}

synth::GenerationResult generate(const Config& c, std::optional<uint64_t> seed) {
  Paths p = paths_for(c);
  require(p.local_store, "run-models");
  store::LocalStore local(p.local_store, store::LocalStore::Mode::read_only);
  auto result = generate_with(c, local, seed.value_or(c.seed));
  synth::persist_generation(result, p.llm_raw);
  if (!result.success) {
    std::string failed;
    for (const auto& m : result.per_model)
      if (m.valid == 0) failed += (failed.empty() ? "" : ", ") + m.model;
    throw GenerationError("no usable tests generated for: " + failed);
  }
  write_text(p.generated_schema, engine::serialize(result.generated));
  return result;
}

engine::TestRunReport merge_and_test(const Config& c) {
  Paths p = paths_for(c);
  auto merge = merge_generated(c);
  write_text(p.schema_backup, engine::serialize(merge.backup));
  write_text(p.active_schema, engine::serialize(merge.merged));
  write_json(p.merge_record, engine::to_json(merge));
  store::LocalStore local(p.local_store, store::LocalStore::Mode::read_only);
  auto report = engine::execute_tests(local, merge.merged, models::catalog_schemas());
  write_json(p.test_results, engine::to_json(report));
  return report;
}

store::MigrationReport migrate(const Config& c) {
  Paths p = paths_for(c);
  require(p.local_store, "run-models");
  store::LocalStore local(p.local_store, store::LocalStore::Mode::read_only);
  fs::create_directories(p.warehouse_store.parent_path());
  store::WarehouseStore warehouse(p.warehouse_store, c.warehouse_namespace);
  auto report = store::migrate_tables(local, warehouse, models::curated_model_names());
  write_json(p.migration_report, store::to_json(report));
  if (!report.ok()) {
    for (const auto& t : report.tables)
      if (!t.ok) throw BackendError("migration of " + t.table + " failed: " + t.error);
  }
  return report;
}

xstore::CrossStoreReport validate(const Config& c) {
  Paths p = paths_for(c);
  require(p.local_store, "run-models");
  require(p.warehouse_store, "migrate");
  store::LocalStore local(p.local_store, store::LocalStore::Mode::read_only);
  store::WarehouseStore warehouse(p.warehouse_store, c.warehouse_namespace);
  auto report = xstore::validate_all(local, warehouse, curated_keys());
  write_json(p.crossstore_report, xstore::to_json(report));
  return report;
}

anomaly::ComparatorReport experiment(const Config& c) {
  Paths p = paths_for(c);
  if (!fs::exists(p.generated_schema)) generate(c);
  auto report = compare(c, merge_generated(c).merged);
  write_json(p.anomaly_results, anomaly::to_json(report));
  return report;
}

synth::AuditReport audit(const Config& c) {
  Paths p = paths_for(c);
  require(p.generation, "generate-tests");
  require(p.test_results, "test");
  if (!fs::exists(p.anomaly_results))
    throw AuditError("missing comparator detail " + p.anomaly_results.string() +
                     "; run `experiment` first");
  auto generation = synth::generation_from_json(
      read_json(p.generation), load_schema(p.generated_schema, engine::Origin::generated));
  auto comparator = anomaly::comparator_from_json(read_json(p.anomaly_results));
  auto clean = engine::run_report_from_json(read_json(p.test_results));
  auto report = synth::audit_tests(generation, merge_generated(c), clean, &comparator);
  write_json(p.usefulness_audit, synth::to_json(report));
  return report;
}

engine::TestRunReport run_tests(const Config& c, const std::optional<fs::path>& schema_file) {
  Paths p = paths_for(c);
  require(p.local_store, "run-models");
  fs::path file = schema_file.value_or(fs::exists(p.active_schema) ? p.active_schema : c.baseline_schema);
  auto schema = load_schema(file, engine::Origin::manual);
  store::LocalStore local(p.local_store, store::LocalStore::Mode::read_only);
  auto report = engine::execute_tests(local, schema, models::catalog_schemas());
  write_json(p.test_run, engine::to_json(report));
  return report;
}

// ---- summary -----------------------------------------------------------------

json compile_summary(const Config& c) {
  Paths p = paths_for(c);
  auto rel = [&](const fs::path& f) { return fs::relative(f, p.root).generic_string(); };
  json sources = json::object();
  auto load = [&](const char* key, const fs::path& f) -> std::optional<json> {
    if (!fs::exists(f)) return std::nullopt;
    sources[key] = rel(f);
    return read_json(f);
  };

  json s = json::object();

  if (auto m = load("model_run", p.model_run)) s["model_row_counts"] = *m;
  else s["model_row_counts"] = nullptr;

  if (auto g = load("generation", p.generation)) {
    json per_model = json::object();
    for (const auto& m : (*g)["per_model"]) per_model[m["model"].get<std::string>()] = m["items"];
    s["generation"] = {{"success", (*g)["success"]},
                       {"total_items", (*g)["total_items"]},
                       {"items_per_model", per_model}};
  } else {
    s["generation"] = nullptr;
  }

  if (auto a = load("usefulness_audit", p.usefulness_audit))
    s["audit"] = {{"totals", (*a)["totals"]}, {"per_model", (*a)["per_model"]}};
  else
    s["audit"] = nullptr;

  if (auto r = load("anomaly_results", p.anomaly_results)) {
    json det = json::object();
    for (auto& [cond, m] : (*r)["matrices"].items()) {
      json row = json::object();
      for (auto& [b, t] : m["batches"].items())
        row[b] = std::to_string(t["detected"].get<int>()) + "/" + std::to_string(t["total"].get<int>());
      row["total"] = std::to_string(m["total"]["detected"].get<int>()) + "/" +
                     std::to_string(m["total"]["total"].get<int>());
      det[cond] = row;
    }
    s["detection"] = {{"matrices", det},
                      {"absolute_gain_pp", (*r)["absolute_gain_pp"]},
                      {"relative_improvement_pct", (*r)["relative_improvement_pct"]}};
  } else {
    s["detection"] = nullptr;
  }

  if (auto x = load("crossstore_report", p.crossstore_report)) {
    json tables = json::array();
    for (const auto& t : (*x)["tables"])
      tables.push_back({{"table", t["table"]}, {"status", t["status"]}, {"row_count", t["row_count"]}});
    s["crossstore"] = {{"status", (*x)["status"]},
                       {"matched", (*x)["matched"]},
                       {"total", (*x)["total"]},
                       {"tables", tables}};
  } else {
    s["crossstore"] = nullptr;
  }

  json c5 = json::object();
  for (const char* mode : {"frozen", "fresh"}) {
    std::string key = std::string("c5_") + mode;
    if (auto r = load(key.c_str(), p.c5(mode)))
      c5[mode] = {{"stable", (*r)["stable"]},
                  {"stable_trials", (*r)["stable_trials"]},
                  {"trials", (*r)["trials"].size()}};
    else
      c5[mode] = nullptr;
  }
  s["c5"] = c5;

  if (auto l = load("runtime_log", p.runtime_log)) {
    json stages = json::array();
    for (const auto& st : (*l)["stages"])
      stages.push_back({{"ordinal", st["ordinal"]},
                        {"name", st["name"]},
                        {"duration_ms", st["duration_ms"]},
                        {"status", st["status"]}});
    s["runtime"] = {{"run_id", (*l)["run_id"]},
                    {"stages", stages},
                    {"total_duration_ms", (*l)["total_duration_ms"]}};
  } else {
    s["runtime"] = nullptr;
  }
  s["sources"] = sources;
  return s;
}

json write_summary(const Config& c) {
  json s = compile_summary(c);
  write_json(paths_for(c).research_summary, s);
  return s;
}

bool detection_regression(const anomaly::ComparatorReport& r) {
  using anomaly::Condition;
  const auto& base = r.matrix(Condition::manual_only).detected_ids;
  for (auto cond : {Condition::manual_expanded, Condition::manual_llm}) {
    const auto& ids = r.matrix(cond).detected_ids;
    if (!std::includes(ids.begin(), ids.end(), base.begin(), base.end())) return true;
  }
  return r.matrix(Condition::manual_llm).total.detected <
         r.matrix(Condition::manual_expanded).total.detected;
}

// ---- workflow ----------------------------------------------------------------

WorkflowResult run_workflow(const Config& cfg) {
  const Config c = with_defaults(cfg);
  RunLock lock(c.output_dir);
  Paths p = paths_for(c);

  WorkflowResult result;
  result.log.run_id = new_run_id();
  std::optional<anomaly::ComparatorReport> comparator;
  std::optional<xstore::CrossStoreReport> crossstore;

  const std::array<std::function<void()>, 8> stages = {
      [&] { reset_workspace(c); },
      [&] { ingest(c); },
      [&] { build_models(c); },
      [&] { generate(c); },
      [&] { merge_and_test(c); },
      [&] { migrate(c); },
      [&] { crossstore = validate(c); },
      [&] {
        comparator = experiment(c);
        audit(c);
      },
  };

  for (std::size_t i = 0; i < stages.size(); ++i) {
    StageRecord rec;
    rec.ordinal = static_cast<int>(i + 1);
    rec.name = kStageNames[i];
    rec.started_at = utc_now();
    auto start = Clock::now();
    try {
      stages[i]();
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    rec.duration_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
    result.log.stages.push_back(rec);
    write_json(p.runtime_log, to_json(result.log));
    if (!rec.ok) throw StageFailure(rec.ordinal, rec.name, rec.error);
  }

  result.summary = write_summary(c);
  result.mismatch = crossstore && crossstore->status != xstore::Verdict::match;
  result.regression = comparator && detection_regression(*comparator);
  return result;
}

// ---- C5 ----------------------------------------------------------------------

const char* c5_mode_name(C5Mode m) { return m == C5Mode::frozen ? "frozen" : "fresh"; }

StabilityReport run_c5(const Config& cfg, C5Mode mode, int trials, bool per_trial_seeds) {
  if (trials < 1) throw InvalidParameter("c5 needs at least one trial");
  const Config c = with_defaults(cfg);
  RunLock lock(c.output_dir);
  Paths p = paths_for(c);
  if (!fs::exists(p.snapshot)) {
    ingest(c);
    build_models(c);
  }
  auto base = load_schema(c.baseline_schema, engine::Origin::manual);
  auto catalog = models::catalog_schemas();

  auto merged_for = [&](uint64_t seed) {
    store::LocalStore local(p.local_store, store::LocalStore::Mode::read_only);
    auto gen = generate_with(c, local, seed);
    if (!gen.success) {
      std::string failed;
      for (const auto& m : gen.per_model)
        if (m.valid == 0) failed += (failed.empty() ? "" : ", ") + m.model;
      throw GenerationError("seed " + std::to_string(seed) + " produced no usable tests for " + failed);
    }
    return engine::merge_schemas(base, gen.generated, catalog).merged;
  };

  StabilityReport report;
  report.mode = mode;
  std::optional<engine::SchemaFile> frozen;
  if (mode == C5Mode::frozen) frozen = merged_for(c.seed);

  for (int i = 1; i <= trials; ++i) {
    Trial t;
    t.index = i;
    t.seed = mode == C5Mode::fresh && per_trial_seeds ? static_cast<uint64_t>(i) : c.seed;
    try {
      auto cmp = compare(c, frozen ? *frozen : merged_for(t.seed));
      t.totals = TrialTotals{cmp.matrix(anomaly::Condition::manual_only).total,
                             cmp.matrix(anomaly::Condition::manual_expanded).total,
                             cmp.matrix(anomaly::Condition::manual_llm).total};
    } catch (const Error& e) {
      t.error = e.what();
    }
    report.trials.push_back(std::move(t));
  }

  // The reference outcome is the most common one; anything else deviates.
  std::map<std::string, int> votes;
  std::optional<TrialTotals> modal;
  int best = 0;
  for (const auto& t : report.trials) {
    if (!t.totals) continue;
    const auto& x = *t.totals;
    std::string key = std::to_string(x.manual_only.detected) + "/" + std::to_string(x.manual_expanded.detected) +
                      "/" + std::to_string(x.manual_llm.detected);
    if (++votes[key] > best) {
      best = votes[key];
      modal = x;
    }
  }
  for (const auto& t : report.trials)
    if (!t.totals || !modal || !(*t.totals == *modal)) report.deviating_trials.push_back(t.index);
  report.stable = report.deviating_trials.empty();
  write_json(p.c5(c5_mode_name(mode)), to_json(report));
  return report;
}

json to_json(const StabilityReport& r) {
  auto tally = [](const anomaly::Tally& t) {
    return json{{"detected", t.detected}, {"total", t.total}};
  };
  json trials = json::array();
  for (const auto& t : r.trials) {
    json totals = nullptr;
    if (t.totals)
      totals = {{"manual_only", tally(t.totals->manual_only)},
                {"manual_expanded", tally(t.totals->manual_expanded)},
                {"manual_llm", tally(t.totals->manual_llm)}};
    trials.push_back({{"trial", t.index}, {"seed", t.seed}, {"totals", totals}, {"error", t.error}});
  }
  return {{"mode", r.mode == C5Mode::frozen ? "frozen_schema" : "fresh_generation"},
          {"trials", trials},
          {"stable", r.stable},
          {"stable_trials", std::to_string(r.trials.size() - r.deviating_trials.size()) + "/" +
                                std::to_string(r.trials.size())},
          {"deviating_trials", r.deviating_trials}};
}

}  // namespace dq::orch
