#include "dq/anomaly.hpp"

#include <fstream>

#include "dq/errors.hpp"

namespace dq::anomaly {
namespace {

using json = nlohmann::json;

Value value_from_json(const json& j) {
  if (j.is_null()) return std::monostate{};
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<int64_t>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_float())
    if (auto d = Decimal::parse(j.dump())) return *d;
  throw InvalidParameter("unsupported value in anomaly catalog: " + j.dump());
}

json value_to_json(const Value& v) {
  if (is_null(v)) return nullptr;
  if (auto* b = std::get_if<bool>(&v)) return *b;
  if (auto* i = std::get_if<int64_t>(&v)) return *i;
  return to_display(v);
}

RowSelector selector_from_json(const json& where) {
  if (!where.is_object() || where.size() != 1)
    throw InvalidParameter("row selector must have exactly one column: " + where.dump());
  auto it = where.begin();
  return {it.key(), value_from_json(it.value())};
}

const RowSelector& selector_of(const Mutation& m) {
  return std::visit([](const auto& x) -> const RowSelector& { return x.where; }, m);
}

const char* mutation_type(const Mutation& m) {
  switch (m.index()) {
    case 0: return "set_null";
    case 1: return "duplicate_row";
    default: return "set_value";
  }
}

std::string join(const std::vector<int64_t>& ids) {
  std::string out;
  for (auto id : ids) {
    if (!out.empty()) out += ", ";
    out += std::to_string(id);
  }
  return out;
}

}  // namespace

DetectorSlot slot_of(const engine::TestSpec& test) {
  return {to_lower(test.model),
          to_lower(engine::kind_column(test.kind).value_or(std::string(engine::kModelLevel))),
          engine::kind_name(test.kind)};
}

std::vector<const AnomalySpec*> Catalog::batch(char b) const {
  std::vector<const AnomalySpec*> out;
  for (const auto& a : anomalies)
    if (a.batch == b) out.push_back(&a);
  return out;
}

const AnomalySpec* Catalog::find(std::string_view id) const {
  for (const auto& a : anomalies)
    if (a.id == id) return &a;
  return nullptr;
}

Catalog catalog_from_json(const json& doc) {
  Catalog cat;
  for (const auto& a : doc.at("anomalies")) {
    AnomalySpec s;
    s.id = a.at("id").get<std::string>();
    std::string batch = a.at("batch").get<std::string>();
    if (batch.size() != 1 || batch[0] < 'A' || batch[0] > 'C')
      throw InvalidParameter(s.id + ": batch must be A, B or C");
    s.batch = batch[0];
    s.table = a.at("target").at("table").get<std::string>();
    s.column = a.at("target").at("column").get<std::string>();
    const json& m = a.at("mutation");
    std::string type = m.at("type").get<std::string>();
    RowSelector where = selector_from_json(m.at("where"));
    if (type == "set_null") s.mutation = SetNull{where};
    else if (type == "duplicate_row") s.mutation = DuplicateRow{where};
    else if (type == "set_value") s.mutation = SetValue{where, value_from_json(m.at("value"))};
    else throw InvalidParameter(s.id + ": unknown mutation '" + type + "'");
    for (const auto& d : a.at("detectors"))
      s.detectors.push_back({to_lower(d.at("table").get<std::string>()),
                             to_lower(d.at("column").get<std::string>()),
                             d.at("kind").get<std::string>()});
    if (s.detectors.empty()) throw InvalidParameter(s.id + ": empty detector signature");
    if (cat.find(s.id)) throw InvalidParameter("duplicate anomaly id " + s.id);
    cat.anomalies.push_back(std::move(s));
  }
  return cat;
}

Catalog load_catalog(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InvalidParameter("cannot read anomaly catalog " + file.string());
  try {
    return catalog_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw InvalidParameter("malformed anomaly catalog " + file.string() + ": " + e.what());
  }
}

json to_json(const Catalog& catalog) {
  json list = json::array();
  for (const auto& a : catalog.anomalies) {
    const RowSelector& sel = selector_of(a.mutation);
    json m = {{"type", mutation_type(a.mutation)},
              {"where", {{sel.column, value_to_json(sel.value)}}}};
    if (auto* sv = std::get_if<SetValue>(&a.mutation)) m["value"] = value_to_json(sv->value);
    json det = json::array();
    for (const auto& d : a.detectors)
      det.push_back({{"table", d.table}, {"column", d.column}, {"kind", d.kind}});
    list.push_back({{"id", a.id},
                    {"batch", std::string(1, a.batch)},
                    {"target", {{"table", a.table}, {"column", a.column}}},
                    {"mutation", m},
                    {"detectors", det}});
  }
  return {{"version", 1}, {"anomalies", list}};
}

MutationReceipt inject(store::Backend& backend, const AnomalySpec& spec) {
  if (!backend.has_table(spec.table))
    throw InjectionError(spec.id + ": table '" + spec.table + "' does not exist");
  TableSchema schema = backend.describe(spec.table);
  const RowSelector& sel = selector_of(spec.mutation);
  for (const auto& c : {spec.column, sel.column})
    if (!schema.has_column(c))
      throw InjectionError(spec.id + ": column '" + c + "' not in " + spec.table);

  const auto& d = backend.dialect();
  const std::string table = d.table(spec.table);
  const std::string target = d.column(spec.column);
  const std::string key = d.column(sel.column);

  // rowid pins the exact rows so a mutation of the selector column itself
  // (e.g. nulling the key it was selected by) stays well defined.
  RowSet hits = backend.query("SELECT rowid, " + target + " FROM " + table + " WHERE " + key +
                                  " = ? ORDER BY rowid",
                              {sel.value});
  if (hits.rows.empty())
    throw InjectionError(spec.id + ": selector " + sel.column + "=" + to_display(sel.value) +
                         " matches no rows in " + spec.table);

  std::vector<int64_t> rowids;
  MutationReceipt receipt{spec.id, spec.table, spec.column, {}};
  const std::string key_text = to_lower(sel.column) + "=" + to_display(sel.value);
  for (const auto& r : hits.rows) {
    rowids.push_back(std::get<int64_t>(r[0]));
    receipt.rows.push_back({key_text, to_display(r[1]), {}});
  }
  const std::string in_list = " WHERE rowid IN (" + join(rowids) + ")";

  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SetNull>) {
          backend.execute("UPDATE " + table + " SET " + target + " = NULL" + in_list);
          for (auto& r : receipt.rows) r.after = to_display(Value{});
        } else if constexpr (std::is_same_v<T, SetValue>) {
          backend.execute("UPDATE " + table + " SET " + target + " = ?" + in_list, {m.value});
          for (auto& r : receipt.rows) r.after = to_display(m.value);
        } else {
          backend.execute("INSERT INTO " + table + " SELECT * FROM " + table + in_list);
          for (auto& r : receipt.rows) r.after = r.before + " (duplicated)";
        }
      },
      spec.mutation);
  return receipt;
}

const char* condition_name(Condition c) {
  switch (c) {
    case Condition::manual_only: return "manual_only";
    case Condition::manual_expanded: return "manual_expanded";
    case Condition::manual_llm: return "manual_llm";
  }
  return "manual_only";
}

const engine::SchemaFile& Schemas::of(Condition c) const {
  switch (c) {
    case Condition::manual_only: return manual_only;
    case Condition::manual_expanded: return manual_expanded;
    case Condition::manual_llm: return manual_llm;
  }
  return manual_only;
}

BatchRun run_condition(Condition condition, char batch, store::LocalStore& local,
                       const store::Snapshot& clean, const Schemas& schemas,
                       const engine::Catalog& models, const Catalog& anomalies) {
  const engine::SchemaFile& schema = schemas.of(condition);
  auto specs = anomalies.batch(batch);

  BatchRun run;
  run.condition = condition;
  run.batch = batch;
  run.total = static_cast<int>(specs.size());

  store::restore(local, clean);
  engine::TestRunReport before = engine::execute_tests(local, schema, models);
  try {
    for (const auto* s : specs) run.receipts.push_back(inject(local, *s));
  } catch (...) {
    store::restore(local, clean);
    throw;
  }
  engine::TestRunReport after = engine::execute_tests(local, schema, models);
  store::restore(local, clean);

  std::map<std::string, DetectorSlot> slots;
  for (const auto& t : schema.all_tests()) slots.emplace(t.id, slot_of(t));

  for (const auto& r : after.results) {
    if (r.status != engine::Status::fail) continue;
    const auto* b = before.find(r.test_id);
    if (!b || b->status != engine::Status::pass) continue;
    const DetectorSlot& slot = slots.at(r.test_id);
    auto& hits = run.newly_failing[r.test_id];
    for (const auto* s : specs)
      if (std::find(s->detectors.begin(), s->detectors.end(), slot) != s->detectors.end()) {
        hits.insert(s->id);
        run.detected.insert(s->id);
      }
  }
  return run;
}

const DetectionMatrix& ComparatorReport::matrix(Condition c) const {
  for (const auto& m : matrices)
    if (m.condition == c) return m;
  throw InvalidParameter(std::string("no matrix for ") + condition_name(c));
}

std::map<std::string, std::set<std::string>> ComparatorReport::detections_by_test(
    Condition c) const {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& r : runs)
    if (r.condition == c)
      for (const auto& [test, ids] : r.newly_failing) out[test].insert(ids.begin(), ids.end());
  return out;
}

namespace {

void finalize(ComparatorReport& rep) {
  rep.matrices.clear();
  for (auto c : kConditions) {
    DetectionMatrix m;
    m.condition = c;
    for (char b : kBatches) m.batches[b] = {};
    for (const auto& r : rep.runs) {
      if (r.condition != c) continue;
      Tally& t = m.batches[r.batch];
      t.total += r.total;
      t.detected += static_cast<int>(r.detected.size());
      m.detected_ids.insert(r.detected.begin(), r.detected.end());
    }
    for (const auto& [_, t] : m.batches) {
      m.total.detected += t.detected;
      m.total.total += t.total;
    }
    rep.matrices.push_back(std::move(m));
  }
  const int n = rep.matrix(Condition::manual_only).total.total;
  const int base = rep.matrix(Condition::manual_only).total.detected;
  const int best = std::max(rep.matrix(Condition::manual_expanded).total.detected,
                            rep.matrix(Condition::manual_llm).total.detected);
  rep.absolute_gain_pp.reset();
  rep.relative_improvement_pct.reset();
  if (n > 0) rep.absolute_gain_pp = 100.0 * (best - base) / n;
  if (base > 0) rep.relative_improvement_pct = 100.0 * (best - base) / base;
}

json tally_json(const Tally& t) { return {{"detected", t.detected}, {"total", t.total}}; }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

ComparatorReport run_comparator(store::LocalStore& local, const store::Snapshot& clean,
                                const Schemas& schemas, const engine::Catalog& models,
                                const Catalog& anomalies) {
  ComparatorReport rep;
  for (char b : kBatches)
    for (auto c : kConditions)
      rep.runs.push_back(run_condition(c, b, local, clean, schemas, models, anomalies));
  finalize(rep);
  return rep;
}

json to_json(const ComparatorReport& r) {
  json matrices = json::object();
  for (const auto& m : r.matrices) {
    json batches = json::object();
    for (const auto& [b, t] : m.batches) batches[std::string(1, b)] = tally_json(t);
    matrices[condition_name(m.condition)] = {
        {"batches", batches}, {"total", tally_json(m.total)}, {"detected_ids", m.detected_ids}};
  }
  json runs = json::array();
  for (const auto& run : r.runs) {
    json receipts = json::array();
    for (const auto& rc : run.receipts) {
      json rows = json::array();
      for (const auto& row : rc.rows)
        rows.push_back({{"key", row.key}, {"before", row.before}, {"after", row.after}});
      receipts.push_back({{"anomaly_id", rc.anomaly_id},
                          {"table", rc.table},
                          {"column", rc.column},
                          {"rows", rows}});
    }
    runs.push_back({{"condition", condition_name(run.condition)},
                    {"batch", std::string(1, run.batch)},
                    {"total", run.total},
                    {"detected", run.detected},
                    {"newly_failing", run.newly_failing},
                    {"receipts", receipts}});
  }
  return {{"matrices", matrices},
          {"absolute_gain_pp", optional_json(r.absolute_gain_pp)},
          {"relative_improvement_pct", optional_json(r.relative_improvement_pct)},
          {"runs", runs}};
}

ComparatorReport comparator_from_json(const json& j) {
  ComparatorReport rep;
  for (const auto& x : j.at("runs")) {
    BatchRun run;
    std::string cond = x.at("condition").get<std::string>();
    for (auto c : kConditions)
      if (cond == condition_name(c)) run.condition = c;
    run.batch = x.at("batch").get<std::string>().at(0);
    run.total = x.at("total").get<int>();
    run.detected = x.at("detected").get<std::set<std::string>>();
    run.newly_failing = x.at("newly_failing").get<std::map<std::string, std::set<std::string>>>();
    for (const auto& rc : x.value("receipts", json::array())) {
      MutationReceipt m{rc.at("anomaly_id"), rc.at("table"), rc.at("column"), {}};
      for (const auto& row : rc.at("rows")) m.rows.push_back({row.at("key"), row.at("before"), row.at("after")});
      run.receipts.push_back(std::move(m));
    }
    rep.runs.push_back(std::move(run));
  }
  finalize(rep);
  return rep;
}

}  // namespace dq::anomaly
