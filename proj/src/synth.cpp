#include "dq/synth.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "dq/canonical.hpp"
#include "dq/errors.hpp"
#include "dq/models.hpp"

namespace dq::synth {
namespace {

using json = nlohmann::json;

constexpr std::string_view kTask = "### TASK";
constexpr std::string_view kFormat = "### OUTPUT FORMAT";
constexpr std::string_view kSchema = "### SCHEMA";
constexpr std::string_view kSamples = "### SAMPLE ROWS";
constexpr std::string_view kReferences = "### REFERENCES";
constexpr std::string_view kConstraints = "### CONSTRAINTS";

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::vector<std::string> split(std::string_view s, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + sep.size();
  }
  return out;
}

std::string yaml_quoted(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

// ---- mock rules ------------------------------------------------------------

struct ParsedPrompt {
  std::string model;
  std::vector<std::pair<std::string, std::string>> columns;  // name, type
  std::vector<std::vector<std::string>> samples;
  std::vector<std::pair<std::string, std::string>> references;  // model, column
};

ParsedPrompt parse_prompt(const std::string& prompt) {
  ParsedPrompt p;
  std::istringstream in(prompt);
  std::string line, section;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (starts_with(line, "### ")) {
      section = line;
      header_seen = false;
      continue;
    }
    if (line.empty()) continue;
    if (section == kSchema) {
      if (starts_with(line, "model: ")) p.model = line.substr(7);
      else if (starts_with(line, "- ")) {
        auto parts = split(line.substr(2), " | ");
        if (parts.size() >= 2) p.columns.emplace_back(parts[0], parts[1]);
      }
    } else if (section == kSamples) {
      if (!header_seen) {
        header_seen = true;
        continue;
      }
      p.samples.push_back(split(line, " | "));
    } else if (section == kReferences && starts_with(line, "- ")) {
      auto dot = line.find('.', 2);
      if (dot != std::string::npos)
        p.references.emplace_back(line.substr(2, dot - 2), line.substr(dot + 1));
    }
  }
  return p;
}

// Known domains for categorical columns, the way a language model would
// recognise them from the column name.
const std::map<std::string, std::vector<std::string>>& vocabulary() {
  static const std::map<std::string, std::vector<std::string>> v = {
      {"match_status", {"FINISHED", "SCHEDULED", "POSTPONED"}},
      {"result_label", {"HOME_WIN", "AWAY_WIN", "DRAW"}},
  };
  return v;
}

struct ColumnTests {
  std::string column;
  std::vector<std::string> items;  // YAML list entries
};

std::string mock_suite(const ParsedPrompt& p, uint64_t seed) {
  const bool feature_table = p.model.find("training") != std::string::npos;
  std::string key;
  for (const auto& [name, _] : p.columns)
    if (ends_with(name, "_id")) {
      key = name;
      break;
    }

  std::vector<ColumnTests> columns;
  std::vector<std::string> model_tests;
  std::vector<std::string> completeness;

  for (std::size_t i = 0; i < p.columns.size(); ++i) {
    const auto& [name, type] = p.columns[i];
    ColumnTests ct{name, {}};
    if (name == key) {
      if (!feature_table) ct.items = {"not_null", "unique"};
    } else {
      ct.items.push_back("not_null");
    }
    if (type == "text" && (ends_with(name, "_status") || ends_with(name, "_label"))) {
      std::vector<std::string> values;
      if (auto it = vocabulary().find(name); it != vocabulary().end()) values = it->second;
      for (const auto& row : p.samples)
        if (i < row.size() && row[i] != canonical::kNullToken &&
            std::find(values.begin(), values.end(), row[i]) == values.end())
          values.push_back(row[i]);
      std::string list;
      for (const auto& v : values) list += (list.empty() ? "" : ", ") + yaml_quoted(v);
      ct.items.push_back("accepted_values: { values: [" + list + "] }");
    }
    if (name != key && ends_with(name, "_id")) {
      for (const auto& [ref_model, ref_col] : p.references)
        if (ref_model != p.model && ends_with(name, ref_col)) {
          ct.items.push_back("relationship: { to: " + ref_model + ", field: " + ref_col + " }");
          break;
        }
    }
    if (!ends_with(name, "_id")) completeness.push_back(name);
    if (!ct.items.empty()) columns.push_back(std::move(ct));
  }

  if (completeness.size() >= 2) {
    std::string pred;
    for (const auto& c : completeness) pred += (pred.empty() ? "" : " AND ") + c + " IS NOT NULL";
    model_tests.push_back("expression: { predicate: " + yaml_quoted(pred) + " }");
  }
  if (!feature_table) {
    for (const auto& [name, _] : p.columns) {
      if (!starts_with(name, "home_") || !ends_with(name, "_id")) continue;
      std::string away = "away_" + name.substr(5);
      for (const auto& [other, __] : p.columns)
        if (other == away)
          model_tests.push_back("expression: { predicate: " + yaml_quoted(name + " <> " + away) + " }");
    }
  }

  // The seed only permutes presentation order; test identity is content-based.
  std::mt19937_64 rng(seed);
  std::shuffle(columns.begin(), columns.end(), rng);

  std::string out = "version: 1\nmodels:\n  - name: " + p.model + "\n";
  if (!columns.empty()) {
    out += "    columns:\n";
    for (const auto& c : columns) {
      out += "      - name: " + c.column + "\n        tests:\n";
      for (const auto& t : c.items) out += "          - " + t + "\n";
    }
  }
  if (!model_tests.empty()) {
    out += "    tests:\n";
    for (const auto& t : model_tests) out += "      - " + t + "\n";
  }
  return out;
}

// Strips a surrounding markdown code fence, which chat models often add.
std::string strip_fence(const std::string& text) {
  auto first = text.find("```");
  if (first == std::string::npos) return text;
  auto body = text.find('\n', first);
  auto last = text.rfind("```");
  if (body == std::string::npos || last <= body) return text;
  return text.substr(body + 1, last - body - 1);
}

std::string candidate_id(const engine::InvalidCandidate& c, std::size_t index) {
  return "invalid:" + c.model + "." + (c.column.empty() ? std::string(engine::kModelLevel) : c.column) +
         "#" + std::to_string(index);
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
}

}  // namespace

ModelContext extract_context(const store::Backend& backend, const std::string& model,
                             int sample_n) {
  if (!models::is_curated(model))
    throw InvalidParameter("context extraction targets curated models only, not '" + model + "'");
  if (!backend.has_table(model)) throw BackendError("model '" + model + "' is not materialized");
  if (sample_n < 0) throw InvalidParameter("sample_n must be >= 0");

  ModelContext ctx;
  ctx.model = model;
  TableSchema described = backend.describe(model);
  for (auto c : described.columns) {
    c.name = to_lower(c.name);
    ctx.columns.push_back(std::move(c));
  }

  const auto& d = backend.dialect();
  std::string order;
  for (const auto& k : models::model(model).schema.primary_key)
    order += (order.empty() ? "" : ", ") + d.column(k);
  if (sample_n > 0) {
    // Pick rows by key order in SQL, but take their values from read_table
    // so they carry the declared column types.
    TypedTable all = backend.read_table(model);
    RowSet keys = backend.query("SELECT rowid FROM " + d.table(model) + " ORDER BY " + order +
                                ", rowid LIMIT " + std::to_string(sample_n));
    RowSet ids = backend.query("SELECT rowid FROM " + d.table(model) + " ORDER BY rowid");
    std::map<int64_t, std::size_t> position;
    for (std::size_t i = 0; i < ids.rows.size(); ++i) position[std::get<int64_t>(ids.rows[i][0])] = i;
    for (const auto& k : keys.rows) {
      const Row& row = all.rows.at(position.at(std::get<int64_t>(k[0])));
      std::vector<std::string> encoded;
      for (std::size_t c = 0; c < row.size(); ++c)
        encoded.push_back(canonical::encode_value(row[c], all.schema.columns[c].type,
                                                  all.schema.columns[c].name));
      ctx.sample_rows.push_back(std::move(encoded));
    }
  }

  for (const auto& name : models::curated_model_names()) {
    if (name == model || !starts_with(name, "dim_")) continue;
    for (const auto& k : models::model(name).schema.primary_key) ctx.references.push_back(name + "." + k);
  }
  return ctx;
}

std::string build_prompt(const ModelContext& ctx) {
  std::string p;
  p += std::string(kTask) + "\n";
  p += "Generate declarative data-quality tests for the model `" + ctx.model + "`.\n";
  p += "Cover completeness, uniqueness, domain validity and referential integrity where the "
       "schema and sample rows suggest them.\n\n";

  p += std::string(kFormat) + "\n";
  p += "Respond with one YAML document of exactly this shape and nothing else:\n";
  p += "version: 1\n"
       "models:\n"
       "  - name: " + ctx.model + "\n"
       "    columns:\n"
       "      - name: <column>\n"
       "        tests:\n"
       "          - not_null\n"
       "          - unique\n"
       "          - accepted_values: { values: [\"A\", \"B\"] }\n"
       "          - relationship: { to: <model>, field: <column> }\n"
       "    tests:\n"
       "      - expression: { predicate: \"<boolean SQL predicate over this model's columns>\" }\n";
  p += "Allowed test kinds: not_null, unique, accepted_values, relationship, expression.\n\n";

  p += std::string(kSchema) + "\n";
  p += "model: " + ctx.model + "\ncolumns:\n";
  for (const auto& c : ctx.columns)
    p += "- " + c.name + " | " + c.type.name() + " | " + (c.nullable ? "nullable" : "not null") + "\n";
  p += "\n";

  p += std::string(kSamples) + "\n";
  std::string header;
  for (const auto& c : ctx.columns) header += (header.empty() ? "" : " | ") + c.name;
  p += header + "\n";
  for (const auto& row : ctx.sample_rows) {
    std::string line;
    for (const auto& v : row) line += (line.empty() ? "" : " | ") + v;
    p += line + "\n";
  }
  p += "\n";

  p += std::string(kReferences) + "\n";
  if (ctx.references.empty()) p += "(none)\n";
  for (const auto& r : ctx.references) p += "- " + r + "\n";
  p += "\n";

  p += std::string(kConstraints) + "\n";
  p += "Only reference listed columns. Relationship targets must come from REFERENCES.\n";
  p += "Expression predicates are a single boolean condition; no subqueries or statements.\n";
  return p;
}

MockProvider::MockProvider(std::string profile) : profile_(std::move(profile)) {
  if (profile_ != "standard" && profile_ != "degenerate_seed3")
    throw InvalidParameter("unknown mock profile '" + profile_ + "'");
}

std::string MockProvider::generate(const std::string& prompt, uint64_t seed) {
  ParsedPrompt p = parse_prompt(prompt);
  if (p.model.empty()) throw GenerationError("mock provider: prompt has no SCHEMA section");
  if (profile_ == "degenerate_seed3" && seed == 3) return "version: 1\nmodels: []\n";
  return mock_suite(p, seed);
}

std::unique_ptr<Provider> make_provider(const std::string& kind, const std::string& mock_profile,
                                        const std::string& endpoint,
                                        const std::string& model_name) {
  if (kind == "mock") return std::make_unique<MockProvider>(mock_profile);
  if (kind == "http") {
    if (endpoint.empty() || model_name.empty())
      throw InvalidParameter("http provider needs an endpoint and a model name in the config");
    return std::make_unique<HttpProvider>(endpoint, model_name);
  }
  throw InvalidParameter("unknown provider '" + kind + "' (expected mock or http)");
}

std::string generate_with_retry(Provider& provider, const std::string& prompt, uint64_t seed,
                                const RetryPolicy& policy) {
  auto delay = policy.base_delay;
  for (int attempt = 0;; ++attempt) {
    try {
      return provider.generate(prompt, seed);
    } catch (const TransportError& e) {
      if (attempt >= policy.retries)
        throw GenerationError(provider.name() + " failed after " + std::to_string(attempt + 1) +
                              " attempts: " + e.what());
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
}

GenerationResult generate_tests(Provider& provider, const std::vector<ModelContext>& contexts,
                                uint64_t seed, const engine::Catalog& catalog,
                                const RetryPolicy& policy) {
  GenerationResult out;
  out.success = !contexts.empty();
  for (const auto& ctx : contexts) {
    ModelGeneration mg{ctx.model, 0, 0, {}};
    std::string prompt = build_prompt(ctx);
    std::string response = generate_with_retry(provider, prompt, seed, policy);
    out.raw.push_back({ctx.model, prompt, response});
    try {
      engine::CandidateParse parsed =
          engine::parse_candidates(strip_fence(response), catalog, engine::Origin::generated);
      for (auto& c : parsed.invalid) {
        ++mg.items;
        out.invalid.push_back(std::move(c));
      }
      for (const auto& t : parsed.valid.all_tests()) {
        ++mg.items;
        if (!iequals(t.model, ctx.model)) {
          out.invalid.push_back({t.model, engine::kind_column(t.kind).value_or(""), t.id,
                                 {engine::ParseIssue::Code::unknown_model, t.id,
                                  "test targets '" + t.model + "' but the prompt was for '" +
                                      ctx.model + "'"}});
          continue;
        }
        if (out.generated.find(t.id)) continue;
        ++mg.valid;
        out.generated.add(t);
      }
    } catch (const engine::ParseError& e) {
      mg.error = e.what();
    }
    if (mg.valid == 0) out.success = false;
    out.per_model.push_back(std::move(mg));
  }
  return out;
}

void persist_generation(const GenerationResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& r : result.raw) {
    write_text(dir / (r.model + ".prompt.txt"), r.prompt);
    write_text(dir / (r.model + ".response.txt"), r.response);
  }
  write_text(dir / "generation.json", to_json(result).dump(2) + "\n");
}

json to_json(const GenerationResult& g) {
  json per_model = json::array();
  for (const auto& m : g.per_model)
    per_model.push_back({{"model", m.model}, {"items", m.items}, {"valid", m.valid}, {"error", m.error}});
  json invalid = json::array();
  for (const auto& c : g.invalid) invalid.push_back(engine::to_json(c));
  int items = 0;
  for (const auto& m : g.per_model) items += m.items;
  return {{"success", g.success},
          {"total_items", items},
          {"valid_tests", g.generated.test_count()},
          {"per_model", per_model},
          {"invalid", invalid}};
}

GenerationResult generation_from_json(const json& j, engine::SchemaFile generated) {
  GenerationResult g;
  g.generated = std::move(generated);
  g.success = j.at("success").get<bool>();
  for (const auto& m : j.at("per_model"))
    g.per_model.push_back({m.at("model"), m.at("items"), m.at("valid"), m.value("error", "")});
  for (const auto& c : j.at("invalid")) g.invalid.push_back(engine::invalid_candidate_from_json(c));
  return g;
}

const char* audit_class_name(AuditClass c) {
  switch (c) {
    case AuditClass::useful: return "useful";
    case AuditClass::redundant: return "redundant";
    case AuditClass::low_value: return "low_value";
    case AuditClass::invalid: return "invalid";
  }
  return "invalid";
}

void AuditCounts::add(AuditClass c) {
  switch (c) {
    case AuditClass::useful: ++useful; break;
    case AuditClass::redundant: ++redundant; break;
    case AuditClass::low_value: ++low_value; break;
    case AuditClass::invalid: ++invalid; break;
  }
}

AuditReport audit_tests(const GenerationResult& generation, const engine::MergeResult& merge,
                        const engine::TestRunReport& clean_results,
                        const anomaly::ComparatorReport* comparator) {
  if (!comparator) throw AuditError("audit needs the comparator detail of a manual+LLM run");

  const auto by_test = comparator->detections_by_test(anomaly::Condition::manual_llm);
  const auto& baseline = comparator->matrix(anomaly::Condition::manual_only).detected_ids;

  AuditReport report;
  auto counts_for = [&](const std::string& model) -> AuditCounts& {
    for (auto& [m, c] : report.per_model)
      if (m == model) return c;
    report.per_model.emplace_back(model, AuditCounts{});
    return report.per_model.back().second;
  };
  for (const auto& m : generation.per_model) counts_for(m.model);

  auto record = [&](AuditRecord r) {
    counts_for(r.model).add(r.klass);
    report.totals.add(r.klass);
    report.records.push_back(std::move(r));
  };

  for (std::size_t i = 0; i < generation.invalid.size(); ++i) {
    const auto& c = generation.invalid[i];
    record({candidate_id(c, i), c.model, AuditClass::invalid, {}, {}, c.issue.message});
  }

  for (const auto& t : generation.generated.all_tests()) {
    AuditRecord r{t.id, t.model, AuditClass::low_value, {}, {}, {}};
    auto invalid = std::find_if(merge.invalid.begin(), merge.invalid.end(),
                                [&](const auto& c) { return c.raw == t.id; });
    const engine::TestResult* clean = clean_results.find(t.id);
    auto dup = std::find_if(merge.duplicates.begin(), merge.duplicates.end(),
                            [&](const auto& d) { return d.candidate_id == t.id; });

    if (invalid != merge.invalid.end()) {
      r.klass = AuditClass::invalid;
      r.execution_error = invalid->issue.message;
    } else if (!clean || clean->status == engine::Status::error) {
      r.klass = AuditClass::invalid;
      r.execution_error = clean ? clean->message : "test was not executed on the clean run";
    } else if (dup != merge.duplicates.end()) {
      r.klass = AuditClass::redundant;
      r.duplicate_of = dup->duplicate_of;
    } else {
      if (auto it = by_test.find(t.id); it != by_test.end())
        std::set_difference(it->second.begin(), it->second.end(), baseline.begin(), baseline.end(),
                            std::inserter(r.incremental_anomalies, r.incremental_anomalies.end()));
      bool clean_pass = clean->status == engine::Status::pass;
      r.klass = clean_pass && !r.incremental_anomalies.empty() ? AuditClass::useful
                                                               : AuditClass::low_value;
    }
    record(std::move(r));
  }
  return report;
}

json to_json(const AuditReport& r) {
  auto counts = [](const AuditCounts& c) {
    return json{{"useful", c.useful},
                {"redundant", c.redundant},
                {"low_value", c.low_value},
                {"invalid", c.invalid},
                {"total", c.total()}};
  };
  json records = json::array();
  for (const auto& x : r.records) {
    json evidence = nullptr;
    if (x.duplicate_of) evidence = {{"duplicate_of", *x.duplicate_of}};
    else if (x.execution_error) evidence = {{"execution_error", *x.execution_error}};
    else if (!x.incremental_anomalies.empty())
      evidence = {{"incremental_anomalies_detected", x.incremental_anomalies}};
    records.push_back({{"test_id", x.test_id},
                       {"model", x.model},
                       {"class", audit_class_name(x.klass)},
                       {"evidence", evidence}});
  }
  json per_model = json::object();
  for (const auto& [m, c] : r.per_model) per_model[m] = counts(c);
  return {{"totals", counts(r.totals)}, {"per_model", per_model}, {"records", records}};
}

}  // namespace dq::synth
