#include <algorithm>
#include <chrono>

#include "dq/engine.hpp"
#include "dq/errors.hpp"

namespace dq::engine {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

const TableSchema& resolve_model(const Catalog& catalog, std::string_view name) {
  for (const auto& t : catalog)
    if (iequals(t.name, name)) return t;
  throw CompileError("model '" + std::string(name) + "' is not in the catalog");
}

const Column& resolve_column(const TableSchema& model, std::string_view column) {
  auto idx = model.find_column(column);
  if (!idx)
    throw CompileError("column '" + std::string(column) + "' not in model " + model.name);
  return model.columns[*idx];
}

bool is_integer_text(std::string_view s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-') ? 1 : 0;
  if (i == s.size()) return false;
  return std::all_of(s.begin() + static_cast<std::ptrdiff_t>(i), s.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

FailingRowsQuery compile_test(const TestSpec& spec, const Catalog& catalog,
                              const store::Dialect& dialect) {
  const TableSchema& model = resolve_model(catalog, spec.model);
  const std::string table = dialect.table(model.name);
  std::string sql = std::visit(
      [&](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, NotNull>) {
          const auto col = dialect.column(resolve_column(model, k.column).name);
          return "SELECT * FROM " + table + " WHERE " + col + " IS NULL";
        } else if constexpr (std::is_same_v<T, Unique>) {
          const auto col = dialect.column(resolve_column(model, k.column).name);
          return "SELECT " + col + ", COUNT(*) AS n_records FROM " + table + " WHERE " +
                 col + " IS NOT NULL GROUP BY " + col + " HAVING COUNT(*) > 1";
        } else if constexpr (std::is_same_v<T, AcceptedValues>) {
          const Column& c = resolve_column(model, k.column);
          if (k.values.empty()) throw CompileError("accepted_values list is empty");
          bool numeric = c.type.kind == ColumnType::Kind::integer;
          std::string list;
          for (const auto& v : k.values) {
            if (!list.empty()) list += ", ";
            list += numeric && is_integer_text(v) ? v : store::Dialect::literal(v);
          }
          const auto col = dialect.column(c.name);
          return "SELECT * FROM " + table + " WHERE " + col + " IS NOT NULL AND " + col +
                 " NOT IN (" + list + ")";
        } else if constexpr (std::is_same_v<T, Relationship>) {
          const auto col = dialect.column(resolve_column(model, k.column).name);
          const TableSchema& parent = resolve_model(catalog, k.to_model);
          const auto field = dialect.column(resolve_column(parent, k.to_field).name);
          return "SELECT * FROM " + table + " WHERE " + col + " IS NOT NULL AND " + col +
                 " NOT IN (SELECT " + field + " FROM " + dialect.table(parent.name) +
                 " WHERE " + field + " IS NOT NULL)";
        } else {
          if (auto err = check_expression(k.predicate, model)) throw CompileError(*err);
          return "SELECT * FROM " + table + " WHERE NOT (" + k.predicate + ")";
        }
      },
      spec.kind);
  return FailingRowsQuery{spec.id, std::move(sql)};
}

const char* status_name(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::error: return "error";
  }
  return "error";
}

const TestResult* TestRunReport::find(std::string_view id) const {
  auto it = std::lower_bound(results.begin(), results.end(), id,
                             [](const TestResult& r, std::string_view k) { return r.test_id < k; });
  return it != results.end() && it->test_id == id ? &*it : nullptr;
}

TestRunReport execute_tests(const store::Backend& backend, const SchemaFile& schema,
                            const Catalog& catalog) {
  auto run_start = Clock::now();
  backend.query("SELECT 1");  // connection check; failure aborts the run

  TestRunReport report;
  for (const auto& spec : schema.all_tests()) {
    auto start = Clock::now();
    TestResult r;
    r.test_id = spec.id;
    try {
      std::vector<std::string> tables = {spec.model};
      if (auto* rel = std::get_if<Relationship>(&spec.kind)) tables.push_back(rel->to_model);
      for (const auto& t : tables)
        if (!backend.has_table(t)) throw BackendError("table '" + t + "' is missing");
      FailingRowsQuery q = compile_test(spec, catalog, backend.dialect());
      RowSet rs = backend.query("SELECT COUNT(*) FROM (" + q.sql + ")");
      int64_t n = std::get<int64_t>(rs.rows.at(0).at(0));
      r.failing_rows = n;
      r.status = n == 0 ? Status::pass : Status::fail;
      if (n > 0) r.message = std::to_string(n) + " failing row(s)";
    } catch (const Error& e) {
      r.status = Status::error;
      r.failing_rows.reset();
      r.message = e.what();
    }
    r.duration_ms = ms_since(start);
    report.results.push_back(std::move(r));
  }
  std::sort(report.results.begin(), report.results.end(),
            [](const TestResult& a, const TestResult& b) { return a.test_id < b.test_id; });
  for (const auto& r : report.results) {
    if (r.status == Status::pass) ++report.passed;
    else if (r.status == Status::fail) ++report.failed;
    else ++report.errored;
  }
  report.duration_ms = ms_since(run_start);
  return report;
}

MergeResult merge_schemas(const SchemaFile& base, const SchemaFile& generated,
                          const Catalog& catalog) {
  MergeResult out;
  out.backup = base;
  out.merged = base;
  out.merged.version = base.version + 1;
  for (const auto& spec : generated.all_tests()) {
    // Re-resolve against the catalog; the generated file may have been
    // produced with a different one.
    try {
      const TableSchema& model = resolve_model(catalog, spec.model);
      if (auto col = kind_column(spec.kind)) resolve_column(model, *col);
      if (auto* rel = std::get_if<Relationship>(&spec.kind))
        resolve_column(resolve_model(catalog, rel->to_model), rel->to_field);
      if (auto* ex = std::get_if<Expression>(&spec.kind))
        if (auto err = check_expression(ex->predicate, model)) throw CompileError(*err);
    } catch (const CompileError& e) {
      out.invalid.push_back(
          {spec.model, kind_column(spec.kind).value_or(""), spec.id,
           ParseIssue{ParseIssue::Code::unknown_column, spec.id, e.what()}});
      continue;
    }
    if (const TestSpec* existing = out.merged.find(spec.id)) {
      out.duplicates.push_back({spec.id, existing->id});
      continue;
    }
    out.merged.add(spec);
    out.added.push_back(spec.id);
  }
  return out;
}

json to_json(const TestResult& r) {
  return json{{"test_id", r.test_id},
              {"status", status_name(r.status)},
              {"failing_rows", r.failing_rows ? json(*r.failing_rows) : json(nullptr)},
              {"message", r.message},
              {"duration_ms", r.duration_ms}};
}

json to_json(const TestRunReport& r) {
  json results = json::array();
  for (const auto& x : r.results) results.push_back(to_json(x));
  return json{{"results", results},
              {"passed", r.passed},
              {"failed", r.failed},
              {"errored", r.errored},
              {"duration_ms", r.duration_ms}};
}

TestRunReport run_report_from_json(const json& j) {
  TestRunReport r;
  for (const auto& x : j.at("results")) {
    TestResult t;
    t.test_id = x.at("test_id").get<std::string>();
    std::string status = x.at("status").get<std::string>();
    t.status = status == "pass" ? Status::pass : status == "fail" ? Status::fail : Status::error;
    if (!x.at("failing_rows").is_null()) t.failing_rows = x.at("failing_rows").get<int64_t>();
    t.message = x.value("message", "");
    t.duration_ms = x.value("duration_ms", 0.0);
    r.results.push_back(std::move(t));
  }
  r.passed = j.value("passed", 0);
  r.failed = j.value("failed", 0);
  r.errored = j.value("errored", 0);
  r.duration_ms = j.value("duration_ms", 0.0);
  return r;
}

json to_json(const InvalidCandidate& c) {
  return json{{"model", c.model},
              {"column", c.column},
              {"raw", c.raw},
              {"code", issue_code_name(c.issue.code)},
              {"path", c.issue.path},
              {"message", c.issue.message}};
}

InvalidCandidate invalid_candidate_from_json(const json& j) {
  InvalidCandidate c;
  c.model = j.at("model").get<std::string>();
  c.column = j.at("column").get<std::string>();
  c.raw = j.at("raw").get<std::string>();
  c.issue.path = j.value("path", "");
  c.issue.message = j.value("message", "");
  std::string code = j.value("code", "syntax");
  c.issue.code = ParseIssue::Code::syntax;
  for (int i = 0; i <= static_cast<int>(ParseIssue::Code::unsafe_expression); ++i)
    if (code == issue_code_name(static_cast<ParseIssue::Code>(i)))
      c.issue.code = static_cast<ParseIssue::Code>(i);
  return c;
}

json to_json(const MergeResult& m) {
  json dups = json::array();
  for (const auto& d : m.duplicates)
    dups.push_back({{"candidate_id", d.candidate_id}, {"duplicate_of", d.duplicate_of}});
  json invalid = json::array();
  for (const auto& c : m.invalid) invalid.push_back(to_json(c));
  return json{{"merged_version", m.merged.version},
              {"backup_version", m.backup.version},
              {"merged_test_count", m.merged.test_count()},
              {"added", m.added},
              {"duplicates", dups},
              {"invalid", invalid}};
}

}  // namespace dq::engine
