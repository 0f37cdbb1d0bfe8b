#pragma once

// Declarative test DSL (a subset of the dbt schema-file shape), its compiler
// to failing-rows SQL, the suite runner, and schema-file merging.

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dq/backend.hpp"
#include "dq/errors.hpp"
#include "dq/types.hpp"

namespace dq::engine {

struct NotNull {
  std::string column;
};
struct Unique {
  std::string column;
};
struct AcceptedValues {
  std::string column;
  std::vector<std::string> values;
};
struct Relationship {
  std::string column;
  std::string to_model;
  std::string to_field;
};
/// Model-level boolean predicate; rows where it evaluates false fail.
struct Expression {
  std::string predicate;
};

using TestKind =
    std::variant<NotNull, Unique, AcceptedValues, Relationship, Expression>;

enum class Origin { manual, expanded, generated };

const char* origin_name(Origin o);
const char* kind_name(const TestKind& kind);
/// Column a test is attached to; nullopt for model-level tests.
std::optional<std::string> kind_column(const TestKind& kind);

/// Column slot used for model-level tests in ids and detector signatures.
inline constexpr std::string_view kModelLevel = "__model__";

struct TestSpec {
  std::string id;
  std::string model;
  TestKind kind;
  Origin origin = Origin::manual;
};

/// model.column.kind[.hash]; hash covers normalized parameters so that
/// semantically equal tests share an id.
std::string make_test_id(std::string_view model, const TestKind& kind);
TestSpec make_test(std::string model, TestKind kind, Origin origin);
bool semantically_equal(const TestSpec& a, const TestSpec& b);

struct ColumnEntry {
  std::string name;
  std::vector<TestSpec> tests;
};

struct ModelEntry {
  std::string name;
  std::vector<ColumnEntry> columns;
  std::vector<TestSpec> tests;  // model-level
};

struct SchemaFile {
  int version = 1;
  std::vector<ModelEntry> models;

  std::vector<TestSpec> all_tests() const;
  std::size_t test_count() const;
  const TestSpec* find(std::string_view id) const;
  /// Places `spec` under its model/column, creating entries as needed.
  void add(const TestSpec& spec);
};

struct ParseIssue {
  enum class Code {
    syntax,
    unknown_top_level_key,
    unknown_key,
    unknown_model,
    unknown_column,
    unknown_test_kind,
    malformed_parameters,
    duplicate_model,
    duplicate_test,
    unsafe_expression,
  };
  Code code;
  std::string path;  // e.g. models[1].columns[0].tests[2]
  std::string message;
};

const char* issue_code_name(ParseIssue::Code code);

class ParseError : public Error {
 public:
  explicit ParseError(std::vector<ParseIssue> issues);
  const std::vector<ParseIssue>& issues() const { return issues_; }

 private:
  std::vector<ParseIssue> issues_;
};

/// Model schemas that test references resolve against.
using Catalog = std::vector<TableSchema>;

/// Strict parse: any issue throws ParseError listing all of them.
SchemaFile parse_schema_file(std::string_view text, const Catalog& catalog,
                             Origin origin = Origin::manual);

/// A test item that failed validation, kept for auditing.
struct InvalidCandidate {
  std::string model;
  std::string column;  // empty for model-level items
  std::string raw;     // YAML of the offending item
  ParseIssue issue;
};

struct CandidateParse {
  SchemaFile valid;
  std::vector<InvalidCandidate> invalid;
};

/// Lenient parse for generated documents: per-item validation failures are
/// returned as InvalidCandidates instead of failing the whole document.
/// Document-level problems (syntax, unknown top-level keys) still throw.
CandidateParse parse_candidates(std::string_view text, const Catalog& catalog,
                                Origin origin = Origin::generated);

std::string serialize(const SchemaFile& file);

/// Rejects anything but a single boolean predicate over `model`'s columns.
/// Returns an error message, or nullopt when safe.
std::optional<std::string> check_expression(std::string_view predicate,
                                            const TableSchema& model);

struct FailingRowsQuery {
  std::string test_id;
  std::string sql;  // rows (or duplicate-key groups) violating the test
};

FailingRowsQuery compile_test(const TestSpec& spec, const Catalog& catalog,
                              const store::Dialect& dialect);

enum class Status { pass, fail, error };
const char* status_name(Status s);

struct TestResult {
  std::string test_id;
  Status status = Status::error;
  std::optional<int64_t> failing_rows;  // absent on error
  std::string message;
  double duration_ms = 0;
};

struct TestRunReport {
  std::vector<TestResult> results;  // sorted by test_id
  int passed = 0;
  int failed = 0;
  int errored = 0;
  double duration_ms = 0;

  const TestResult* find(std::string_view id) const;
};

/// One result per test. Missing tables and bad SQL become per-test errors;
/// a broken connection aborts the run.
TestRunReport execute_tests(const store::Backend& backend,
                            const SchemaFile& schema, const Catalog& catalog);

struct DuplicateRecord {
  std::string candidate_id;
  std::string duplicate_of;
};

struct MergeResult {
  SchemaFile merged;
  SchemaFile backup;
  std::vector<std::string> added;  // generated ids inserted
  std::vector<DuplicateRecord> duplicates;
  std::vector<InvalidCandidate> invalid;
};

MergeResult merge_schemas(const SchemaFile& base, const SchemaFile& generated,
                          const Catalog& catalog);

nlohmann::json to_json(const TestResult& r);
nlohmann::json to_json(const TestRunReport& r);
TestRunReport run_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const InvalidCandidate& c);
InvalidCandidate invalid_candidate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MergeResult& m);  // records only, not schemas

}  // namespace dq::engine
