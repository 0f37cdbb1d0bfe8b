#include <doctest.h>

#include <algorithm>

#include "dq/engine.hpp"
#include "dq/models.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace dq;
using namespace dq::engine;

namespace {

const Catalog& catalog() {
  static const Catalog c = models::catalog_schemas();
  return c;
}

std::vector<ParseIssue::Code> issue_codes(std::string_view yaml) {
  try {
    parse_schema_file(yaml, catalog());
  } catch (const ParseError& e) {
    std::vector<ParseIssue::Code> out;
    for (const auto& i : e.issues()) out.push_back(i.code);
    return out;
  }
  return {};
}

std::string one_test(std::string_view model, std::string_view column, std::string_view test) {
  return "version: 1\nmodels:\n  - name: " + std::string(model) + "\n    columns:\n      - name: " +
         std::string(column) + "\n        tests:\n          - " + std::string(test) + "\n";
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("fixture schemas parse") {
  CHECK(dqt::fixture_schema("manual_baseline").test_count() == 6);
  CHECK(dqt::fixture_schema("manual_expanded").test_count() == 16);
}

TEST_CASE("ids are content derived") {
  CHECK(make_test_id("dim_teams", NotNull{"team_id"}) == "dim_teams.team_id.not_null");
  CHECK(make_test_id("fct_matches", Expression{"home_goals >= 0"}).rfind("fct_matches.__model__.expression.", 0) == 0);
  auto a = make_test("fct_matches", AcceptedValues{"match_status", {"A", "B"}}, Origin::manual);
  auto b = make_test("fct_matches", AcceptedValues{"match_status", {"B", "A"}}, Origin::generated);
  CHECK(a.id == b.id);
  CHECK(semantically_equal(a, b));
  auto c = make_test("fct_matches", AcceptedValues{"match_status", {"A"}}, Origin::manual);
  CHECK(a.id != c.id);
}

TEST_CASE("strict parse reports every issue with a code") {
  using C = ParseIssue::Code;
  CHECK(issue_codes("version: 1\nmodels: [\n") == std::vector{C::syntax});
  CHECK(issue_codes("version: 1\nmodels: []\nextra: 1\n") == std::vector{C::unknown_top_level_key});
  CHECK(issue_codes(one_test("nope", "x", "not_null")) == std::vector{C::unknown_model});
  CHECK(issue_codes(one_test("dim_teams", "nope", "not_null")) == std::vector{C::unknown_column});
  CHECK(issue_codes(one_test("dim_teams", "team_id", "is_positive")) == std::vector{C::unknown_test_kind});
  CHECK(issue_codes(one_test("dim_teams", "team_id", "accepted_values: {values: []}")) ==
        std::vector{C::malformed_parameters});
  CHECK(issue_codes(one_test("dim_teams", "team_id", "relationship: {to: dim_teams, field: nope}")) ==
        std::vector{C::unknown_column});
  auto dup = "version: 1\nmodels:\n  - name: dim_teams\n    columns:\n      - name: team_id\n"
             "        tests: [not_null, not_null]\n";
  CHECK(issue_codes(dup) == std::vector{C::duplicate_test});
}

TEST_CASE("expressions are restricted to a single predicate") {
  const auto& m = catalog()[2];
  REQUIRE(m.name == "fct_matches");
  CHECK_FALSE(check_expression("home_goals >= 0 AND away_goals >= 0", m));
  CHECK_FALSE(check_expression("match_status IN ('FINISHED', 'SCHEDULED')", m));
  CHECK_FALSE(check_expression("length(match_status) > 0", m));
  CHECK(check_expression("1 = 1; DROP TABLE dim_teams", m));
  CHECK(check_expression("home_goals IN (SELECT 1)", m));
  CHECK(check_expression("nope > 1", m));
  CHECK(check_expression("load_extension('x')", m));
  CHECK(check_expression("", m));
  CHECK(check_expression("(home_goals > 1", m));
  CHECK(check_expression("home_goals > 1 -- x", m));
}

TEST_CASE("lenient parse keeps invalid items aside") {
  std::string doc =
      "version: 1\nmodels:\n  - name: fct_matches\n    columns:\n      - name: match_id\n"
      "        tests: [not_null, bogus]\n      - name: missing\n        tests: [not_null]\n";
  auto parsed = parse_candidates(doc, catalog());
  CHECK(parsed.valid.test_count() == 1);
  REQUIRE(parsed.invalid.size() == 2);
  CHECK(parsed.invalid[0].issue.code == ParseIssue::Code::unknown_test_kind);
  CHECK(parsed.invalid[1].issue.code == ParseIssue::Code::unknown_column);
  CHECK_THROWS_AS(parse_candidates("models: {", catalog()), ParseError);
}

TEST_CASE("serialize round trips") {
  for (auto name : {"manual_baseline", "manual_expanded"}) {
    auto s = dqt::fixture_schema(name);
    auto text = serialize(s);
    auto back = parse_schema_file(text, catalog());
    CHECK(serialize(back) == text);
    CHECK(back.test_count() == s.test_count());
  }
}

TEST_CASE("compiled SQL shapes") {
  store::Dialect local(store::Role::local, "main");
  store::Dialect wh(store::Role::warehouse, "migrated");
  auto nn = compile_test(make_test("dim_teams", NotNull{"team_id"}, Origin::manual), catalog(), local);
  CHECK(nn.sql == "SELECT * FROM \"main\".\"dim_teams\" WHERE \"team_id\" IS NULL");
  auto nn_wh = compile_test(make_test("dim_teams", NotNull{"team_id"}, Origin::manual), catalog(), wh);
  CHECK(nn_wh.sql == "SELECT * FROM \"migrated\".\"DIM_TEAMS\" WHERE \"TEAM_ID\" IS NULL");
  auto u = compile_test(make_test("dim_teams", Unique{"team_id"}, Origin::manual), catalog(), local);
  CHECK(u.sql.find("GROUP BY \"team_id\" HAVING COUNT(*) > 1") != std::string::npos);
  auto av = compile_test(make_test("fct_matches", AcceptedValues{"match_status", {"it's"}}, Origin::manual),
                         catalog(), local);
  CHECK(av.sql.find("NOT IN ('it''s')") != std::string::npos);
  CHECK_THROWS_AS(compile_test(make_test("fct_matches", Expression{"x;"}, Origin::manual), catalog(), local),
                  CompileError);
}

TEST_CASE("execution against a clean store") {
  auto s = dqt::seeded_store("engine");
  auto r = execute_tests(*s.local, dqt::fixture_schema("manual_expanded"), catalog());
  CHECK(r.passed == 16);
  CHECK(r.failed == 0);
  CHECK(r.errored == 0);
  CHECK(std::is_sorted(r.results.begin(), r.results.end(),
                       [](const auto& a, const auto& b) { return a.test_id < b.test_id; }));
  REQUIRE(r.find("dim_teams.team_id.unique"));
  CHECK(r.find("dim_teams.team_id.unique")->failing_rows == 0);
  CHECK_FALSE(r.find("nope"));
}

TEST_CASE("failures and per-test errors") {
  auto s = dqt::seeded_store("engine");
  s.local->execute("UPDATE fct_matches SET match_status = 'X' WHERE match_id IN (1, 2, 3)");
  s.local->execute("INSERT INTO dim_teams SELECT * FROM dim_teams WHERE team_id IN (1, 2)");
  s.local->drop_table("fct_training_dataset");
  auto r = execute_tests(*s.local, dqt::fixture_schema("manual_expanded"), catalog());
  auto* av = r.find(make_test_id("fct_matches", AcceptedValues{"match_status", {"FINISHED", "SCHEDULED", "POSTPONED"}}));
  REQUIRE(av);
  CHECK(av->status == Status::fail);
  CHECK(av->failing_rows == 3);
  CHECK(r.find("dim_teams.team_id.unique")->failing_rows == 2);
  auto* gone = r.find("fct_training_dataset.match_id.not_null");
  REQUIRE(gone);
  CHECK(gone->status == Status::error);
  CHECK_FALSE(gone->failing_rows);
  CHECK(r.errored == 5);
  CHECK(r.passed + r.failed + r.errored == 16);
}

TEST_CASE("run report JSON round trip") {
  auto s = dqt::seeded_store("engine");
  auto r = execute_tests(*s.local, dqt::fixture_schema("manual_baseline"), catalog());
  auto back = run_report_from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
}

TEST_CASE("merge adds, deduplicates and rejects") {
  auto base = dqt::fixture_schema("manual_baseline");
  SchemaFile gen;
  gen.add(make_test("dim_teams", NotNull{"team_id"}, Origin::generated));
  gen.add(make_test("dim_teams", NotNull{"team_name"}, Origin::generated));
  gen.add(make_test("fct_matches", Expression{"home_goals >= 0"}, Origin::generated));
  gen.add(make_test("fct_matches", Relationship{"home_team_id", "nowhere", "id"}, Origin::generated));
  auto m = merge_schemas(base, gen, catalog());
  CHECK(m.added.size() == 2);
  REQUIRE(m.duplicates.size() == 1);
  CHECK(m.duplicates[0].duplicate_of == "dim_teams.team_id.not_null");
  REQUIRE(m.invalid.size() == 1);
  CHECK(m.merged.version == base.version + 1);
  CHECK(m.merged.test_count() == 8);
  CHECK(serialize(m.backup) == serialize(base));
  CHECK(m.merged.find("dim_teams.team_name.not_null")->origin == Origin::generated);
}

TEST_CASE("compiled counts agree with the row-scan oracle on fixtures") {
  auto s = dqt::seeded_store("engine");
  s.local->execute("UPDATE fct_matches SET home_goals = NULL WHERE match_id = 5");
  s.local->execute("UPDATE dim_teams SET team_id = NULL WHERE team_id = 4");
  auto tables = dqt::oracle::load_tables(*s.local, models::curated_model_names());
  auto schema = dqt::fixture_schema("manual_expanded");
  auto r = execute_tests(*s.local, schema, catalog());
  for (const auto& t : schema.all_tests()) {
    CAPTURE(t.id);
    auto* res = r.find(t.id);
    REQUIRE(res);
    REQUIRE(res->failing_rows);
    CHECK(*res->failing_rows == dqt::oracle::failing_rows(t, tables));
  }
  CHECK(r.failed > 0);
}

}  // TEST_SUITE
