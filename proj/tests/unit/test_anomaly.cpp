#include <doctest.h>

#include <cmath>

#include "dq/anomaly.hpp"
#include "dq/errors.hpp"
#include "dq/models.hpp"
#include "support.hpp"

using namespace dq;
using namespace dq::anomaly;

namespace {

Catalog shipped() { return load_catalog(dqt::data_dir() / "anomaly_catalog.json"); }

}  // namespace

TEST_SUITE("anomaly") {

TEST_CASE("shipped catalog shape") {
  auto c = shipped();
  CHECK(c.anomalies.size() == 16);
  CHECK(c.batch('A').size() == 4);
  CHECK(c.batch('B').size() == 6);
  CHECK(c.batch('C').size() == 6);
  REQUIRE(c.find("B2"));
  CHECK(std::holds_alternative<SetValue>(c.find("B2")->mutation));
  CHECK_FALSE(c.find("Z9"));
  auto again = catalog_from_json(to_json(c));
  CHECK(to_json(again) == to_json(c));
}

TEST_CASE("catalog validation") {
  auto j = to_json(shipped());
  j["anomalies"][0]["batch"] = "Q";
  CHECK_THROWS_AS(catalog_from_json(j), Error);
  auto k = to_json(shipped());
  k["anomalies"][1]["id"] = k["anomalies"][0]["id"];
  CHECK_THROWS_AS(catalog_from_json(k), Error);
}

TEST_CASE("slot of a test") {
  auto t = engine::make_test("fct_matches", engine::Expression{"home_goals >= 0"}, engine::Origin::manual);
  auto s = slot_of(t);
  CHECK(s.table == "fct_matches");
  CHECK(s.column == "__model__");
  CHECK(s.kind == "expression");
}

TEST_CASE("injection receipts and failure modes") {
  auto s = dqt::seeded_store("anomaly");
  auto c = shipped();
  auto r = inject(*s.local, *c.find("A2"));
  CHECK(r.anomaly_id == "A2");
  CHECK(s.local->count_rows("dim_teams") == 21);
  auto n = inject(*s.local, *c.find("B1"));
  REQUIRE(n.rows.size() == 1);
  CHECK(n.rows[0].key == "team_id=5");
  CHECK(n.rows[0].after == "NULL");

  AnomalySpec bad = *c.find("A3");
  bad.mutation = SetNull{{"match_id", Value{int64_t{100000}}}};
  auto before = canonical::table_checksum(s.local->read_table("fct_matches"));
  CHECK_THROWS_AS(inject(*s.local, bad), InjectionError);
  CHECK(canonical::table_checksum(s.local->read_table("fct_matches")) == before);
  bad.table = "nowhere";
  CHECK_THROWS_AS(inject(*s.local, bad), InjectionError);
}

TEST_CASE("golden comparator") {
  auto s = dqt::seeded_store("anomaly");
  auto exp = dqt::fixture_schema("manual_expanded", engine::Origin::expanded);
  Schemas schemas{dqt::fixture_schema("manual_baseline"), exp, exp};
  auto r = run_comparator(*s.local, s.snap, schemas, models::catalog_schemas(), shipped());
  const auto& base = r.matrix(Condition::manual_only);
  CHECK(base.total == Tally{7, 16});
  CHECK(base.batches.at('A') == Tally{4, 4});
  CHECK(base.batches.at('B') == Tally{0, 6});
  CHECK(base.batches.at('C') == Tally{3, 6});
  CHECK(r.matrix(Condition::manual_expanded).total == Tally{16, 16});
  REQUIRE(r.absolute_gain_pp);
  CHECK(*r.absolute_gain_pp == doctest::Approx(56.25));
  CHECK(*r.relative_improvement_pct == doctest::Approx(128.5714).epsilon(1e-5));
  CHECK(r.runs.size() == 9);
  // The store is back to clean afterwards.
  for (const auto& t : s.snap.captured_tables)
    CHECK(canonical::table_checksum(s.local->read_table(t.table)).value == t.checksum);

  auto back = comparator_from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
  auto by_test = r.detections_by_test(Condition::manual_expanded);
  auto av = engine::make_test_id("fct_matches",
                                 engine::AcceptedValues{"match_status", {"FINISHED", "SCHEDULED", "POSTPONED"}});
  CHECK(by_test.at(av) == std::set<std::string>{"B2", "C5"});
}

TEST_CASE("derived metrics are absent when undefined") {
  auto s = dqt::seeded_store("anomaly");
  auto none = dqt::fixture_schema("manual_baseline");
  none.models.clear();
  Schemas schemas{none, none, none};
  auto r = run_comparator(*s.local, s.snap, schemas, models::catalog_schemas(), shipped());
  CHECK(r.matrix(Condition::manual_only).total.detected == 0);
  CHECK_FALSE(r.relative_improvement_pct);
  REQUIRE(r.absolute_gain_pp);
  CHECK(*r.absolute_gain_pp == 0);
  auto empty = run_comparator(*s.local, s.snap, schemas, models::catalog_schemas(), Catalog{});
  CHECK_FALSE(empty.absolute_gain_pp);
}

}  // TEST_SUITE
