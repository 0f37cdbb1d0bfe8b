#include <doctest.h>

#include "dq/backend.hpp"
#include "dq/errors.hpp"
#include "dq/models.hpp"
#include "support.hpp"

using namespace dq;
using namespace dq::store;

namespace {

TableSchema people() {
  return {"people",
          {{"id", ColumnType::integer(), false},
           {"name", ColumnType::text(), true},
           {"born", ColumnType::date(), true}},
          {"id"}};
}

std::vector<Row> some_people() {
  return {{int64_t{1}, std::string("ada"), Date::from_ymd(1815, 12, 10)},
          {int64_t{2}, Value{}, Date::from_ymd(1906, 12, 9)},
          {int64_t{3}, std::string("o'neil"), Value{}}};
}

}  // namespace

TEST_SUITE("backend") {

TEST_CASE("local store round trips typed rows") {
  auto dir = dqt::fresh_dir("backend");
  LocalStore local(dir / "l.db");
  local.create_table(people());
  CHECK(local.bulk_load("people", some_people()) == 3);
  CHECK(local.count_rows("people") == 3);
  auto t = local.read_table("people");
  CHECK(t.rows == some_people());
  // No declared constraints: defects must be injectable.
  CHECK(t.schema.primary_key.empty());
  CHECK(t.schema.columns[0].nullable);
  CHECK(local.has_table("PEOPLE"));
  CHECK(local.list_tables() == std::vector<std::string>{"people"});
  local.drop_table("people");
  CHECK_FALSE(local.has_table("people"));
}

TEST_CASE("warehouse dialect uppercases and widens") {
  auto dir = dqt::fresh_dir("backend");
  WarehouseStore wh(dir / "w.db");
  wh.create_table(people());
  wh.bulk_load("people", some_people());
  auto d = wh.describe("people");
  CHECK(d.name == "PEOPLE");
  CHECK(d.columns[0].name == "ID");
  CHECK(d.columns[0].type == ColumnType::integer());
  CHECK(d.columns[2].type == ColumnType::text());
  CHECK(wh.dialect().table("people") == "\"migrated\".\"PEOPLE\"");
  CHECK(wh.list_tables() == std::vector<std::string>{"PEOPLE"});
  // Same content, different physical shape, same checksum.
  LocalStore local(dir / "l.db");
  local.create_table(people());
  local.bulk_load("people", some_people());
  CHECK(canonical::table_checksum(local.read_table("people")) ==
        canonical::table_checksum(wh.read_table("people")));
}

TEST_CASE("declared type mapping") {
  CHECK(parse_declared_type("NUMBER(38,0)") == ColumnType::integer());
  CHECK(parse_declared_type("BIGINT") == ColumnType::integer());
  CHECK(parse_declared_type("VARCHAR(16777216)") == ColumnType::text());
  CHECK(parse_declared_type("NUMBER(10,2)") == ColumnType::decimal(10, 2));
}

TEST_CASE("quoting") {
  CHECK(Dialect::quote("a\"b") == "\"a\"\"b\"");
  CHECK(Dialect::literal("o'neil") == "'o''neil'");
}

TEST_CASE("query errors surface as BackendError") {
  auto dir = dqt::fresh_dir("backend");
  LocalStore local(dir / "l.db");
  CHECK_THROWS_AS(local.query("SELECT * FROM nowhere"), BackendError);
  CHECK_THROWS_AS(local.read_table("nowhere"), BackendError);
}

TEST_CASE("snapshot and restore") {
  auto s = dqt::seeded_store("snap");
  auto before = canonical::table_checksum(s.local->read_table("fct_matches"));
  CHECK(s.snap.captured_tables.size() == 4);

  s.local->execute("DELETE FROM \"main\".\"fct_matches\" WHERE match_id < 10");
  s.local->drop_table("dim_teams");
  restore(*s.local, s.snap);
  CHECK(canonical::table_checksum(s.local->read_table("fct_matches")) == before);
  CHECK(s.local->count_rows("dim_teams") == 20);

  auto loaded = load_snapshot(s.snap.path);
  REQUIRE(loaded.captured_tables.size() == s.snap.captured_tables.size());
  for (std::size_t i = 0; i < loaded.captured_tables.size(); ++i) {
    CHECK(loaded.captured_tables[i].table == s.snap.captured_tables[i].table);
    CHECK(loaded.captured_tables[i].checksum == s.snap.captured_tables[i].checksum);
  }
}

TEST_CASE("restore refuses a tampered snapshot and leaves the store alone") {
  auto s = dqt::seeded_store("snap");
  {
    LocalStore copy(s.snap.path);
    copy.execute("UPDATE \"main\".\"dim_teams\" SET team_name = 'X' WHERE team_id = 1");
  }
  s.local->execute("DELETE FROM \"main\".\"dim_teams\" WHERE team_id = 2");
  CHECK_THROWS_AS(restore(*s.local, s.snap), SnapshotError);
  CHECK(s.local->count_rows("dim_teams") == 19);
}

TEST_CASE("missing snapshot manifest") {
  auto dir = dqt::fresh_dir("snap");
  CHECK_THROWS_AS(load_snapshot(dir / "nothing.clean"), SnapshotError);
}

TEST_CASE("checksum hex round trip") {
  CHECK(format_checksum(0xdeadbeefULL) == "00000000deadbeef");
  CHECK(parse_checksum("00000000deadbeef") == 0xdeadbeefULL);
}

}  // TEST_SUITE
