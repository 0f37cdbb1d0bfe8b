#include <doctest.h>

#include "dq/crossstore.hpp"
#include "dq/errors.hpp"
#include "dq/migration.hpp"
#include "dq/models.hpp"
#include "support.hpp"

using namespace dq;
using namespace dq::xstore;

namespace {

struct Migrated {
  dqt::SeededStore s = dqt::seeded_store("xstore");
  store::WarehouseStore wh{s.dir / "wh.db"};
  store::MigrationReport report = store::migrate_tables(*s.local, wh, models::curated_model_names());
};

std::vector<TableKeys> keys() {
  return {{"dim_teams", {"team_id"}}, {"fct_matches", {"match_id"}}, {"fct_training_dataset", {"match_id"}}};
}

}  // namespace

TEST_SUITE("crossstore") {

TEST_CASE("migration copies every curated table") {
  Migrated m;
  CHECK(m.report.ok());
  CHECK(m.report.target_namespace == "migrated");
  REQUIRE(m.report.tables.size() == 3);
  CHECK(m.report.tables[0].rows_loaded == 20);
  CHECK(m.report.tables[1].rows_loaded == 100);
  CHECK(m.wh.has_table("FCT_MATCHES"));
  CHECK_THROWS_AS(store::migrate_tables(*m.s.local, m.wh, {"stg_matches"}), InvalidParameter);
}

TEST_CASE("clean migration matches") {
  Migrated m;
  auto r = validate_all(*m.s.local, m.wh, keys());
  CHECK(r.status == Verdict::match);
  CHECK(r.matched() == 3);
  CHECK_FALSE(r.vacuous);
  for (const auto& t : r.tables) {
    CHECK(t.row_count.equal());
    CHECK(t.checksum.equal());
    CHECK(t.null_summary_equal());
    CHECK(t.row_diffs.empty());
    CHECK(t.failures.empty());
  }
}

TEST_CASE("one corrupted cell gives one keyed diff") {
  Migrated m;
  m.wh.execute("UPDATE \"migrated\".\"DIM_TEAMS\" SET \"TEAM_NAME\" = NULL WHERE \"TEAM_ID\" = 5");
  auto t = validate_table(*m.s.local, m.wh, "dim_teams", {"team_id"});
  CHECK(t.status == Verdict::mismatch);
  CHECK(t.row_count.equal());
  CHECK_FALSE(t.checksum.equal());
  REQUIRE(t.row_diffs.size() == 1);
  CHECK(t.row_diffs[0].key == "team_id=5");
  REQUIRE(t.row_diffs[0].remote_row);
  CHECK(t.row_diffs[0].remote_row->at("team_name") == "\\N");
  CHECK(t.failures == std::vector<std::string>{"checksum", "null_summary", "row_diffs"});
  auto all = validate_all(*m.s.local, m.wh, keys());
  CHECK(all.status == Verdict::mismatch);
  CHECK(all.matched() == 2);
}

TEST_CASE("deleted and extra rows show one-sided diffs") {
  Migrated m;
  m.wh.execute("DELETE FROM \"migrated\".\"FCT_MATCHES\" WHERE \"MATCH_ID\" = 7");
  auto t = validate_table(*m.s.local, m.wh, "fct_matches", {"match_id"});
  CHECK_FALSE(t.row_count.equal());
  REQUIRE(t.row_diffs.size() == 1);
  CHECK(t.row_diffs[0].local_row);
  CHECK_FALSE(t.row_diffs[0].remote_row);
}

TEST_CASE("missing tables and bad keys") {
  Migrated m;
  m.wh.drop_table("fct_training_dataset");
  auto t = validate_table(*m.s.local, m.wh, "fct_training_dataset", {"match_id"});
  CHECK(t.status == Verdict::mismatch);
  CHECK(t.local_present);
  CHECK_FALSE(t.remote_present);
  CHECK(t.failures == std::vector<std::string>{"missing_table"});
  CHECK_THROWS_AS(validate_table(*m.s.local, m.wh, "dim_teams", {}), InvalidParameter);
  auto empty = validate_all(*m.s.local, m.wh, {});
  CHECK(empty.vacuous);
}

TEST_CASE("report JSON carries hex checksums") {
  Migrated m;
  auto j = to_json(validate_all(*m.s.local, m.wh, keys()));
  CHECK(j["status"] == "MATCH");
  auto local = j["tables"][0]["checksum"]["local"].get<std::string>();
  CHECK(local.size() == 16);
  CHECK(local == j["tables"][0]["checksum"]["remote"].get<std::string>());
}

}  // TEST_SUITE
