#include <doctest.h>

#include <set>

#include "dq/errors.hpp"
#include "dq/models.hpp"
#include "support.hpp"

using namespace dq;
using namespace dq::models;

TEST_SUITE("models") {

TEST_CASE("season generation is deterministic and well formed") {
  auto a = generate_season(42, 20, 100);
  auto b = generate_season(42, 20, 100);
  CHECK(a == b);
  CHECK(a != generate_season(43, 20, 100));
  REQUIRE(a.size() == 100);
  std::set<std::string> teams;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].match_id == static_cast<int64_t>(i + 1));
    CHECK(a[i].home_team != a[i].away_team);
    teams.insert(a[i].home_team);
    teams.insert(a[i].away_team);
  }
  CHECK(teams.size() == 20);
  CHECK_THROWS_AS(generate_season(42, 1, 10), InvalidParameter);
}

TEST_CASE("season JSON round trip") {
  auto a = generate_season(7, 6, 12);
  CHECK(season_from_json(season_to_json(a)) == a);
  auto dir = dqt::fresh_dir("models");
  write_season(dir / "raw.json", a);
  CHECK(read_season(dir / "raw.json") == a);
}

TEST_CASE("dependency order") {
  auto order = build_order(model_catalog());
  CHECK(order == std::vector<std::string>{"stg_matches", "dim_teams", "fct_matches", "fct_training_dataset"});
  auto cyclic = model_catalog();
  cyclic[1].depends_on.push_back("fct_training_dataset");
  CHECK_THROWS_AS(build_order(cyclic), Error);
  CHECK(is_curated("fct_matches"));
  CHECK_FALSE(is_curated("stg_matches"));
}

TEST_CASE("full refresh row counts") {
  auto dir = dqt::fresh_dir("models");
  store::LocalStore local(dir / "l.db");
  auto report = run_models(local, generate_season(42, 20, 100), true);
  CHECK(report.rows("stg_matches") == 100);
  CHECK(report.rows("dim_teams") == 20);
  CHECK(report.rows("fct_matches") == 100);
  CHECK(report.rows("fct_training_dataset") == 100);
  // Rebuilding is idempotent.
  auto again = run_models(local, generate_season(42, 20, 100), true);
  CHECK(again.rows("dim_teams") == 20);
  CHECK_THROWS_AS(run_models(local, generate_season(42, 20, 100), false), ModelRunError);
}

TEST_CASE("training labels agree with goals") {
  auto s = dqt::seeded_store("models");
  auto rows = s.local->query(
      "SELECT COUNT(*) FROM fct_training_dataset WHERE "
      "(goal_diff > 0 AND result_label <> 'HOME_WIN') OR "
      "(goal_diff < 0 AND result_label <> 'AWAY_WIN') OR "
      "(goal_diff = 0 AND result_label <> 'DRAW')");
  CHECK(std::get<int64_t>(rows.rows.at(0).at(0)) == 0);
}

}  // TEST_SUITE
