#include "dq/models.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>

#include "dq/errors.hpp"

namespace dq::models {
namespace {

using json = nlohmann::json;

constexpr std::array<const char*, 20> kRoster = {
    "Arsenal",          "Aston Villa",         "AFC Bournemouth",
    "Brentford",        "Brighton & Hove Albion", "Burnley",
    "Chelsea",          "Crystal Palace",      "Everton",
    "Fulham",           "Liverpool",           "Luton Town",
    "Manchester City",  "Manchester United",   "Newcastle United",
    "Nottingham Forest", "Sheffield United",   "Tottenham Hotspur",
    "West Ham United",  "Wolverhampton Wanderers"};

// std distributions are implementation-defined; mt19937_64's raw stream is
// not, so bounded draws are done by hand for cross-platform determinism.
class SeasonRng {
 public:
  explicit SeasonRng(uint64_t seed) : engine_(seed) {}

  uint64_t below(uint64_t n) {
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

int64_t draw_goals(SeasonRng& rng) {
  // rough top-flight distribution, weights per 100
  static constexpr std::array<int, 6> weights = {25, 33, 23, 12, 5, 2};
  uint64_t roll = rng.below(100);
  for (std::size_t g = 0; g < weights.size(); ++g) {
    if (roll < static_cast<uint64_t>(weights[g])) return static_cast<int64_t>(g);
    roll -= static_cast<uint64_t>(weights[g]);
  }
  return 0;
}

std::string team_name(int index) {
  if (index < static_cast<int>(kRoster.size())) return kRoster[index];
  return "Club " + std::to_string(index + 1);
}

std::vector<ModelDefinition> make_catalog() {
  using CT = ColumnType;
  std::vector<ModelDefinition> out;

  out.push_back({"stg_matches",
                 {},
                 {"stg_matches",
                  {{"match_id", CT::integer(), true},
                   {"home_team", CT::text(), true},
                   {"away_team", CT::text(), true},
                   {"match_date", CT::date(), true},
                   {"match_status", CT::text(), true},
                   {"home_goals", CT::integer(), true},
                   {"away_goals", CT::integer(), true}},
                  {"match_id"}},
                 ""});

  // team_id by order of first appearance (home before away within a match)
  out.push_back({"dim_teams",
                 {"stg_matches"},
                 {"dim_teams",
                  {{"team_id", CT::integer(), true}, {"team_name", CT::text(), true}},
                  {"team_id"}},
                 R"(WITH appearances AS (
  SELECT home_team AS team_name, match_id * 2 AS seen_at FROM {{stg_matches}}
  UNION ALL
  SELECT away_team AS team_name, match_id * 2 + 1 AS seen_at FROM {{stg_matches}}
), first_seen AS (
  SELECT team_name, MIN(seen_at) AS seen_at FROM appearances GROUP BY team_name
)
SELECT ROW_NUMBER() OVER (ORDER BY seen_at) AS team_id, team_name
FROM first_seen ORDER BY seen_at)"});

  out.push_back({"fct_matches",
                 {"stg_matches", "dim_teams"},
                 {"fct_matches",
                  {{"match_id", CT::integer(), true},
                   {"home_team_id", CT::integer(), true},
                   {"away_team_id", CT::integer(), true},
                   {"match_date", CT::date(), true},
                   {"match_status", CT::text(), true},
                   {"home_goals", CT::integer(), true},
                   {"away_goals", CT::integer(), true}},
                  {"match_id"}},
                 R"(SELECT m.match_id, h.team_id, a.team_id, m.match_date,
       m.match_status, m.home_goals, m.away_goals
FROM {{stg_matches}} m
JOIN {{dim_teams}} h ON h.team_name = m.home_team
JOIN {{dim_teams}} a ON a.team_name = m.away_team
ORDER BY m.match_id)"});

  out.push_back({"fct_training_dataset",
                 {"fct_matches"},
                 {"fct_training_dataset",
                  {{"match_id", CT::integer(), true},
                   {"home_team_id", CT::integer(), true},
                   {"away_team_id", CT::integer(), true},
                   {"match_date", CT::date(), true},
                   {"goal_diff", CT::integer(), true},
                   {"result_label", CT::text(), true}},
                  {"match_id"}},
                 R"(SELECT f.match_id, f.home_team_id, f.away_team_id, f.match_date,
       f.home_goals - f.away_goals,
       CASE WHEN f.home_goals > f.away_goals THEN 'HOME_WIN'
            WHEN f.home_goals < f.away_goals THEN 'AWAY_WIN'
            ELSE 'DRAW' END
FROM {{fct_matches}} f
ORDER BY f.match_id)"});
  return out;
}

// dbt-style ref(): {{model}} -> dialect-qualified table
std::string render_refs(const std::string& sql, const store::Dialect& dialect) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto open = sql.find("{{", pos);
    if (open == std::string::npos) break;
    auto close = sql.find("}}", open);
    out += sql.substr(pos, open - pos);
    out += dialect.table(sql.substr(open + 2, close - open - 2));
    pos = close + 2;
  }
  return out + sql.substr(pos);
}

}  // namespace

std::vector<RawMatchRecord> generate_season(uint64_t seed, int num_teams,
                                            int num_matches) {
  if (num_teams < 2)
    throw InvalidParameter("num_teams must be >= 2, got " + std::to_string(num_teams));
  if (num_matches < 1)
    throw InvalidParameter("num_matches must be >= 1, got " +
                           std::to_string(num_matches));
  if (2LL * num_matches < num_teams)
    throw InvalidParameter("cannot place " + std::to_string(num_teams) +
                           " teams into " + std::to_string(num_matches) +
                           " matches");

  SeasonRng rng(seed);
  std::vector<int> teams(static_cast<std::size_t>(num_teams));
  for (int i = 0; i < num_teams; ++i) teams[static_cast<std::size_t>(i)] = i;
  rng.shuffle(teams);

  // Cover every team once via consecutive pairs, then fill at random.
  std::vector<std::pair<int, int>> fixtures;
  for (std::size_t i = 0; i + 1 < teams.size(); i += 2)
    fixtures.emplace_back(teams[i], teams[i + 1]);
  if (teams.size() % 2 == 1) {
    fixtures.emplace_back(teams.back(), teams[rng.below(teams.size() - 1)]);
  }
  while (fixtures.size() < static_cast<std::size_t>(num_matches)) {
    std::size_t home = rng.below(teams.size());
    std::size_t away = rng.below(teams.size() - 1);
    if (away >= home) ++away;
    fixtures.emplace_back(teams[home], teams[away]);
  }
  rng.shuffle(fixtures);
  for (auto& f : fixtures)
    if (rng.below(2) == 1) std::swap(f.first, f.second);

  const Date opening = Date::from_ymd(2023, 8, 11);
  constexpr int kSeasonDays = 280;
  const int scheduled_from = num_matches - num_matches / 10;

  std::vector<RawMatchRecord> out;
  out.reserve(fixtures.size());
  for (int i = 0; i < num_matches; ++i) {
    const auto& [home, away] = fixtures[static_cast<std::size_t>(i)];
    RawMatchRecord r;
    r.match_id = i + 1;
    r.home_team = team_name(home);
    r.away_team = team_name(away);
    r.match_date = Date{opening.days + static_cast<int32_t>(
                                           static_cast<int64_t>(i) * kSeasonDays /
                                           num_matches)};
    if (i >= scheduled_from && num_matches >= 10) {
      r.match_status = kStatusScheduled;
    } else if (rng.below(100) < 3) {
      r.match_status = kStatusPostponed;
    } else {
      r.match_status = kStatusFinished;
      r.home_goals = draw_goals(rng);
      r.away_goals = draw_goals(rng);
    }
    out.push_back(std::move(r));
  }
  return out;
}

json season_to_json(const std::vector<RawMatchRecord>& records) {
  json arr = json::array();
  for (const auto& r : records)
    arr.push_back({{"match_id", r.match_id},
                   {"home_team", r.home_team},
                   {"away_team", r.away_team},
                   {"match_date", r.match_date.to_iso()},
                   {"match_status", r.match_status},
                   {"home_goals", r.home_goals},
                   {"away_goals", r.away_goals}});
  return arr;
}

std::vector<RawMatchRecord> season_from_json(const json& doc) {
  if (!doc.is_array()) throw InvalidParameter("raw season must be a JSON array");
  std::vector<RawMatchRecord> out;
  try {
    for (const auto& o : doc) {
      RawMatchRecord r;
      r.match_id = o.at("match_id").get<int64_t>();
      r.home_team = o.at("home_team").get<std::string>();
      r.away_team = o.at("away_team").get<std::string>();
      auto d = Date::parse_iso(o.at("match_date").get<std::string>());
      if (!d) throw InvalidParameter("bad match_date in match " + std::to_string(r.match_id));
      r.match_date = *d;
      r.match_status = o.at("match_status").get<std::string>();
      r.home_goals = o.at("home_goals").get<int64_t>();
      r.away_goals = o.at("away_goals").get<int64_t>();
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw InvalidParameter(std::string("malformed raw season: ") + e.what());
  }
  return out;
}

void write_season(const std::filesystem::path& file,
                  const std::vector<RawMatchRecord>& records) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << season_to_json(records).dump(2) << "\n";
}

std::vector<RawMatchRecord> read_season(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("raw season not found at " + file.string() + " (run ingest)");
  try {
    return season_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw InvalidParameter(std::string("raw season is not JSON: ") + e.what());
  }
}

const std::vector<ModelDefinition>& model_catalog() {
  static const std::vector<ModelDefinition> catalog = make_catalog();
  return catalog;
}

const ModelDefinition& model(std::string_view name) {
  for (const auto& m : model_catalog())
    if (m.name == name) return m;
  throw InvalidParameter("unknown model '" + std::string(name) + "'");
}

bool is_model(std::string_view name) {
  const auto& c = model_catalog();
  return std::any_of(c.begin(), c.end(), [&](const auto& m) { return m.name == name; });
}

const std::vector<std::string>& curated_model_names() {
  static const std::vector<std::string> names = {"dim_teams", "fct_matches",
                                                 "fct_training_dataset"};
  return names;
}

bool is_curated(std::string_view name) {
  const auto& c = curated_model_names();
  return std::find(c.begin(), c.end(), name) != c.end();
}

std::vector<std::string> build_order(const std::vector<ModelDefinition>& models) {
  std::map<std::string, const ModelDefinition*> by_name;
  for (const auto& m : models) by_name[m.name] = &m;
  std::vector<std::string> order;
  std::map<std::string, int> state;  // 1 = visiting, 2 = done
  std::function<void(const ModelDefinition&)> visit = [&](const ModelDefinition& m) {
    int& s = state[m.name];
    if (s == 2) return;
    if (s == 1) throw Error("model dependency cycle through '" + m.name + "'");
    s = 1;
    for (const auto& dep : m.depends_on) {
      auto it = by_name.find(dep);
      if (it == by_name.end())
        throw Error("model '" + m.name + "' depends on unknown '" + dep + "'");
      visit(*it->second);
    }
    s = 2;
    order.push_back(m.name);
  };
  for (const auto& m : models) visit(m);
  return order;
}

std::vector<TableSchema> catalog_schemas() {
  std::vector<TableSchema> out;
  for (const auto& m : model_catalog()) out.push_back(m.schema);
  return out;
}

int64_t ModelRunReport::rows(std::string_view name) const {
  for (const auto& e : models)
    if (e.model == name) return e.rows;
  throw InvalidParameter("model '" + std::string(name) + "' not in run report");
}

ModelRunReport run_models(store::Backend& backend,
                          const std::vector<RawMatchRecord>& raw,
                          bool full_refresh) {
  if (raw.empty()) throw InvalidParameter("run_models needs a non-empty raw season");
  const auto& catalog = model_catalog();
  ModelRunReport report;
  for (const auto& name : build_order(catalog)) {
    const ModelDefinition& def = model(name);
    try {
      if (full_refresh) {
        backend.drop_table(name);
      } else if (backend.has_table(name)) {
        throw ModelRunError(name, "table exists; only full refresh is supported");
      }
      for (const auto& dep : def.depends_on)
        if (!backend.has_table(dep))
          throw Error("internal: dependency '" + dep + "' not materialized");
      backend.create_table(def.schema);
      if (def.select_sql.empty()) {
        std::vector<Row> rows;
        rows.reserve(raw.size());
        for (const auto& r : raw)
          rows.push_back({r.match_id, r.home_team, r.away_team, r.match_date,
                          r.match_status, r.home_goals, r.away_goals});
        backend.bulk_load(name, rows);
      } else {
        backend.execute("INSERT INTO " + backend.dialect().table(name) + " " +
                        render_refs(def.select_sql, backend.dialect()));
      }
      report.models.push_back({name, backend.count_rows(name)});
    } catch (const ModelRunError&) {
      throw;
    } catch (const BackendError& e) {
      throw ModelRunError(name, e.what());
    }
  }
  return report;
}

json to_json(const ModelRunReport& report) {
  json o = json::object();
  for (const auto& e : report.models) o[e.model] = e.rows;
  return o;
}

}  // namespace dq::models
