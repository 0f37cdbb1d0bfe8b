#pragma once

// Synthetic football season and the four analytical models built from it:
//
//   stg_matches ──► dim_teams ──► fct_matches ──► fct_training_dataset
//        └────────────────────────────┘

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dq/backend.hpp"
#include "dq/types.hpp"

namespace dq::models {

struct RawMatchRecord {
  int64_t match_id = 0;
  std::string home_team;
  std::string away_team;
  Date match_date;
  std::string match_status;
  int64_t home_goals = 0;
  int64_t away_goals = 0;

  friend bool operator==(const RawMatchRecord&, const RawMatchRecord&) = default;
};

inline constexpr const char* kStatusFinished = "FINISHED";
inline constexpr const char* kStatusScheduled = "SCHEDULED";
inline constexpr const char* kStatusPostponed = "POSTPONED";

/// Deterministic season: exactly `num_matches` fixtures over exactly
/// `num_teams` teams, match ids 1..num_matches. Requires num_teams >= 2,
/// num_matches >= 1 and 2*num_matches >= num_teams.
std::vector<RawMatchRecord> generate_season(uint64_t seed, int num_teams,
                                            int num_matches);

nlohmann::json season_to_json(const std::vector<RawMatchRecord>& records);
std::vector<RawMatchRecord> season_from_json(const nlohmann::json& doc);
void write_season(const std::filesystem::path& file,
                  const std::vector<RawMatchRecord>& records);
std::vector<RawMatchRecord> read_season(const std::filesystem::path& file);

struct ModelDefinition {
  std::string name;
  std::vector<std::string> depends_on;
  TableSchema schema;
  /// SELECT producing the model's rows in schema column order. Empty for
  /// stg_matches, which is bulk-loaded from the raw season.
  std::string select_sql;
};

/// All four models, in declaration order.
const std::vector<ModelDefinition>& model_catalog();
const ModelDefinition& model(std::string_view name);
bool is_model(std::string_view name);
/// {dim_teams, fct_matches, fct_training_dataset}
const std::vector<std::string>& curated_model_names();
bool is_curated(std::string_view name);
/// Dependency order; throws Error on cycles or unknown dependencies.
std::vector<std::string> build_order(const std::vector<ModelDefinition>& models);
/// TableSchemas of the model catalog, for resolving test references.
std::vector<TableSchema> catalog_schemas();

struct ModelRunEntry {
  std::string model;
  int64_t rows = 0;
};

struct ModelRunReport {
  std::vector<ModelRunEntry> models;  // build order
  int64_t rows(std::string_view model) const;
};

/// Materializes the four models on `backend`. With full_refresh every model
/// table is dropped and rebuilt; without it an existing model table is an
/// error (no incremental strategy exists).
ModelRunReport run_models(store::Backend& backend,
                          const std::vector<RawMatchRecord>& raw,
                          bool full_refresh);

nlohmann::json to_json(const ModelRunReport& report);

}  // namespace dq::models
