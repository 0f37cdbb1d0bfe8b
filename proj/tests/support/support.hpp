#pragma once

// Shared fixtures for the unit and acceptance binaries.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "dq/backend.hpp"
#include "dq/engine.hpp"

namespace dqt {

namespace fs = std::filesystem;

/// Empty scratch directory unique to this process and call.
fs::path fresh_dir(std::string_view tag);

std::string slurp(const fs::path& file);

fs::path data_dir();

/// Fixture schema from data/schemas, e.g. "manual_baseline".
dq::engine::SchemaFile fixture_schema(std::string_view name,
                                      dq::engine::Origin origin = dq::engine::Origin::manual);

/// Seed-42 season materialized into a fresh local store, plus its snapshot.
struct SeededStore {
  fs::path dir;
  std::unique_ptr<dq::store::LocalStore> local;
  dq::store::Snapshot snap;
};

SeededStore seeded_store(std::string_view tag, uint64_t seed = 42);

}  // namespace dqt
