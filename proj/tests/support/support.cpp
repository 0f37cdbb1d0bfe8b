#include "support.hpp"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <sstream>

#include "dq/models.hpp"

namespace dqt {

fs::path fresh_dir(std::string_view tag) {
  static std::atomic<int> counter{0};
  fs::path dir = fs::temp_directory_path() / "dq_tests" /
                 (std::string(tag) + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path data_dir() { return DQ_DEFAULT_DATA_DIR; }

dq::engine::SchemaFile fixture_schema(std::string_view name, dq::engine::Origin origin) {
  auto file = data_dir() / "schemas" / (std::string(name) + ".yml");
  return dq::engine::parse_schema_file(slurp(file), dq::models::catalog_schemas(), origin);
}

SeededStore seeded_store(std::string_view tag, uint64_t seed) {
  SeededStore s;
  s.dir = fresh_dir(tag);
  s.local = std::make_unique<dq::store::LocalStore>(s.dir / "local.db");
  dq::models::run_models(*s.local, dq::models::generate_season(seed, 20, 100), true);
  s.snap = dq::store::snapshot(*s.local, dq::store::default_snapshot_path(s.dir / "local.db"));
  return s;
}

}  // namespace dqt
