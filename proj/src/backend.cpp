#include "dq/backend.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <system_error>

#include <json.hpp>

#include "dq/errors.hpp"

namespace dq::store {
namespace {

using json = nlohmann::json;

class Statement {
 public:
  Statement(sqlite3* db, const std::string& sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql.c_str(), static_cast<int>(sql.size()),
                           &stmt_, nullptr) != SQLITE_OK)
      throw BackendError(std::string("prepare failed: ") + sqlite3_errmsg(db) +
                         " [" + sql + "]");
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  void bind(const std::vector<Value>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) bind(static_cast<int>(i + 1), params[i]);
  }

  void bind(int idx, const Value& v) {
    int rc = std::visit(
        [&](const auto& x) -> int {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, std::monostate>) {
            return sqlite3_bind_null(stmt_, idx);
          } else if constexpr (std::is_same_v<T, int64_t>) {
            return sqlite3_bind_int64(stmt_, idx, x);
          } else if constexpr (std::is_same_v<T, bool>) {
            return sqlite3_bind_int64(stmt_, idx, x ? 1 : 0);
          } else if constexpr (std::is_same_v<T, std::string>) {
            return sqlite3_bind_text(stmt_, idx, x.data(),
                                     static_cast<int>(x.size()), SQLITE_TRANSIENT);
          } else if constexpr (std::is_same_v<T, Decimal>) {
            std::string s = x.to_string();
            return sqlite3_bind_text(stmt_, idx, s.data(),
                                     static_cast<int>(s.size()), SQLITE_TRANSIENT);
          } else {
            std::string s = x.to_iso();
            return sqlite3_bind_text(stmt_, idx, s.data(),
                                     static_cast<int>(s.size()), SQLITE_TRANSIENT);
          }
        },
        v);
    if (rc != SQLITE_OK)
      throw BackendError(std::string("bind failed: ") + sqlite3_errmsg(db_));
  }

  bool step() {
    int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw BackendError(std::string("step failed: ") + sqlite3_errmsg(db_));
  }

  void reset() {
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
  }

  int columns() const { return sqlite3_column_count(stmt_); }
  std::string column_name(int i) const { return sqlite3_column_name(stmt_, i); }

  Value raw(int i) const {
    switch (sqlite3_column_type(stmt_, i)) {
      case SQLITE_NULL: return std::monostate{};
      case SQLITE_INTEGER: return static_cast<int64_t>(sqlite3_column_int64(stmt_, i));
      case SQLITE_FLOAT: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.15g", sqlite3_column_double(stmt_, i));
        if (auto d = Decimal::parse(buf)) return *d;
        return std::string(buf);
      }
      default: {
        auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, i));
        int n = sqlite3_column_bytes(stmt_, i);
        return std::string(p ? p : "", static_cast<std::size_t>(n));
      }
    }
  }

  /// Typed read: coerces storage classes to the declared column type where
  /// lossless; anything else is returned raw and rejected later by the
  /// canonical encoder.
  Value typed(int i, const ColumnType& type) const {
    using K = ColumnType::Kind;
    int storage = sqlite3_column_type(stmt_, i);
    if (storage == SQLITE_NULL) return std::monostate{};
    if (storage == SQLITE_FLOAT && type.kind == K::decimal) {
      double x = sqlite3_column_double(stmt_, i);
      double scaled = std::round(x * std::pow(10.0, type.scale));
      return Decimal{static_cast<int64_t>(scaled), type.scale};
    }
    Value v = raw(i);
    if (auto* n = std::get_if<int64_t>(&v)) {
      if (type.kind == K::boolean && (*n == 0 || *n == 1)) return *n == 1;
      if (type.kind == K::decimal) return Decimal{*n, 0};
      return v;
    }
    if (auto* s = std::get_if<std::string>(&v)) {
      switch (type.kind) {
        case K::date:
          if (auto d = Date::parse_iso(*s)) return *d;
          break;
        case K::timestamp:
          if (auto t = Timestamp::parse_iso(*s)) return *t;
          break;
        case K::decimal:
          if (auto d = Decimal::parse(*s)) return *d;
          break;
        default: break;
      }
    }
    return v;
  }

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

void exec_or_throw(sqlite3* db, const std::string& sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw BackendError(msg + " [" + sql + "]");
  }
}

}  // namespace

const char* role_name(Role role) {
  return role == Role::local ? "local" : "warehouse";
}

Dialect::Dialect(Role role, std::string ns) : role_(role), ns_(std::move(ns)) {
  if (!is_identifier(ns_))
    throw InvalidParameter("invalid namespace '" + ns_ + "'");
}

std::string Dialect::physical_name(std::string_view logical) const {
  return role_ == Role::warehouse ? to_upper(logical) : std::string(logical);
}

std::string Dialect::table(std::string_view logical) const {
  return quote(ns_) + "." + quote(physical_name(logical));
}

std::string Dialect::column(std::string_view logical) const {
  return quote(physical_name(logical));
}

std::string Dialect::type_sql(const ColumnType& type) const {
  using K = ColumnType::Kind;
  if (role_ == Role::warehouse) {
    switch (type.kind) {
      case K::integer: return "NUMBER(38,0)";
      case K::decimal:
        return "NUMBER(" + std::to_string(type.precision) + "," +
               std::to_string(type.scale) + ")";
      case K::text: return "VARCHAR(16777216)";
      case K::date: return "VARCHAR(10)";
      case K::timestamp: return "VARCHAR(20)";
      case K::boolean: return "BOOLEAN";
    }
  }
  switch (type.kind) {
    case K::integer: return "BIGINT";
    case K::decimal:
      return "DECIMAL(" + std::to_string(type.precision) + "," +
             std::to_string(type.scale) + ")";
    case K::text: return "VARCHAR";
    case K::date: return "DATE";
    case K::timestamp: return "TIMESTAMP";
    case K::boolean: return "BOOLEAN";
  }
  return "VARCHAR";
}

std::string Dialect::quote(std::string_view identifier) {
  std::string out = "\"";
  for (char c : identifier) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string Dialect::literal(std::string_view text) {
  std::string out = "'";
  for (char c : text) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

ColumnType parse_declared_type(std::string_view declared) {
  std::string t = to_upper(declared);
  auto params = [&]() -> std::pair<int, int> {
    int p = 38, s = 0;
    auto open = t.find('(');
    if (open != std::string::npos)
      std::sscanf(t.c_str() + open, "(%d,%d)", &p, &s);
    return {p, s};
  };
  if (t.rfind("NUMBER", 0) == 0 || t.rfind("DECIMAL", 0) == 0 ||
      t.rfind("NUMERIC", 0) == 0) {
    auto [p, s] = params();
    if (t.rfind("NUMBER", 0) == 0 && s == 0) return ColumnType::integer();
    return ColumnType::decimal(p, s);
  }
  if (t.find("INT") != std::string::npos) return ColumnType::integer();
  if (t.rfind("TIMESTAMP", 0) == 0 || t == "DATETIME") return ColumnType::timestamp();
  if (t == "DATE") return ColumnType::date();
  if (t.rfind("BOOL", 0) == 0) return ColumnType::boolean();
  return ColumnType::text();
}

Backend::Backend(Role role, std::string ns, std::filesystem::path path)
    : dialect_(role, std::move(ns)), path_(std::move(path)) {}

Backend::~Backend() {
  if (db_) sqlite3_close_v2(db_);
}

void Backend::open(const std::filesystem::path& file, bool read_only) {
  int flags = read_only ? SQLITE_OPEN_READONLY
                        : (SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
  if (sqlite3_open_v2(file.string().c_str(), &db_, flags, nullptr) != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    if (db_) sqlite3_close_v2(db_);
    db_ = nullptr;
    throw BackendError("cannot open store '" + file.string() + "': " + msg);
  }
  sqlite3_extended_result_codes(db_, 1);
}

void Backend::attach(const std::filesystem::path& file, const std::string& schema) {
  Statement st(db_, "ATTACH DATABASE ? AS " + Dialect::quote(schema));
  st.bind({Value{file.string()}});
  st.step();
  // Force the file into existence so an unwritable location fails here.
  exec_or_throw(db_, "CREATE TABLE IF NOT EXISTS " + Dialect::quote(schema) +
                         ".\"__dq_namespace\" (created INTEGER)");
}

std::string Backend::schema_name() const { return dialect_.ns(); }

void Backend::create_table(const TableSchema& logical) {
  logical.validate();
  std::string sql = "CREATE TABLE " + dialect_.table(logical.name) + " (";
  for (std::size_t i = 0; i < logical.columns.size(); ++i) {
    if (i) sql += ", ";
    sql += dialect_.column(logical.columns[i].name) + " " +
           dialect_.type_sql(logical.columns[i].type);
  }
  sql += ")";
  exec_or_throw(db_, sql);
}

void Backend::drop_table(std::string_view name) {
  exec_or_throw(db_, "DROP TABLE IF EXISTS " + dialect_.table(name));
}

bool Backend::has_table(std::string_view name) const {
  Statement st(db_, "SELECT 1 FROM " + Dialect::quote(schema_name()) +
                        ".sqlite_master WHERE type='table' AND name = ? COLLATE NOCASE");
  st.bind({Value{dialect_.physical_name(name)}});
  return st.step();
}

std::vector<std::string> Backend::list_tables() const {
  Statement st(db_, "SELECT name FROM " + Dialect::quote(schema_name()) +
                        ".sqlite_master WHERE type='table' AND name NOT LIKE "
                        "'sqlite_%' AND name <> '__dq_namespace' ORDER BY name");
  std::vector<std::string> out;
  while (st.step()) out.push_back(std::get<std::string>(st.raw(0)));
  return out;
}

TableSchema Backend::describe(std::string_view name) const {
  if (!has_table(name))
    throw BackendError(std::string(role_name(role())) + " store has no table '" +
                       std::string(name) + "'");
  Statement st(db_, "PRAGMA " + Dialect::quote(schema_name()) + ".table_info(" +
                        Dialect::quote(dialect_.physical_name(name)) + ")");
  TableSchema schema;
  schema.name = dialect_.physical_name(name);
  std::vector<std::pair<int, std::string>> pk;
  while (st.step()) {
    Column c;
    c.name = std::get<std::string>(st.raw(1));
    Value declared = st.raw(2);
    c.type = parse_declared_type(
        is_null(declared) ? std::string_view{} : std::get<std::string>(declared));
    c.nullable = std::get<int64_t>(st.raw(3)) == 0;
    int64_t pk_pos = std::get<int64_t>(st.raw(5));
    if (pk_pos > 0) pk.emplace_back(static_cast<int>(pk_pos), c.name);
    schema.columns.push_back(std::move(c));
  }
  std::sort(pk.begin(), pk.end());
  for (auto& [_, n] : pk) schema.primary_key.push_back(n);
  return schema;
}

std::size_t Backend::bulk_load(std::string_view name, const std::vector<Row>& rows) {
  TableSchema schema = describe(name);
  std::string sql = "INSERT INTO " + dialect_.table(name) + " VALUES (";
  for (std::size_t i = 0; i < schema.columns.size(); ++i) sql += i ? ", ?" : "?";
  sql += ")";
  exec_or_throw(db_, "BEGIN");
  try {
    Statement st(db_, sql);
    for (const auto& row : rows) {
      if (row.size() != schema.columns.size())
        throw BackendError("row width " + std::to_string(row.size()) +
                           " does not match table '" + std::string(name) + "'");
      st.bind(row);
      st.step();
      st.reset();
    }
    exec_or_throw(db_, "COMMIT");
  } catch (...) {
    sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    throw;
  }
  return rows.size();
}

int64_t Backend::count_rows(std::string_view name) const {
  Statement st(db_, "SELECT COUNT(*) FROM " + dialect_.table(name));
  st.step();
  return std::get<int64_t>(st.raw(0));
}

TypedTable Backend::read_table(std::string_view name) const {
  TypedTable out;
  out.schema = describe(name);
  std::string cols;
  for (std::size_t i = 0; i < out.schema.columns.size(); ++i) {
    if (i) cols += ", ";
    cols += Dialect::quote(out.schema.columns[i].name);
  }
  Statement st(db_, "SELECT " + cols + " FROM " + dialect_.table(name) +
                        " ORDER BY rowid");
  while (st.step()) {
    Row row;
    row.reserve(out.schema.columns.size());
    for (std::size_t i = 0; i < out.schema.columns.size(); ++i)
      row.push_back(st.typed(static_cast<int>(i), out.schema.columns[i].type));
    out.rows.push_back(std::move(row));
  }
  return out;
}

RowSet Backend::query(const std::string& sql, const std::vector<Value>& params) const {
  Statement st(db_, sql);
  st.bind(params);
  RowSet out;
  for (int i = 0; i < st.columns(); ++i) out.columns.push_back(st.column_name(i));
  while (st.step()) {
    Row row;
    for (int i = 0; i < st.columns(); ++i) row.push_back(st.raw(i));
    out.rows.push_back(std::move(row));
  }
  return out;
}

int64_t Backend::execute(const std::string& sql, const std::vector<Value>& params) {
  Statement st(db_, sql);
  st.bind(params);
  while (st.step()) {
  }
  return sqlite3_changes(db_);
}

void Backend::execute_script(const std::string& sql) { exec_or_throw(db_, sql); }

LocalStore::LocalStore(const std::filesystem::path& path, Mode mode)
    : Backend(Role::local, "main", path) {
  if (mode == Mode::read_write && path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  open(path, mode == Mode::read_only);
}

WarehouseStore::WarehouseStore(const std::filesystem::path& path, std::string ns)
    : Backend(Role::warehouse, ns, path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  open(":memory:", false);
  attach(path, ns);
}

// --- snapshot / restore ----------------------------------------------------

std::filesystem::path default_snapshot_path(const std::filesystem::path& store) {
  return std::filesystem::path(store.string() + ".clean");
}

std::string format_checksum(uint64_t value) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

uint64_t parse_checksum(std::string_view hex) {
  if (hex.empty() || hex.size() > 16)
    throw InvalidParameter("bad checksum '" + std::string(hex) + "'");
  uint64_t v = 0;
  for (char c : hex) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else throw InvalidParameter("bad checksum '" + std::string(hex) + "'");
    v = v << 4 | static_cast<uint64_t>(d);
  }
  return v;
}

namespace {

std::filesystem::path manifest_path(const std::filesystem::path& snap) {
  return std::filesystem::path(snap.string() + ".json");
}

std::vector<CapturedTable> capture(const Backend& store) {
  std::vector<CapturedTable> out;
  for (const auto& name : store.list_tables()) {
    auto sum = canonical::table_checksum(store.read_table(name));
    out.push_back({name, sum.row_count, sum.value});
  }
  return out;
}

void copy_database(sqlite3* from, sqlite3* to) {
  sqlite3_backup* b = sqlite3_backup_init(to, "main", from, "main");
  if (!b) throw SnapshotError(std::string("backup init failed: ") + sqlite3_errmsg(to));
  int rc = sqlite3_backup_step(b, -1);
  sqlite3_backup_finish(b);
  if (rc != SQLITE_DONE)
    throw SnapshotError(std::string("backup failed: ") + sqlite3_errstr(rc));
}

}  // namespace

Snapshot snapshot(LocalStore& local, const std::filesystem::path& path) {
  Snapshot snap{path, capture(local)};
  auto tmp = std::filesystem::path(path.string() + ".tmp");
  std::filesystem::remove(tmp);
  {
    LocalStore target(tmp);
    copy_database(local.handle(), target.handle());
  }
  std::filesystem::rename(tmp, path);

  json manifest;
  manifest["format"] = "dq-snapshot/1";
  manifest["tables"] = json::array();
  for (const auto& t : snap.captured_tables)
    manifest["tables"].push_back(
        {{"table", t.table}, {"rows", t.rows}, {"checksum", format_checksum(t.checksum)}});
  std::ofstream(manifest_path(path)) << manifest.dump(2) << "\n";
  return snap;
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(manifest_path(path));
  if (!in) throw SnapshotError("snapshot manifest missing for '" + path.string() + "'");
  Snapshot snap;
  snap.path = path;
  try {
    json manifest = json::parse(in);
    if (manifest.value("format", "") != "dq-snapshot/1")
      throw SnapshotError("unknown snapshot format");
    for (const auto& t : manifest.at("tables"))
      snap.captured_tables.push_back({t.at("table").get<std::string>(),
                                      t.at("rows").get<uint64_t>(),
                                      parse_checksum(t.at("checksum").get<std::string>())});
  } catch (const json::exception& e) {
    throw SnapshotError("corrupt snapshot manifest: " + std::string(e.what()));
  }
  return snap;
}

void restore(LocalStore& local, const Snapshot& snap) {
  if (!std::filesystem::exists(snap.path))
    throw SnapshotError("snapshot file '" + snap.path.string() + "' not found");
  try {
    LocalStore source(snap.path, LocalStore::Mode::read_only);
    RowSet check = source.query("PRAGMA integrity_check");
    if (check.rows.empty() ||
        to_display(check.rows.front().front()) != "ok")
      throw SnapshotError("snapshot failed integrity check");
    auto found = capture(source);
    bool same = found.size() == snap.captured_tables.size();
    for (std::size_t i = 0; same && i < found.size(); ++i)
      same = found[i].table == snap.captured_tables[i].table &&
             found[i].rows == snap.captured_tables[i].rows &&
             found[i].checksum == snap.captured_tables[i].checksum;
    if (!same) throw SnapshotError("snapshot content does not match its manifest");
    copy_database(source.handle(), local.handle());
  } catch (const SnapshotError&) {
    throw;
  } catch (const Error& e) {
    throw SnapshotError("snapshot '" + snap.path.string() + "' unreadable: " + e.what());
  }
  auto after = capture(local);
  if (after.size() != snap.captured_tables.size())
    throw SnapshotError("restored store has unexpected table count");
  for (std::size_t i = 0; i < after.size(); ++i)
    if (after[i].checksum != snap.captured_tables[i].checksum)
      throw SnapshotError("restored store diverges from snapshot at table " +
                          after[i].table);
}

}  // namespace dq::store
