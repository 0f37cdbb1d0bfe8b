#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dq {

/// Calendar date as days since 1970-01-01 (proleptic Gregorian).
struct Date {
  int32_t days = 0;

  static std::optional<Date> parse_iso(std::string_view text);
  static Date from_ymd(int year, unsigned month, unsigned day);
  std::string to_iso() const;

  friend bool operator==(const Date&, const Date&) = default;
};

/// UTC instant with second resolution.
struct Timestamp {
  int64_t seconds = 0;

  static std::optional<Timestamp> parse_iso(std::string_view text);
  std::string to_iso() const;  // YYYY-MM-DDTHH:MM:SSZ

  friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

/// Fixed-point decimal: unscaled * 10^-scale.
struct Decimal {
  int64_t unscaled = 0;
  int scale = 0;

  static std::optional<Decimal> parse(std::string_view text);
  Decimal normalized() const;  // trailing fractional zeros stripped
  std::string to_string() const;

  friend bool operator==(const Decimal&, const Decimal&) = default;
};

/// A single cell. std::monostate is SQL NULL.
using Value = std::variant<std::monostate, int64_t, Decimal, std::string, Date,
                           Timestamp, bool>;

inline bool is_null(const Value& v) {
  return std::holds_alternative<std::monostate>(v);
}

/// Human-readable rendering used in receipts and logs (not the canonical form).
std::string to_display(const Value& v);

using Row = std::vector<Value>;

struct ColumnType {
  enum class Kind { integer, decimal, text, date, timestamp, boolean };

  Kind kind = Kind::text;
  int precision = 0;  // decimal only
  int scale = 0;      // decimal only

  static ColumnType integer() { return {Kind::integer, 0, 0}; }
  static ColumnType text() { return {Kind::text, 0, 0}; }
  static ColumnType date() { return {Kind::date, 0, 0}; }
  static ColumnType timestamp() { return {Kind::timestamp, 0, 0}; }
  static ColumnType boolean() { return {Kind::boolean, 0, 0}; }
  static ColumnType decimal(int precision, int scale);

  /// Lowercase vocabulary name, e.g. "integer", "decimal(10,2)".
  std::string name() const;

  friend bool operator==(const ColumnType&, const ColumnType&) = default;
};

struct Column {
  std::string name;
  ColumnType type;
  bool nullable = true;

  friend bool operator==(const Column&, const Column&) = default;
};

struct TableSchema {
  std::string name;
  std::vector<Column> columns;
  std::vector<std::string> primary_key;

  /// Case-insensitive lookup; returns column index.
  std::optional<std::size_t> find_column(std::string_view column) const;
  bool has_column(std::string_view column) const {
    return find_column(column).has_value();
  }
  /// Throws InvalidParameter when names collide or the key is dangling.
  void validate() const;

  friend bool operator==(const TableSchema&, const TableSchema&) = default;
};

/// A materialized table read back from a store, values aligned to schema.
struct TypedTable {
  TableSchema schema;
  std::vector<Row> rows;
};

/// Untyped query result.
struct RowSet {
  std::vector<std::string> columns;
  std::vector<Row> rows;
};

std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

/// SQL identifier rule used for model, column and namespace names.
bool is_identifier(std::string_view s);

}  // namespace dq
