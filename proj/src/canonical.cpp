#include "dq/canonical.hpp"

#include <algorithm>
#include <numeric>

#include "dq/errors.hpp"
#include "dq/kernels.hpp"

namespace dq::canonical {
namespace {

[[noreturn]] void not_representable(std::string_view column, const Value& v,
                                    const ColumnType& type) {
  throw EncodingError(std::string(column),
                      "column '" + std::string(column) + "': value '" +
                          to_display(v) + "' is not representable as " +
                          type.name());
}

std::size_t digit_count(int64_t v) {
  uint64_t mag = v < 0 ? 0 - static_cast<uint64_t>(v) : static_cast<uint64_t>(v);
  std::size_t n = 1;
  while (mag >= 10) {
    mag /= 10;
    ++n;
  }
  return n;
}

std::string encode_decimal(const Decimal& d, const ColumnType& type,
                           std::string_view column, const Value& original) {
  Decimal n = d.normalized();
  int integer_digits =
      static_cast<int>(digit_count(n.unscaled)) - n.scale;
  bool fits = n.unscaled == 0 || (n.scale <= type.scale &&
                                  integer_digits <= type.precision - type.scale);
  if (!fits) not_representable(column, original, type);
  return n.to_string();
}

}  // namespace

std::string encode_value(const Value& v, const ColumnType& type,
                         std::string_view column) {
  if (is_null(v)) return std::string(kNullToken);
  using K = ColumnType::Kind;
  switch (type.kind) {
    case K::integer:
      if (auto* i = std::get_if<int64_t>(&v)) return std::to_string(*i);
      if (auto* d = std::get_if<Decimal>(&v)) {
        Decimal n = d->normalized();
        if (n.scale == 0) return std::to_string(n.unscaled);
      }
      break;
    case K::decimal:
      if (auto* d = std::get_if<Decimal>(&v))
        return encode_decimal(*d, type, column, v);
      if (auto* i = std::get_if<int64_t>(&v))
        return encode_decimal(Decimal{*i, 0}, type, column, v);
      if (auto* s = std::get_if<std::string>(&v))
        if (auto d = Decimal::parse(*s)) return encode_decimal(*d, type, column, v);
      break;
    case K::text:
      if (auto* s = std::get_if<std::string>(&v)) return *s;
      break;
    case K::date:
      if (auto* d = std::get_if<Date>(&v)) return d->to_iso();
      if (auto* s = std::get_if<std::string>(&v))
        if (auto d = Date::parse_iso(*s)) return d->to_iso();
      break;
    case K::timestamp:
      if (auto* t = std::get_if<Timestamp>(&v)) return t->to_iso();
      if (auto* s = std::get_if<std::string>(&v))
        if (auto t = Timestamp::parse_iso(*s)) return t->to_iso();
      break;
    case K::boolean:
      if (auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
      if (auto* i = std::get_if<int64_t>(&v))
        if (*i == 0 || *i == 1) return *i ? "true" : "false";
      break;
  }
  not_representable(column, v, type);
}

std::vector<std::size_t> canonical_order(const TableSchema& schema) {
  std::vector<std::size_t> order(schema.columns.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return to_lower(schema.columns[a].name) < to_lower(schema.columns[b].name);
  });
  return order;
}

namespace {

std::string encode_with_order(const Row& row, const TableSchema& schema,
                              const std::vector<std::size_t>& order) {
  std::string out;
  bool first = true;
  for (std::size_t idx : order) {
    if (!first) out.push_back(kSeparator);
    first = false;
    const Column& col = schema.columns[idx];
    out += encode_value(row.at(idx), col.type, col.name);
  }
  return out;
}

}  // namespace

std::string encode_row(const Row& row, const TableSchema& schema) {
  return encode_with_order(row, schema, canonical_order(schema));
}

std::string encode_key(const Row& row, const TableSchema& schema,
                       const std::vector<std::string>& columns) {
  std::vector<std::size_t> order;
  order.reserve(columns.size());
  for (const auto& name : columns) {
    auto idx = schema.find_column(name);
    if (!idx)
      throw InvalidParameter("key column '" + name + "' not in table " +
                             schema.name);
    order.push_back(*idx);
  }
  return encode_with_order(row, schema, order);
}

std::vector<std::string> encode_rows(const TypedTable& table) {
  auto order = canonical_order(table.schema);
  std::vector<std::string> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    try {
      out.push_back(encode_with_order(row, table.schema, order));
    } catch (const EncodingError& e) {
      throw EncodingError(e.column(), "table '" + table.schema.name + "', " +
                                          std::string(e.what()));
    }
  }
  return out;
}

TableChecksum checksum_of_encoded(const std::vector<std::string>& rows) {
  std::vector<std::string_view> views(rows.begin(), rows.end());
  std::vector<uint64_t> hashes(rows.size());
  kernels::fnv1a64_batch(views, hashes);
  return TableChecksum{kernels::wrapping_sum(hashes), rows.size()};
}

TableChecksum table_checksum(const TypedTable& table) {
  return checksum_of_encoded(encode_rows(table));
}

}  // namespace dq::canonical
