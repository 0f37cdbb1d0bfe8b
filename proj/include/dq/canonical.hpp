#pragma once

// Canonical row encoding: the normalization that makes rows from different
// stores byte-comparable regardless of column case, date representation or
// integer width.
//
//   * columns ordered by lowercase name, values joined by 0x1F
//   * NULL            -> "\N" (two bytes) for every type
//   * integer         -> minimal decimal text
//   * decimal         -> trailing fractional zeros stripped
//   * text            -> raw UTF-8 bytes
//   * date            -> YYYY-MM-DD (native or ISO text)
//   * timestamp       -> YYYY-MM-DDTHH:MM:SSZ (UTC)
//   * boolean         -> true / false

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dq/types.hpp"

namespace dq::canonical {

inline constexpr char kSeparator = '\x1f';
inline constexpr std::string_view kNullToken = "\\N";

/// Throws EncodingError naming `column` when `v` is not representable.
std::string encode_value(const Value& v, const ColumnType& type,
                         std::string_view column);

/// Column indices of `schema` in canonical (lowercase-name) order.
std::vector<std::size_t> canonical_order(const TableSchema& schema);

std::string encode_row(const Row& row, const TableSchema& schema);

/// Encodes only `columns` (matched case-insensitively), in the given order.
std::string encode_key(const Row& row, const TableSchema& schema,
                       const std::vector<std::string>& columns);

std::vector<std::string> encode_rows(const TypedTable& table);

struct TableChecksum {
  uint64_t value = 0;
  uint64_t row_count = 0;

  friend bool operator==(const TableChecksum&, const TableChecksum&) = default;
};

/// Wrapping 64-bit sum of FNV-1a-64 over canonical rows.
TableChecksum table_checksum(const TypedTable& table);
TableChecksum checksum_of_encoded(const std::vector<std::string>& rows);

}  // namespace dq::canonical
