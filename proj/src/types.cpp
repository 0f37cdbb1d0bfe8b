#include "dq/types.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <unordered_set>

#include "dq/errors.hpp"

namespace dq {
namespace {

bool parse_fixed(std::string_view s, int& out) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

std::optional<std::chrono::sys_days> parse_ymd(std::string_view s) {
  // YYYY-MM-DD, four-digit year only
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y = 0, m = 0, d = 0;
  if (!parse_fixed(s.substr(0, 4), y) || !parse_fixed(s.substr(5, 2), m) ||
      !parse_fixed(s.substr(8, 2), d))
    return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{y},
                                  std::chrono::month{static_cast<unsigned>(m)},
                                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd};
}

std::string format_ymd(std::chrono::sys_days days) {
  std::chrono::year_month_day ymd{days};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

std::optional<Date> Date::parse_iso(std::string_view text) {
  auto days = parse_ymd(text);
  if (!days) return std::nullopt;
  return Date{static_cast<int32_t>(days->time_since_epoch().count())};
}

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  std::chrono::sys_days d{std::chrono::year{year} / std::chrono::month{month} /
                          std::chrono::day{day}};
  return Date{static_cast<int32_t>(d.time_since_epoch().count())};
}

std::string Date::to_iso() const {
  return format_ymd(std::chrono::sys_days{std::chrono::days{days}});
}

std::optional<Timestamp> Timestamp::parse_iso(std::string_view text) {
  // Accepts "YYYY-MM-DDTHH:MM:SS" with optional trailing 'Z'; a space may
  // replace the 'T'.
  if (text.size() == 20 && text.back() == 'Z') text.remove_suffix(1);
  if (text.size() != 19) return std::nullopt;
  if (text[10] != 'T' && text[10] != ' ') return std::nullopt;
  auto days = parse_ymd(text.substr(0, 10));
  if (!days || text[13] != ':' || text[16] != ':') return std::nullopt;
  int hh = 0, mm = 0, ss = 0;
  if (!parse_fixed(text.substr(11, 2), hh) ||
      !parse_fixed(text.substr(14, 2), mm) ||
      !parse_fixed(text.substr(17, 2), ss))
    return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
  int64_t secs = static_cast<int64_t>(days->time_since_epoch().count()) * 86400 +
                 hh * 3600 + mm * 60 + ss;
  return Timestamp{secs};
}

std::string Timestamp::to_iso() const {
  int64_t day = seconds >= 0 ? seconds / 86400 : -((-seconds + 86399) / 86400);
  int64_t rem = seconds - day * 86400;
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d:%02d:%02dZ", static_cast<int>(rem / 3600),
                static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
  return format_ymd(std::chrono::sys_days{std::chrono::days{day}}) + buf;
}

std::optional<Decimal> Decimal::parse(std::string_view text) {
  if (text.empty()) return std::nullopt;
  bool neg = false;
  std::size_t i = 0;
  if (text[0] == '-' || text[0] == '+') {
    neg = text[0] == '-';
    i = 1;
  }
  int64_t unscaled = 0;
  int scale = 0;
  bool seen_point = false, seen_digit = false;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c == '.') {
      if (seen_point) return std::nullopt;
      seen_point = true;
      continue;
    }
    if (c < '0' || c > '9') return std::nullopt;
    if (__builtin_mul_overflow(unscaled, int64_t{10}, &unscaled) ||
        __builtin_add_overflow(unscaled, int64_t{c - '0'}, &unscaled))
      return std::nullopt;
    seen_digit = true;
    if (seen_point) ++scale;
  }
  if (!seen_digit) return std::nullopt;
  return Decimal{neg ? -unscaled : unscaled, scale};
}

Decimal Decimal::normalized() const {
  Decimal d = *this;
  while (d.scale > 0 && d.unscaled % 10 == 0) {
    d.unscaled /= 10;
    --d.scale;
  }
  if (d.unscaled == 0) d.scale = 0;
  return d;
}

std::string Decimal::to_string() const {
  bool neg = unscaled < 0;
  // magnitude via unsigned to survive INT64_MIN
  uint64_t mag = neg ? 0 - static_cast<uint64_t>(unscaled)
                     : static_cast<uint64_t>(unscaled);
  std::string digits = std::to_string(mag);
  if (scale > 0) {
    if (digits.size() <= static_cast<std::size_t>(scale))
      digits.insert(0, static_cast<std::size_t>(scale) - digits.size() + 1, '0');
    digits.insert(digits.size() - static_cast<std::size_t>(scale), ".");
  }
  return neg ? "-" + digits : digits;
}

std::string to_display(const Value& v) {
  struct Visitor {
    std::string operator()(std::monostate) const { return "NULL"; }
    std::string operator()(int64_t i) const { return std::to_string(i); }
    std::string operator()(const Decimal& d) const { return d.to_string(); }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(const Date& d) const { return d.to_iso(); }
    std::string operator()(const Timestamp& t) const { return t.to_iso(); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
  };
  return std::visit(Visitor{}, v);
}

ColumnType ColumnType::decimal(int precision, int scale) {
  if (precision < scale || scale < 0 || precision < 1)
    throw InvalidParameter("decimal(" + std::to_string(precision) + "," +
                           std::to_string(scale) +
                           ") requires precision >= scale >= 0");
  return {Kind::decimal, precision, scale};
}

std::string ColumnType::name() const {
  switch (kind) {
    case Kind::integer: return "integer";
    case Kind::decimal:
      return "decimal(" + std::to_string(precision) + "," +
             std::to_string(scale) + ")";
    case Kind::text: return "text";
    case Kind::date: return "date";
    case Kind::timestamp: return "timestamp";
    case Kind::boolean: return "boolean";
  }
  return "text";
}

std::optional<std::size_t> TableSchema::find_column(
    std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (iequals(columns[i].name, column)) return i;
  return std::nullopt;
}

void TableSchema::validate() const {
  if (!is_identifier(name))
    throw InvalidParameter("invalid table name '" + name + "'");
  std::unordered_set<std::string> seen;
  for (const auto& c : columns) {
    if (!is_identifier(c.name))
      throw InvalidParameter("invalid column name '" + c.name + "' in " + name);
    if (!seen.insert(to_lower(c.name)).second)
      throw InvalidParameter("duplicate column '" + c.name + "' in " + name);
    if (c.type.kind == ColumnType::Kind::decimal &&
        (c.type.precision < c.type.scale || c.type.scale < 0))
      throw InvalidParameter("bad decimal type on " + name + "." + c.name);
  }
  for (const auto& k : primary_key)
    if (!has_column(k))
      throw InvalidParameter("primary key column '" + k + "' missing in " +
                             name);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string to_upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool is_identifier(std::string_view s) {
  if (s.empty() || s.size() > 128) return false;
  auto head = static_cast<unsigned char>(s[0]);
  if (!(std::isalpha(head) || head == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u == '_';
  });
}

}  // namespace dq
