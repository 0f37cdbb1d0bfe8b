#include <doctest.h>

#include "dq/canonical.hpp"
#include "dq/errors.hpp"
#include "oracle.hpp"

using namespace dq;

TEST_SUITE("canonical") {

TEST_CASE("date parsing round trips") {
  auto d = Date::parse_iso("2024-02-29");
  REQUIRE(d);
  CHECK(d->to_iso() == "2024-02-29");
  CHECK(*d == Date::from_ymd(2024, 2, 29));
  CHECK(Date::from_ymd(1970, 1, 1).days == 0);
  CHECK_FALSE(Date::parse_iso("2023-02-29"));
  CHECK_FALSE(Date::parse_iso("2024-13-01"));
}

TEST_CASE("decimal normalization strips trailing zeros") {
  auto d = Decimal::parse("12.500");
  REQUIRE(d);
  CHECK(d->normalized().to_string() == "12.5");
  CHECK(Decimal::parse("-0.10")->normalized().to_string() == "-0.1");
  CHECK(Decimal::parse("7.000")->normalized().to_string() == "7");
}

TEST_CASE("value encodings") {
  CHECK(canonical::encode_value(Value{}, ColumnType::integer(), "x") == "\\N");
  CHECK(canonical::encode_value(Value{}, ColumnType::text(), "x") == "\\N");
  CHECK(canonical::encode_value(Value{int64_t{-42}}, ColumnType::integer(), "x") == "-42");
  // Warehouse NUMBER(38,0) may come back as a decimal with zero scale.
  CHECK(canonical::encode_value(Value{Decimal{4200, 2}}, ColumnType::integer(), "x") == "42");
  CHECK(canonical::encode_value(Value{std::string("2024-03-01")}, ColumnType::date(), "d") == "2024-03-01");
  CHECK(canonical::encode_value(Value{Date::from_ymd(2024, 3, 1)}, ColumnType::date(), "d") == "2024-03-01");
  CHECK(canonical::encode_value(Value{true}, ColumnType::boolean(), "b") == "true");
  CHECK(canonical::encode_value(Value{int64_t{0}}, ColumnType::boolean(), "b") == "false");
  CHECK_THROWS_AS(canonical::encode_value(Value{std::string("abc")}, ColumnType::integer(), "x"),
                  EncodingError);
}

TEST_CASE("rows encode in lowercase column order regardless of case") {
  TableSchema local{"t", {{"b", ColumnType::integer(), true}, {"a", ColumnType::date(), true}}, {"b"}};
  TableSchema remote{"T", {{"A", ColumnType::text(), true}, {"B", ColumnType::integer(), true}}, {"B"}};
  Row l{int64_t{5}, Date::from_ymd(2024, 1, 2)};
  Row r{std::string("2024-01-02"), int64_t{5}};
  // Remote declares the date as text, so compare through a date-typed view.
  remote.columns[0].type = ColumnType::date();
  CHECK(canonical::encode_row(l, local) == canonical::encode_row(r, remote));
  CHECK(canonical::encode_row(l, local) == std::string("2024-01-02") + '\x1f' + "5");
  CHECK(canonical::encode_key(l, local, {"B"}) == "5");
}

TEST_CASE("table checksum is the multiset hash of encoded rows") {
  TypedTable t{{"t", {{"id", ColumnType::integer(), false}, {"name", ColumnType::text(), true}}, {"id"}},
               {{int64_t{1}, std::string("x")}, {int64_t{2}, Value{}}, {int64_t{3}, std::string("z")}}};
  auto encoded = canonical::encode_rows(t);
  auto sum = canonical::table_checksum(t);
  CHECK(sum.row_count == 3);
  CHECK(sum.value == dqt::oracle::multiset_hash(encoded));
  CHECK(canonical::checksum_of_encoded({}).value == 0);
}

}  // TEST_SUITE
