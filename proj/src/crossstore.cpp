#include "dq/crossstore.hpp"

#include <algorithm>
#include <set>

#include "dq/errors.hpp"

namespace dq::xstore {
namespace {

using json = nlohmann::json;

std::map<std::string, std::string> split_row(const std::string& encoded,
                                             const std::vector<std::string>& names) {
  std::map<std::string, std::string> out;
  std::size_t start = 0;
  for (const auto& n : names) {
    std::size_t end = encoded.find(canonical::kSeparator, start);
    if (end == std::string::npos) end = encoded.size();
    out[n] = encoded.substr(start, end - start);
    start = end + 1;
  }
  return out;
}

std::vector<std::string> canonical_names(const TableSchema& schema) {
  std::vector<std::string> out;
  for (auto i : canonical::canonical_order(schema)) out.push_back(to_lower(schema.columns[i].name));
  return out;
}

std::string render_key(const Row& row, const TableSchema& schema,
                       const std::vector<std::string>& keys) {
  std::string out;
  for (const auto& k : keys) {
    auto idx = schema.find_column(k);
    if (!idx) throw InvalidParameter("key column '" + k + "' not in " + schema.name);
    const Column& c = schema.columns[*idx];
    if (!out.empty()) out += ",";
    out += to_lower(k) + "=" + canonical::encode_value(row[*idx], c.type, c.name);
  }
  return out;
}

struct Side {
  std::vector<std::string> encoded;
  std::vector<std::string> keys;
};

Side encode_side(const TypedTable& t, const std::vector<std::string>& key_columns) {
  Side s;
  s.encoded = canonical::encode_rows(t);
  s.keys.reserve(t.rows.size());
  for (const auto& r : t.rows) s.keys.push_back(render_key(r, t.schema, key_columns));
  return s;
}

void diff_rows(const Side& local, const Side& remote, const std::vector<std::string>& names,
               TableValidationReport& rep) {
  // Group by key, then compare the multisets of rows under each key.
  std::map<std::string, std::multiset<std::string>> l, r;
  for (std::size_t i = 0; i < local.keys.size(); ++i) l[local.keys[i]].insert(local.encoded[i]);
  for (std::size_t i = 0; i < remote.keys.size(); ++i) r[remote.keys[i]].insert(remote.encoded[i]);

  std::set<std::string> all_keys;
  for (auto& [k, _] : l) all_keys.insert(k);
  for (auto& [k, _] : r) all_keys.insert(k);

  auto push = [&](const std::string& key, const std::string* a, const std::string* b) {
    if (rep.row_diffs.size() >= kMaxRowDiffs) {
      rep.truncated = true;
      return;
    }
    RowDiff d;
    d.key = key;
    if (a) d.local_row = split_row(*a, names);
    if (b) d.remote_row = split_row(*b, names);
    rep.row_diffs.push_back(std::move(d));
  };

  static const std::multiset<std::string> kEmpty;
  for (const auto& key : all_keys) {
    auto li = l.find(key);
    auto ri = r.find(key);
    const auto& ls = li == l.end() ? kEmpty : li->second;
    const auto& rs = ri == r.end() ? kEmpty : ri->second;
    if (ls == rs) continue;
    std::vector<std::string> only_l, only_r;
    std::set_difference(ls.begin(), ls.end(), rs.begin(), rs.end(), std::back_inserter(only_l));
    std::set_difference(rs.begin(), rs.end(), ls.begin(), ls.end(), std::back_inserter(only_r));
    std::size_t n = std::max(only_l.size(), only_r.size());
    for (std::size_t i = 0; i < n; ++i)
      push(key, i < only_l.size() ? &only_l[i] : nullptr, i < only_r.size() ? &only_r[i] : nullptr);
  }
}

}  // namespace

const char* verdict_name(Verdict v) { return v == Verdict::match ? "MATCH" : "MISMATCH"; }

bool TableValidationReport::null_summary_equal() const {
  return std::all_of(null_summary.begin(), null_summary.end(),
                     [](const auto& kv) { return kv.second.local == kv.second.remote; });
}

TableValidationReport validate_table(const store::Backend& local,
                                     const store::Backend& warehouse,
                                     const std::string& table,
                                     const std::vector<std::string>& key_columns) {
  if (key_columns.empty()) throw InvalidParameter("validate_table needs key columns");
  TableValidationReport rep;
  rep.table = table;
  rep.local_present = local.has_table(table);
  rep.remote_present = warehouse.has_table(table);
  if (!rep.local_present || !rep.remote_present) {
    rep.failures.push_back("missing_table");
    return rep;
  }

  TypedTable lt = local.read_table(table);
  TypedTable rt = warehouse.read_table(table);

  auto lnames = canonical_names(lt.schema);
  auto rnames = canonical_names(rt.schema);
  rep.columns_aligned = lnames == rnames;

  auto count_nulls = [&](const TypedTable& t, std::optional<int64_t> NullCounts::*side) {
    for (std::size_t c = 0; c < t.schema.columns.size(); ++c) {
      int64_t n = 0;
      for (const auto& row : t.rows) n += is_null(row[c]) ? 1 : 0;
      rep.null_summary[to_lower(t.schema.columns[c].name)].*side = n;
    }
  };
  count_nulls(lt, &NullCounts::local);
  count_nulls(rt, &NullCounts::remote);

  Side ls = encode_side(lt, key_columns);
  Side rs = encode_side(rt, key_columns);
  auto lsum = canonical::checksum_of_encoded(ls.encoded);
  auto rsum = canonical::checksum_of_encoded(rs.encoded);
  rep.row_count = {static_cast<int64_t>(lt.rows.size()), static_cast<int64_t>(rt.rows.size())};
  rep.checksum = {lsum.value, rsum.value};

  if (rep.columns_aligned) diff_rows(ls, rs, lnames, rep);

  if (!rep.columns_aligned) rep.failures.push_back("schema_alignment");
  if (!rep.row_count.equal()) rep.failures.push_back("row_count");
  if (!rep.checksum.equal()) rep.failures.push_back("checksum");
  if (!rep.null_summary_equal()) rep.failures.push_back("null_summary");
  if (!rep.row_diffs.empty()) rep.failures.push_back("row_diffs");
  rep.status = rep.failures.empty() ? Verdict::match : Verdict::mismatch;
  return rep;
}

int CrossStoreReport::matched() const {
  return static_cast<int>(std::count_if(tables.begin(), tables.end(), [](const auto& t) {
    return t.status == Verdict::match;
  }));
}

CrossStoreReport validate_all(const store::Backend& local, const store::Backend& warehouse,
                              const std::vector<TableKeys>& tables) {
  CrossStoreReport out;
  out.vacuous = tables.empty();
  for (const auto& t : tables) {
    out.tables.push_back(validate_table(local, warehouse, t.table, t.key_columns));
    if (out.tables.back().status != Verdict::match) out.status = Verdict::mismatch;
  }
  return out;
}

json to_json(const TableValidationReport& r) {
  json nulls = json::object();
  for (const auto& [col, n] : r.null_summary)
    nulls[col] = {{"local", n.local ? json(*n.local) : json(nullptr)},
                  {"remote", n.remote ? json(*n.remote) : json(nullptr)}};
  json diffs = json::array();
  for (const auto& d : r.row_diffs)
    diffs.push_back({{"key", d.key},
                     {"local_row", d.local_row ? json(*d.local_row) : json(nullptr)},
                     {"remote_row", d.remote_row ? json(*d.remote_row) : json(nullptr)}});
  json j = {{"table", r.table},
            {"status", verdict_name(r.status)},
            {"failures", r.failures},
            {"null_summary", nulls},
            {"row_diffs", diffs},
            {"truncated", r.truncated}};
  if (r.local_present && r.remote_present) {
    j["row_count"] = {{"local", r.row_count.local}, {"remote", r.row_count.remote}};
    j["checksum"] = {{"local", store::format_checksum(r.checksum.local)},
                     {"remote", store::format_checksum(r.checksum.remote)}};
  } else {
    j["row_count"] = nullptr;
    j["checksum"] = nullptr;
    j["missing"] = {{"local", !r.local_present}, {"remote", !r.remote_present}};
  }
  return j;
}

json to_json(const CrossStoreReport& r) {
  json tables = json::array();
  for (const auto& t : r.tables) tables.push_back(to_json(t));
  return {{"status", verdict_name(r.status)},
          {"matched", r.matched()},
          {"total", r.tables.size()},
          {"vacuous", r.vacuous},
          {"tables", tables}};
}

}  // namespace dq::xstore
