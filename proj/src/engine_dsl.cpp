#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_set>

#include "dq/engine.hpp"
#include "dq/errors.hpp"
#include "dq/kernels.hpp"

namespace dq::engine {
namespace {

std::string hash8(std::string_view text) {
  char buf[12];
  std::snprintf(buf, sizeof buf, "%08llx",
                static_cast<unsigned long long>(kernels::fnv1a64(text) >> 32));
  return buf;
}

std::vector<std::string> normalized_values(const std::vector<std::string>& values) {
  std::set<std::string> unique(values.begin(), values.end());
  return {unique.begin(), unique.end()};
}

// Collapses whitespace runs outside string literals.
std::string normalize_predicate(std::string_view p) {
  std::string out;
  bool in_string = false, pending_space = false;
  for (char c : p) {
    if (!in_string && std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    if (c == '\'') in_string = !in_string;
    out.push_back(c);
  }
  return out;
}

const TableSchema* find_model(const Catalog& catalog, std::string_view name) {
  for (const auto& t : catalog)
    if (iequals(t.name, name)) return &t;
  return nullptr;
}

std::string dump_node(const YAML::Node& node) {
  YAML::Emitter e;
  e.SetMapFormat(YAML::Flow);
  e.SetSeqFormat(YAML::Flow);
  e << node;
  return e.c_str();
}

using Code = ParseIssue::Code;

// --- expression sandbox ----------------------------------------------------

const std::unordered_set<std::string> kPredicateKeywords = {
    "and", "or", "not", "is", "null", "in", "between", "like",
    "true", "false", "case", "when", "then", "else", "end"};
const std::unordered_set<std::string> kPredicateFunctions = {
    "length", "lower", "upper", "trim", "abs", "coalesce", "substr", "round"};
const std::unordered_set<std::string> kForbiddenWords = {
    "select", "from",   "where",  "insert", "update", "delete", "drop",
    "create", "alter",  "attach", "detach", "pragma", "union",  "join",
    "with",   "vacuum", "replace", "exists"};

}  // namespace

const char* origin_name(Origin o) {
  switch (o) {
    case Origin::manual: return "manual";
    case Origin::expanded: return "expanded";
    case Origin::generated: return "generated";
  }
  return "manual";
}

const char* kind_name(const TestKind& kind) {
  static constexpr const char* names[] = {"not_null", "unique", "accepted_values",
                                          "relationship", "expression"};
  return names[kind.index()];
}

std::optional<std::string> kind_column(const TestKind& kind) {
  return std::visit(
      [](const auto& k) -> std::optional<std::string> {
        if constexpr (std::is_same_v<std::decay_t<decltype(k)>, Expression>)
          return std::nullopt;
        else
          return k.column;
      },
      kind);
}

std::string make_test_id(std::string_view model, const TestKind& kind) {
  std::string id = to_lower(model) + ".";
  auto column = kind_column(kind);
  id += column ? to_lower(*column) : std::string(kModelLevel);
  id += ".";
  id += kind_name(kind);
  if (auto* av = std::get_if<AcceptedValues>(&kind)) {
    std::string joined;
    for (const auto& v : normalized_values(av->values)) joined += v + '\x1f';
    id += "." + hash8(joined);
  } else if (auto* rel = std::get_if<Relationship>(&kind)) {
    id += "." + hash8(to_lower(rel->to_model) + '\x1f' + to_lower(rel->to_field));
  } else if (auto* ex = std::get_if<Expression>(&kind)) {
    id += "." + hash8(normalize_predicate(ex->predicate));
  }
  return id;
}

TestSpec make_test(std::string model, TestKind kind, Origin origin) {
  if (auto* av = std::get_if<AcceptedValues>(&kind))
    av->values = normalized_values(av->values);
  std::string id = make_test_id(model, kind);
  return TestSpec{std::move(id), std::move(model), std::move(kind), origin};
}

bool semantically_equal(const TestSpec& a, const TestSpec& b) {
  return make_test_id(a.model, a.kind) == make_test_id(b.model, b.kind);
}

std::vector<TestSpec> SchemaFile::all_tests() const {
  std::vector<TestSpec> out;
  for (const auto& m : models) {
    for (const auto& c : m.columns) out.insert(out.end(), c.tests.begin(), c.tests.end());
    out.insert(out.end(), m.tests.begin(), m.tests.end());
  }
  return out;
}

std::size_t SchemaFile::test_count() const {
  std::size_t n = 0;
  for (const auto& m : models) {
    for (const auto& c : m.columns) n += c.tests.size();
    n += m.tests.size();
  }
  return n;
}

const TestSpec* SchemaFile::find(std::string_view id) const {
  for (const auto& m : models) {
    for (const auto& c : m.columns)
      for (const auto& t : c.tests)
        if (t.id == id) return &t;
    for (const auto& t : m.tests)
      if (t.id == id) return &t;
  }
  return nullptr;
}

void SchemaFile::add(const TestSpec& spec) {
  auto mit = std::find_if(models.begin(), models.end(),
                          [&](const ModelEntry& m) { return iequals(m.name, spec.model); });
  if (mit == models.end()) {
    models.push_back(ModelEntry{spec.model, {}, {}});
    mit = std::prev(models.end());
  }
  auto column = kind_column(spec.kind);
  if (!column) {
    mit->tests.push_back(spec);
    return;
  }
  auto cit = std::find_if(mit->columns.begin(), mit->columns.end(),
                          [&](const ColumnEntry& c) { return iequals(c.name, *column); });
  if (cit == mit->columns.end()) {
    mit->columns.push_back(ColumnEntry{*column, {}});
    cit = std::prev(mit->columns.end());
  }
  cit->tests.push_back(spec);
}

const char* issue_code_name(ParseIssue::Code code) {
  switch (code) {
    case Code::syntax: return "syntax";
    case Code::unknown_top_level_key: return "unknown_top_level_key";
    case Code::unknown_key: return "unknown_key";
    case Code::unknown_model: return "unknown_model";
    case Code::unknown_column: return "unknown_column";
    case Code::unknown_test_kind: return "unknown_test_kind";
    case Code::malformed_parameters: return "malformed_parameters";
    case Code::duplicate_model: return "duplicate_model";
    case Code::duplicate_test: return "duplicate_test";
    case Code::unsafe_expression: return "unsafe_expression";
  }
  return "syntax";
}

namespace {

std::string summarize(const std::vector<ParseIssue>& issues) {
  std::string msg = "schema file rejected:";
  for (const auto& i : issues)
    msg += "\n  [" + std::string(issue_code_name(i.code)) + "] " + i.path + ": " +
           i.message;
  return msg;
}

}  // namespace

ParseError::ParseError(std::vector<ParseIssue> issues)
    : Error(summarize(issues)), issues_(std::move(issues)) {}

std::optional<std::string> check_expression(std::string_view predicate,
                                            const TableSchema& model) {
  std::size_t i = 0, n = predicate.size();
  int depth = 0;
  bool any_token = false;
  while (i < n) {
    char c = predicate[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    any_token = true;
    if (c == '\'') {
      ++i;
      bool closed = false;
      while (i < n) {
        if (predicate[i] == '\'') {
          if (i + 1 < n && predicate[i + 1] == '\'') {
            i += 2;
            continue;
          }
          closed = true;
          ++i;
          break;
        }
        ++i;
      }
      if (!closed) return "unterminated string literal";
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      while (i < n && (std::isdigit(static_cast<unsigned char>(predicate[i])) ||
                       predicate[i] == '.'))
        ++i;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = i;
      while (i < n && (std::isalnum(static_cast<unsigned char>(predicate[i])) ||
                       predicate[i] == '_'))
        ++i;
      std::string word = to_lower(predicate.substr(start, i - start));
      std::size_t j = i;
      while (j < n && std::isspace(static_cast<unsigned char>(predicate[j]))) ++j;
      bool is_call = j < n && predicate[j] == '(';
      if (kForbiddenWords.count(word)) return "keyword '" + word + "' is not allowed";
      if (kPredicateKeywords.count(word)) continue;  // IN (...), NOT (...)
      if (is_call) {
        if (!kPredicateFunctions.count(word))
          return "function '" + word + "' is not allowed";
      } else if (!model.has_column(word)) {
        return "unknown column '" + word + "' in model " + model.name;
      }
      continue;
    }
    if (c == '(') {
      ++depth;
      ++i;
      continue;
    }
    if (c == ')') {
      if (--depth < 0) return "unbalanced parentheses";
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < n && predicate[i + 1] == '-') return "comments are not allowed";
    if (c == '/' && i + 1 < n && predicate[i + 1] == '*') return "comments are not allowed";
    if (std::string_view("=<>!+-*/%,|").find(c) != std::string_view::npos) {
      if (c == '!' && (i + 1 >= n || predicate[i + 1] != '=')) return "unexpected '!'";
      ++i;
      continue;
    }
    return std::string("character '") + c + "' is not allowed";
  }
  if (!any_token) return "empty predicate";
  if (depth != 0) return "unbalanced parentheses";
  return std::nullopt;
}

namespace {

class DocumentParser {
 public:
  DocumentParser(const Catalog& catalog, Origin origin, bool lenient)
      : catalog_(catalog), origin_(origin), lenient_(lenient) {}

  SchemaFile file;
  std::vector<ParseIssue> doc_issues;
  std::vector<InvalidCandidate> invalid;

  void parse(std::string_view text) {
    YAML::Node root;
    try {
      root = YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
      doc_issues.push_back({Code::syntax, "$", e.what()});
      return;
    }
    if (!root.IsMap()) {
      doc_issues.push_back({Code::syntax, "$", "document must be a mapping"});
      return;
    }
    for (const auto& kv : root) {
      auto key = kv.first.as<std::string>();
      if (key != "version" && key != "models")
        doc_issues.push_back({Code::unknown_top_level_key, "$." + key,
                              "unknown top-level key '" + key + "'"});
    }
    if (auto v = root["version"]) {
      try {
        file.version = v.as<int>();
        if (file.version < 1) throw YAML::Exception(YAML::Mark(), "");
      } catch (const YAML::Exception&) {
        doc_issues.push_back({Code::malformed_parameters, "$.version",
                              "version must be a positive integer"});
      }
    }
    auto models = root["models"];
    if (!models) {
      doc_issues.push_back({Code::syntax, "$", "missing 'models'"});
      return;
    }
    if (models.IsNull()) return;
    if (!models.IsSequence()) {
      doc_issues.push_back({Code::syntax, "$.models", "'models' must be a list"});
      return;
    }
    std::set<std::string> seen_models;
    for (std::size_t i = 0; i < models.size(); ++i)
      parse_model(models[i], "models[" + std::to_string(i) + "]", seen_models);
  }

 private:
  void item_issue(ParseIssue issue, const std::string& model,
                  const std::string& column, const YAML::Node& node) {
    invalid.push_back({model, column, dump_node(node), std::move(issue)});
  }

  void parse_model(const YAML::Node& node, const std::string& path,
                   std::set<std::string>& seen_models) {
    if (!node.IsMap() || !node["name"] || !node["name"].IsScalar()) {
      doc_issues.push_back({Code::syntax, path, "model entry needs a 'name'"});
      return;
    }
    for (const auto& kv : node) {
      auto key = kv.first.as<std::string>();
      if (key != "name" && key != "columns" && key != "tests")
        doc_issues.push_back({Code::unknown_key, path + "." + key,
                              "unknown model key '" + key + "'"});
    }
    std::string name = node["name"].as<std::string>();
    if (!seen_models.insert(to_lower(name)).second) {
      doc_issues.push_back({Code::duplicate_model, path, "model '" + name +
                                                             "' declared twice"});
      return;
    }
    const TableSchema* schema = find_model(catalog_, name);
    ModelEntry entry{name, {}, {}};

    auto columns = node["columns"];
    if (columns && !columns.IsNull() && !columns.IsSequence()) {
      doc_issues.push_back({Code::syntax, path + ".columns", "'columns' must be a list"});
      columns = YAML::Node();
    }
    if (columns && columns.IsSequence()) {
      for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto& col = columns[c];
        std::string cpath = path + ".columns[" + std::to_string(c) + "]";
        if (!col.IsMap() || !col["name"] || !col["name"].IsScalar()) {
          doc_issues.push_back({Code::syntax, cpath, "column entry needs a 'name'"});
          continue;
        }
        for (const auto& kv : col) {
          auto key = kv.first.as<std::string>();
          if (key != "name" && key != "tests")
            doc_issues.push_back({Code::unknown_key, cpath + "." + key,
                                  "unknown column key '" + key + "'"});
        }
        std::string cname = col["name"].as<std::string>();
        ColumnEntry centry{cname, {}};
        auto tests = sequence_of(col["tests"], cpath + ".tests");
        if (!schema || !schema->has_column(cname)) {
          ParseIssue issue =
              !schema ? ParseIssue{Code::unknown_model, path,
                                   "unknown model '" + name + "'"}
                      : ParseIssue{Code::unknown_column, cpath,
                                   "unknown column '" + cname + "' in model " + name};
          for (const auto& t : tests) item_issue(issue, name, cname, t);
          if (tests.empty() && !lenient_) doc_issues.push_back(issue);
          continue;
        }
        for (std::size_t t = 0; t < tests.size(); ++t) {
          auto spec = parse_test(tests[t], cpath + ".tests[" + std::to_string(t) + "]",
                                 *schema, &cname);
          if (spec) centry.tests.push_back(std::move(*spec));
        }
        entry.columns.push_back(std::move(centry));
      }
    }
    auto tests = sequence_of(node["tests"], path + ".tests");
    for (std::size_t t = 0; t < tests.size(); ++t) {
      std::string tpath = path + ".tests[" + std::to_string(t) + "]";
      if (!schema) {
        item_issue({Code::unknown_model, path, "unknown model '" + name + "'"}, name, "",
                   tests[t]);
        continue;
      }
      auto spec = parse_test(tests[t], tpath, *schema, nullptr);
      if (spec) entry.tests.push_back(std::move(*spec));
    }
    if (!schema && !lenient_ && !node["columns"] && !node["tests"])
      doc_issues.push_back({Code::unknown_model, path, "unknown model '" + name + "'"});
    if (schema) file.models.push_back(std::move(entry));
  }

  std::vector<YAML::Node> sequence_of(const YAML::Node& node, const std::string& path) {
    std::vector<YAML::Node> out;
    if (!node || node.IsNull()) return out;
    if (!node.IsSequence()) {
      doc_issues.push_back({Code::syntax, path, "'tests' must be a list"});
      return out;
    }
    for (const auto& n : node) out.push_back(n);
    return out;
  }

  std::optional<TestSpec> parse_test(const YAML::Node& node, const std::string& path,
                                     const TableSchema& schema, const std::string* column) {
    std::string model = schema.name;
    std::string col = column ? *column : "";
    auto fail = [&](Code code, std::string msg) -> std::optional<TestSpec> {
      item_issue({code, path, std::move(msg)}, model, col, node);
      return std::nullopt;
    };

    std::string kind;
    YAML::Node params;
    if (node.IsScalar()) {
      kind = node.as<std::string>();
    } else if (node.IsMap() && node.size() == 1) {
      kind = node.begin()->first.as<std::string>();
      params = node.begin()->second;
    } else {
      return fail(Code::malformed_parameters, "test must be a name or a single-key mapping");
    }

    auto no_params = [&] { return !params || params.IsNull() || (params.IsMap() && params.size() == 0); };
    auto check_keys = [&](std::initializer_list<const char*> allowed) -> std::optional<std::string> {
      if (!params.IsMap()) return "parameters must be a mapping";
      for (const auto& kv : params) {
        auto key = kv.first.as<std::string>();
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
          return "unexpected parameter '" + key + "'";
      }
      return std::nullopt;
    };

    std::optional<TestKind> parsed;
    if (kind == "not_null" || kind == "unique") {
      if (!column) return fail(Code::malformed_parameters, kind + " must be attached to a column");
      if (!no_params()) return fail(Code::malformed_parameters, kind + " takes no parameters");
      parsed = kind == "not_null" ? TestKind{NotNull{col}} : TestKind{Unique{col}};
    } else if (kind == "accepted_values") {
      if (!column) return fail(Code::malformed_parameters, "accepted_values must be attached to a column");
      if (auto err = check_keys({"values"})) return fail(Code::malformed_parameters, *err);
      auto values = params["values"];
      if (!values || !values.IsSequence() || values.size() == 0)
        return fail(Code::malformed_parameters, "accepted_values needs a non-empty 'values' list");
      AcceptedValues av{col, {}};
      for (const auto& v : values) {
        if (!v.IsScalar()) return fail(Code::malformed_parameters, "accepted value must be a scalar");
        av.values.push_back(v.as<std::string>());
      }
      parsed = av;
    } else if (kind == "relationship" || kind == "relationships") {
      if (!column) return fail(Code::malformed_parameters, "relationship must be attached to a column");
      if (auto err = check_keys({"to", "field"})) return fail(Code::malformed_parameters, *err);
      auto to = params["to"], field = params["field"];
      if (!to || !field || !to.IsScalar() || !field.IsScalar())
        return fail(Code::malformed_parameters, "relationship needs 'to' and 'field'");
      std::string to_model = to.as<std::string>(), to_field = field.as<std::string>();
      const TableSchema* parent = find_model(catalog_, to_model);
      if (!parent) return fail(Code::unknown_model, "relationship target model '" + to_model + "' unknown");
      if (!parent->has_column(to_field))
        return fail(Code::unknown_column, "relationship target column '" + to_model + "." + to_field + "' unknown");
      parsed = Relationship{col, to_model, to_field};
    } else if (kind == "expression") {
      if (column) return fail(Code::malformed_parameters, "expression tests are model-level");
      if (auto err = check_keys({"predicate"})) return fail(Code::malformed_parameters, *err);
      auto pred = params["predicate"];
      if (!pred || !pred.IsScalar()) return fail(Code::malformed_parameters, "expression needs a 'predicate'");
      std::string text = pred.as<std::string>();
      if (auto err = check_expression(text, schema)) {
        Code code = err->rfind("unknown column", 0) == 0 ? Code::unknown_column : Code::unsafe_expression;
        return fail(code, *err);
      }
      parsed = Expression{text};
    } else {
      return fail(Code::unknown_test_kind, "unknown test kind '" + kind + "'");
    }

    TestSpec spec = make_test(model, std::move(*parsed), origin_);
    if (!ids_.insert(spec.id).second)
      return fail(Code::duplicate_test, "test '" + spec.id + "' declared twice");
    return spec;
  }

  const Catalog& catalog_;
  Origin origin_;
  bool lenient_;
  std::set<std::string> ids_;
};

}  // namespace

SchemaFile parse_schema_file(std::string_view text, const Catalog& catalog, Origin origin) {
  DocumentParser p(catalog, origin, false);
  p.parse(text);
  std::vector<ParseIssue> issues = p.doc_issues;
  for (const auto& c : p.invalid) issues.push_back(c.issue);
  if (!issues.empty()) throw ParseError(std::move(issues));
  return p.file;
}

CandidateParse parse_candidates(std::string_view text, const Catalog& catalog, Origin origin) {
  DocumentParser p(catalog, origin, true);
  p.parse(text);
  if (!p.doc_issues.empty()) throw ParseError(p.doc_issues);
  return CandidateParse{std::move(p.file), std::move(p.invalid)};
}

std::string serialize(const SchemaFile& file) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "version" << YAML::Value << file.version;
  e << YAML::Key << "models" << YAML::Value << YAML::BeginSeq;
  auto emit_test = [&](const TestSpec& t) {
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, NotNull>) {
            e << "not_null";
          } else if constexpr (std::is_same_v<T, Unique>) {
            e << "unique";
          } else if constexpr (std::is_same_v<T, AcceptedValues>) {
            e << YAML::BeginMap << YAML::Key << "accepted_values" << YAML::Value
              << YAML::Flow << YAML::BeginMap << YAML::Key << "values" << YAML::Value
              << YAML::Flow << YAML::BeginSeq;
            for (const auto& v : k.values) e << YAML::DoubleQuoted << v;
            e << YAML::EndSeq << YAML::EndMap << YAML::EndMap;
          } else if constexpr (std::is_same_v<T, Relationship>) {
            e << YAML::BeginMap << YAML::Key << "relationship" << YAML::Value
              << YAML::Flow << YAML::BeginMap << YAML::Key << "to" << YAML::Value
              << k.to_model << YAML::Key << "field" << YAML::Value << k.to_field
              << YAML::EndMap << YAML::EndMap;
          } else {
            e << YAML::BeginMap << YAML::Key << "expression" << YAML::Value
              << YAML::Flow << YAML::BeginMap << YAML::Key << "predicate"
              << YAML::Value << YAML::DoubleQuoted << k.predicate << YAML::EndMap
              << YAML::EndMap;
          }
        },
        t.kind);
  };
  for (const auto& m : file.models) {
    e << YAML::BeginMap << YAML::Key << "name" << YAML::Value << m.name;
    if (!m.columns.empty()) {
      e << YAML::Key << "columns" << YAML::Value << YAML::BeginSeq;
      for (const auto& c : m.columns) {
        e << YAML::BeginMap << YAML::Key << "name" << YAML::Value << c.name;
        if (!c.tests.empty()) {
          e << YAML::Key << "tests" << YAML::Value << YAML::BeginSeq;
          for (const auto& t : c.tests) emit_test(t);
          e << YAML::EndSeq;
        }
        e << YAML::EndMap;
      }
      e << YAML::EndSeq;
    }
    if (!m.tests.empty()) {
      e << YAML::Key << "tests" << YAML::Value << YAML::BeginSeq;
      for (const auto& t : m.tests) emit_test(t);
      e << YAML::EndSeq;
    }
    e << YAML::EndMap;
  }
  e << YAML::EndSeq << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace dq::engine
