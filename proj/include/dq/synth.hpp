#pragma once

// Test synthesis: model context -> prompt -> provider -> validated candidate
// tests, plus the usefulness audit of what came back.

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dq/anomaly.hpp"
#include "dq/backend.hpp"
#include "dq/engine.hpp"

namespace dq::synth {

inline constexpr int kDefaultSampleRows = 5;

struct ModelContext {
  std::string model;
  std::vector<Column> columns;
  std::vector<std::vector<std::string>> sample_rows;  // canonical encodings
  /// Keys of dimension models a relationship test may target, "model.column".
  std::vector<std::string> references;
};

/// Curated models only; rows ordered by the model's primary key.
ModelContext extract_context(const store::Backend& backend, const std::string& model,
                             int sample_n = kDefaultSampleRows);

std::string build_prompt(const ModelContext& ctx);

/// Raised for failures worth retrying (connection errors, 429, 5xx).
class TransportError : public Error {
 public:
  using Error::Error;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  virtual std::string generate(const std::string& prompt, uint64_t seed) = 0;
};

/// Deterministic stand-in for a model endpoint: reads the schema, samples and
/// references back out of the prompt and applies fixed rules. Profiles:
///   standard          the rule set
///   degenerate_seed3  an empty suite when seed == 3, standard otherwise
class MockProvider final : public Provider {
 public:
  explicit MockProvider(std::string profile = "standard");
  std::string name() const override { return "mock:" + profile_; }
  std::string generate(const std::string& prompt, uint64_t seed) override;

 private:
  std::string profile_;
};

/// OpenAI-compatible chat-completions endpoint. The API key is read from the
/// environment at call time, never from configuration.
class HttpProvider final : public Provider {
 public:
  HttpProvider(std::string endpoint, std::string model_name,
               std::string key_env = "DQ_LLM_API_KEY");
  std::string name() const override { return "http:" + model_name_; }
  std::string generate(const std::string& prompt, uint64_t seed) override;

 private:
  std::string endpoint_;
  std::string model_name_;
  std::string key_env_;
};

std::unique_ptr<Provider> make_provider(const std::string& kind, const std::string& mock_profile,
                                        const std::string& endpoint,
                                        const std::string& model_name);

struct RetryPolicy {
  int retries = 3;
  std::chrono::milliseconds base_delay{250};
};

/// One call plus up to `retries` retries on TransportError, doubling the
/// delay each time. Throws GenerationError once retries are exhausted.
std::string generate_with_retry(Provider& provider, const std::string& prompt, uint64_t seed,
                                const RetryPolicy& policy);

struct RawResponse {
  std::string model;
  std::string prompt;
  std::string response;
};

struct ModelGeneration {
  std::string model;
  int items = 0;  // valid + invalid candidates
  int valid = 0;
  std::string error;  // document-level failure, if any
};

struct GenerationResult {
  engine::SchemaFile generated;
  std::vector<RawResponse> raw;
  std::vector<engine::InvalidCandidate> invalid;
  std::vector<ModelGeneration> per_model;
  bool success = false;  // every target model yielded >= 1 valid test
};

GenerationResult generate_tests(Provider& provider, const std::vector<ModelContext>& contexts,
                                uint64_t seed, const engine::Catalog& catalog,
                                const RetryPolicy& policy = {});

/// Writes `<dir>/<model>.prompt.txt`, `<dir>/<model>.response.txt` and
/// `<dir>/generation.json`.
void persist_generation(const GenerationResult& result, const std::filesystem::path& dir);

nlohmann::json to_json(const GenerationResult& g);  // everything but raw text
/// Inverse of to_json; the generated schema is stored separately as YAML.
GenerationResult generation_from_json(const nlohmann::json& j, engine::SchemaFile generated);

enum class AuditClass { useful, redundant, low_value, invalid };
const char* audit_class_name(AuditClass c);

struct AuditRecord {
  std::string test_id;
  std::string model;
  AuditClass klass = AuditClass::low_value;
  std::optional<std::string> duplicate_of;
  std::set<std::string> incremental_anomalies;
  std::optional<std::string> execution_error;
};

struct AuditCounts {
  int useful = 0;
  int redundant = 0;
  int low_value = 0;
  int invalid = 0;
  int total() const { return useful + redundant + low_value + invalid; }
  void add(AuditClass c);
  friend bool operator==(const AuditCounts&, const AuditCounts&) = default;
};

struct AuditReport {
  std::vector<AuditRecord> records;
  std::vector<std::pair<std::string, AuditCounts>> per_model;  // generation order
  AuditCounts totals;
};

/// Precedence invalid > redundant > useful > low_value. Incremental
/// detections are measured against manual_only. Throws AuditError when the
/// comparator detail is missing.
AuditReport audit_tests(const GenerationResult& generation, const engine::MergeResult& merge,
                        const engine::TestRunReport& clean_results,
                        const anomaly::ComparatorReport* comparator);

nlohmann::json to_json(const AuditReport& r);

}  // namespace dq::synth
