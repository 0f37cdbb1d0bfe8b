#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include "dq/errors.hpp"
#include "dq/synth.hpp"

namespace dq::synth {

HttpProvider::HttpProvider(std::string endpoint, std::string model_name, std::string key_env)
    : endpoint_(std::move(endpoint)), model_name_(std::move(model_name)), key_env_(std::move(key_env)) {}

std::string HttpProvider::generate(const std::string& prompt, uint64_t seed) {
  const char* key = std::getenv(key_env_.c_str());
  if (!key || !*key) throw GenerationError("environment variable " + key_env_ + " is not set");

  // endpoint = scheme://host[:port]/path
  auto scheme_end = endpoint_.find("://");
  if (scheme_end == std::string::npos) throw InvalidParameter("endpoint needs a scheme: " + endpoint_);
  auto path_start = endpoint_.find('/', scheme_end + 3);
  std::string origin = endpoint_.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : endpoint_.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(10);
  client.set_read_timeout(120);
  client.set_bearer_token_auth(key);

  nlohmann::json body = {{"model", model_name_},
                         {"temperature", 0},
                         {"seed", seed},
                         {"messages", {{{"role", "user"}, {"content", prompt}}}}};
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw TransportError("request to " + origin + " failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + origin);
  if (res->status != 200)
    throw GenerationError("HTTP " + std::to_string(res->status) + " from " + origin + ": " + res->body);
  try {
    auto doc = nlohmann::json::parse(res->body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw GenerationError(std::string("unexpected completion payload: ") + e.what());
  }
}

}  // namespace dq::synth
