#include "pdial/llm.hpp"

#include <thread>

#include "json.hpp"
#include "pdial/errors.hpp"
#include "pdial/http_transport.hpp"
#include "pdial/persistence.hpp"

namespace pdial {

using nlohmann::json;

void LlmBackendConfig::validate() const {
  if (samples_n < 1) throw ConfigError("samples_n must be >= 1");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (kind == LlmBackendKind::http) {
    if (endpoint_url.empty()) throw ConfigError("http LLM backend needs an endpoint URL");
    if (model_name.empty()) throw ConfigError("http LLM backend needs a model name");
  }
}

std::vector<std::string> LlmClient::complete(const std::string& prompt) const {
  if (prompt.empty()) throw InputError("complete: prompt is empty");
  std::vector<std::string> out;
  out.reserve(samples_n_);
  for (std::size_t i = 0; i < samples_n_; ++i) out.push_back(sample(prompt));
  return out;
}

MockLlm::MockLlm(MockTable table, std::size_t samples_n, std::vector<std::string> phrases)
    : LlmClient(samples_n), table_(std::move(table)), phrases_(std::move(phrases)) {
  if (samples_n < 1) throw ConfigError("samples_n must be >= 1");
}

std::string MockLlm::sample(const std::string& prompt) const {
  if (auto it = table_.find(prompt); it != table_.end()) return it->second;
  const std::string* longest = nullptr;
  for (const auto& p : phrases_) {
    if (p.empty() || prompt.find(p) == std::string::npos) continue;
    if (longest == nullptr || p.size() > longest->size()) longest = &p;
  }
  return longest ? *longest : prompt;
}

HttpLlm::HttpLlm(LlmBackendConfig cfg, std::shared_ptr<FanoutLimiter> limiter)
    : LlmClient(cfg.samples_n), cfg_(std::move(cfg)),
      limiter_(limiter ? std::move(limiter) : default_limiter()) {
  cfg_.validate();
}

std::string HttpLlm::build_request(const std::string& model, const std::string& prompt,
                                   double temperature) {
  json body = {{"model", model},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
               {"temperature", temperature}};
  return body.dump();
}

std::string HttpLlm::parse_response(const std::string& body) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("chat completion response is not JSON: ") + e.what());
  }
  const json* content = nullptr;
  if (parsed.is_object() && parsed.contains("choices") && parsed["choices"].is_array() &&
      !parsed["choices"].empty()) {
    const auto& first = parsed["choices"][0];
    if (first.is_object() && first.contains("message") && first["message"].is_object() &&
        first["message"].contains("content")) {
      content = &first["message"]["content"];
    }
  }
  if (content == nullptr || !content->is_string()) {
    throw ProtocolError("chat completion response lacks choices[0].message.content");
  }
  return content->get<std::string>();
}

std::string HttpLlm::sample(const std::string& prompt) const {
  const std::string body = build_request(cfg_.model_name, prompt, cfg_.temperature);
  auto backoff = cfg_.initial_backoff;
  for (std::size_t attempt = 1;; ++attempt) {
    try {
      http::Response res;
      {
        FanoutLimiter::Slot slot(*limiter_);
        res = http::post_json(cfg_.endpoint_url, body, cfg_.timeout);
      }
      if (res.status == 200) return parse_response(res.body);
      const bool retriable = res.status == 429 || res.status >= 500;
      throw BackendError("chat completion failed with HTTP " + std::to_string(res.status) + ": " +
                             res.body.substr(0, 200),
                         res.status, retriable);
    } catch (const BackendError& e) {
      if (!e.retriable() || attempt >= cfg_.max_attempts) throw;
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2.0;
  }
}

std::unique_ptr<LlmClient> make_llm(const LlmBackendConfig& cfg, std::vector<std::string> phrases,
                                    std::shared_ptr<FanoutLimiter> limiter) {
  cfg.validate();
  switch (cfg.kind) {
    case LlmBackendKind::mock: {
      MockTable table;
      if (!cfg.mock_table_path.empty()) table = load_mock_table(cfg.mock_table_path);
      return std::make_unique<MockLlm>(std::move(table), cfg.samples_n, std::move(phrases));
    }
    case LlmBackendKind::http:
      if (!limiter) limiter = std::make_shared<FanoutLimiter>(cfg.max_in_flight);
      return std::make_unique<HttpLlm>(cfg, std::move(limiter));
  }
  throw ConfigError("unknown LLM backend kind");
}

std::vector<std::string> complete(const std::string& prompt, const LlmBackendConfig& cfg) {
  return make_llm(cfg)->complete(prompt);
}

}  // namespace pdial
