#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pdial/concurrency.hpp"

namespace pdial {

enum class LlmBackendKind { http, mock };

struct LlmBackendConfig {
  LlmBackendKind kind = LlmBackendKind::mock;
  std::string endpoint_url;
  std::string model_name;
  double temperature = 0.0;
  std::size_t samples_n = 1;
  std::string mock_table_path;
  std::chrono::duration<double> timeout{60.0};
  std::size_t max_attempts = 3;
  std::chrono::duration<double> initial_backoff{1.0};
  std::size_t max_in_flight = 4;

  void validate() const;
};

class LlmClient {
 public:
  explicit LlmClient(std::size_t samples_n) : samples_n_(samples_n) {}
  virtual ~LlmClient() = default;

  /// samples_n generations for one prompt. Rejects an empty prompt.
  std::vector<std::string> complete(const std::string& prompt) const;
  std::size_t samples_n() const noexcept { return samples_n_; }

 protected:
  virtual std::string sample(const std::string& prompt) const = 0;

 private:
  std::size_t samples_n_;
};

using MockTable = std::map<std::string, std::string>;

/// Deterministic offline backend: exact prompt lookup. A prompt missing from
/// the table is answered with the longest known phrase it contains, or with
/// the prompt itself when none matches.
class MockLlm final : public LlmClient {
 public:
  MockLlm(MockTable table, std::size_t samples_n = 1, std::vector<std::string> phrases = {});

 protected:
  std::string sample(const std::string& prompt) const override;

 private:
  MockTable table_;
  std::vector<std::string> phrases_;
};

/// Chat-completions client: {"model", "messages": [{"role": "user", ...}],
/// "temperature"} -> choices[0].message.content. One request per sample;
/// transport failures and 429/5xx are retried with exponential backoff.
class HttpLlm final : public LlmClient {
 public:
  HttpLlm(LlmBackendConfig cfg, std::shared_ptr<FanoutLimiter> limiter);

  static std::string build_request(const std::string& model, const std::string& prompt,
                                   double temperature);
  /// Throws ProtocolError when the body lacks choices[0].message.content.
  static std::string parse_response(const std::string& body);

 protected:
  std::string sample(const std::string& prompt) const override;

 private:
  LlmBackendConfig cfg_;
  std::shared_ptr<FanoutLimiter> limiter_;
};

/// `phrases` feeds the mock fallback rule; ignored by the HTTP backend.
std::unique_ptr<LlmClient> make_llm(const LlmBackendConfig& cfg,
                                    std::vector<std::string> phrases = {},
                                    std::shared_ptr<FanoutLimiter> limiter = nullptr);

std::vector<std::string> complete(const std::string& prompt, const LlmBackendConfig& cfg);

}  // namespace pdial
