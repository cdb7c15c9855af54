#include "pdial/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>

#include "json.hpp"
#include "pdial/errors.hpp"
#include "pdial/http_transport.hpp"

namespace pdial {

using nlohmann::json;

namespace {

bool is_token_byte(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }

unsigned char ascii_lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<unsigned char>(c + ('a' - 'A')) : c;
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

void EmbeddingBackendConfig::validate() const {
  if (dimension < 2) throw ConfigError("embedding dimension must be >= 2");
  if (batch_size < 1) throw ConfigError("embedding batch_size must be >= 1");
  if (max_in_flight < 1) throw ConfigError("embedding max_in_flight must be >= 1");
  if (timeout.count() <= 0) throw ConfigError("embedding timeout must be positive");
  if (kind == EmbeddingBackendKind::http) {
    if (endpoint_url.empty()) throw ConfigError("http embedding backend needs an endpoint URL");
    if (model_name.empty()) throw ConfigError("http embedding backend needs a model name");
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char raw : text) {
    const unsigned char c = ascii_lower(raw);
    if (is_token_byte(c)) {
      current.push_back(static_cast<char>(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

BaseEmbedding hashed_embed(std::string_view text, std::size_t dimension) {
  if (dimension < 2) throw InputError("hashed_embed: dimension must be >= 2");
  BaseEmbedding v(dimension, 0.0);
  const auto tokens = tokenize(text);
  if (tokens.empty()) {
    throw InputError("hashed_embed: text has no alphanumeric tokens: '" + std::string(text) + "'");
  }
  for (const auto& t : tokens) v[fnv1a64(t) % dimension] += 1.0;
  const double n = norm(v);
  for (double& x : v) x /= n;
  return v;
}

std::vector<BaseEmbedding> Embedder::embed_batch(std::span<const std::string> texts) const {
  if (texts.empty()) throw InputError("embed_batch: no texts given");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (blank(texts[i])) {
      throw InputError("embed_batch: text at position " + std::to_string(i) + " is empty");
    }
  }
  auto out = do_embed(texts);
  if (out.size() != texts.size()) {
    throw ProtocolError("embedding backend returned " + std::to_string(out.size()) +
                        " vectors for " + std::to_string(texts.size()) + " texts");
  }
  return out;
}

BaseEmbedding Embedder::embed(const std::string& text) const {
  return embed_batch(std::span<const std::string>(&text, 1)).front();
}

HashedEmbedder::HashedEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ < 2) throw ConfigError("hashed embedder dimension must be >= 2");
}

std::vector<BaseEmbedding> HashedEmbedder::do_embed(std::span<const std::string> texts) const {
  std::vector<BaseEmbedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(hashed_embed(t, dimension_));
  return out;
}

HttpEmbedder::HttpEmbedder(EmbeddingBackendConfig cfg, std::shared_ptr<FanoutLimiter> limiter)
    : cfg_(std::move(cfg)), limiter_(limiter ? std::move(limiter) : default_limiter()) {
  cfg_.validate();
}

std::vector<BaseEmbedding> HttpEmbedder::embed_chunk(std::span<const std::string> chunk) const {
  json body = {{"model", cfg_.model_name}, {"input", json::array()}};
  for (const auto& t : chunk) body["input"].push_back(t);

  http::Response res;
  {
    FanoutLimiter::Slot slot(*limiter_);
    res = http::post_json(cfg_.endpoint_url, body.dump(), cfg_.timeout);
  }
  if (res.status != 200) {
    const bool retriable = res.status == 429 || res.status >= 500;
    throw BackendError("embedding request failed with HTTP " + std::to_string(res.status) + ": " +
                           res.body.substr(0, 200),
                       res.status, retriable);
  }

  json parsed;
  try {
    parsed = json::parse(res.body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("embedding response is not JSON: ") + e.what());
  }
  if (!parsed.is_object() || !parsed.contains("data") || !parsed["data"].is_array()) {
    throw ProtocolError("embedding response lacks a 'data' array");
  }
  const auto& data = parsed["data"];
  if (data.size() != chunk.size()) {
    throw ProtocolError("embedding response has " + std::to_string(data.size()) +
                        " items for " + std::to_string(chunk.size()) + " inputs");
  }

  std::vector<BaseEmbedding> out(chunk.size());
  std::vector<bool> seen(chunk.size(), false);
  for (std::size_t pos = 0; pos < data.size(); ++pos) {
    const auto& item = data[pos];
    if (!item.is_object() || !item.contains("embedding") || !item["embedding"].is_array()) {
      throw ProtocolError("embedding response item " + std::to_string(pos) +
                          " lacks an 'embedding' array");
    }
    std::size_t index = pos;
    if (item.contains("index")) {
      if (!item["index"].is_number_unsigned()) {
        throw ProtocolError("embedding response item " + std::to_string(pos) +
                            " has a non-integer index");
      }
      index = item["index"].get<std::size_t>();
    }
    if (index >= chunk.size() || seen[index]) {
      throw ProtocolError("embedding response index " + std::to_string(index) +
                          " is out of range or duplicated");
    }
    seen[index] = true;
    const auto& emb = item["embedding"];
    if (emb.size() != cfg_.dimension) {
      throw ConfigError("embedding service returned dimension " + std::to_string(emb.size()) +
                        " but the backend is configured for " + std::to_string(cfg_.dimension));
    }
    BaseEmbedding v;
    v.reserve(emb.size());
    for (const auto& x : emb) {
      if (!x.is_number()) throw ProtocolError("embedding contains a non-numeric entry");
      v.push_back(x.get<double>());
    }
    if (!all_finite(v)) throw ProtocolError("embedding contains non-finite values");
    out[index] = std::move(v);
  }
  return out;
}

std::vector<BaseEmbedding> HttpEmbedder::do_embed(std::span<const std::string> texts) const {
  std::vector<std::future<std::vector<BaseEmbedding>>> pending;
  for (std::size_t start = 0; start < texts.size(); start += cfg_.batch_size) {
    const std::size_t len = std::min(cfg_.batch_size, texts.size() - start);
    pending.push_back(std::async(std::launch::async, [this, chunk = texts.subspan(start, len)] {
      return embed_chunk(chunk);
    }));
  }
  std::vector<BaseEmbedding> out;
  out.reserve(texts.size());
  // Every future is drained before rethrowing so no task outlives the call.
  std::exception_ptr first_error;
  for (auto& f : pending) {
    try {
      auto part = f.get();
      for (auto& v : part) out.push_back(std::move(v));
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

std::unique_ptr<Embedder> make_embedder(const EmbeddingBackendConfig& cfg,
                                        std::shared_ptr<FanoutLimiter> limiter) {
  cfg.validate();
  switch (cfg.kind) {
    case EmbeddingBackendKind::hashed:
      return std::make_unique<HashedEmbedder>(cfg.dimension);
    case EmbeddingBackendKind::http:
      if (!limiter) limiter = std::make_shared<FanoutLimiter>(cfg.max_in_flight);
      return std::make_unique<HttpEmbedder>(cfg, std::move(limiter));
  }
  throw ConfigError("unknown embedding backend kind");
}

std::vector<BaseEmbedding> embed_batch(std::span<const std::string> texts,
                                       const EmbeddingBackendConfig& cfg) {
  return make_embedder(cfg)->embed_batch(texts);
}

}  // namespace pdial
