#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pdial/concurrency.hpp"
#include "pdial/linalg.hpp"

namespace pdial {

/// Output of the frozen base encoder. Length equals the backend dimension.
using BaseEmbedding = Vector;

enum class EmbeddingBackendKind { http, hashed };

struct EmbeddingBackendConfig {
  EmbeddingBackendKind kind = EmbeddingBackendKind::hashed;
  std::string endpoint_url;
  std::string model_name;
  std::size_t dimension = 768;
  std::size_t batch_size = 32;
  std::chrono::duration<double> timeout{30.0};
  std::size_t max_in_flight = 4;

  void validate() const;
};

std::uint64_t fnv1a64(std::string_view bytes);

/// Lowercased runs of ASCII [a-z0-9]. Every other byte separates tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Feature-hashed bag of words, L2-normalized. Throws InputError when the
/// text contains no tokens or dimension < 2.
BaseEmbedding hashed_embed(std::string_view text, std::size_t dimension);

class Embedder {
 public:
  virtual ~Embedder() = default;

  /// One embedding per text, in input order. Rejects an empty batch and
  /// texts that are blank after trimming.
  std::vector<BaseEmbedding> embed_batch(std::span<const std::string> texts) const;
  BaseEmbedding embed(const std::string& text) const;

  virtual std::size_t dimension() const = 0;

 protected:
  virtual std::vector<BaseEmbedding> do_embed(std::span<const std::string> texts) const = 0;
};

class HashedEmbedder final : public Embedder {
 public:
  explicit HashedEmbedder(std::size_t dimension);
  std::size_t dimension() const override { return dimension_; }

 protected:
  std::vector<BaseEmbedding> do_embed(std::span<const std::string> texts) const override;

 private:
  std::size_t dimension_;
};

/// Client for an embeddings endpoint speaking
///   {"model": ..., "input": [...]} -> {"data": [{"index": i, "embedding": [...]}]}
/// Requests are chunked to batch_size and issued concurrently, bounded by
/// the limiter. Any failed chunk fails the whole call.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(EmbeddingBackendConfig cfg, std::shared_ptr<FanoutLimiter> limiter);
  std::size_t dimension() const override { return cfg_.dimension; }

 protected:
  std::vector<BaseEmbedding> do_embed(std::span<const std::string> texts) const override;

 private:
  std::vector<BaseEmbedding> embed_chunk(std::span<const std::string> chunk) const;

  EmbeddingBackendConfig cfg_;
  std::shared_ptr<FanoutLimiter> limiter_;
};

std::unique_ptr<Embedder> make_embedder(const EmbeddingBackendConfig& cfg,
                                        std::shared_ptr<FanoutLimiter> limiter = nullptr);

std::vector<BaseEmbedding> embed_batch(std::span<const std::string> texts,
                                       const EmbeddingBackendConfig& cfg);

}  // namespace pdial
