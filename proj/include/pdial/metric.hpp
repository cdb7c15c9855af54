#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pdial/embedding.hpp"
#include "pdial/linalg.hpp"

namespace pdial {

/// Embedding after the trainable projection head.
using PerspectiveEmbedding = Vector;

struct LabeledDocument {
  std::string id;
  std::string text;
  std::string cluster;
};

/// Per-topic label scheme: similarity label for every pair of clusters.
class ClusterSimilarityMatrix {
 public:
  ClusterSimilarityMatrix() = default;
  /// Validates symmetry, unit diagonal, entries in [0,1], unique labels.
  ClusterSimilarityMatrix(std::vector<std::string> clusters, std::vector<std::vector<double>> sim);

  /// Same cluster 1, pole/pole `poles`, center/pole `center`.
  static ClusterSimilarityMatrix three_way(const std::string& pole_a, const std::string& center,
                                           const std::string& pole_b, double center_label = 0.35,
                                           double pole_label = 0.0);

  const std::vector<std::string>& clusters() const noexcept { return clusters_; }
  const std::vector<std::vector<double>>& sim() const noexcept { return sim_; }

  std::optional<std::size_t> index_of(const std::string& cluster) const;
  /// Throws ConfigError for unknown labels.
  double label(const std::string& a, const std::string& b) const;

 private:
  std::vector<std::string> clusters_;
  std::vector<std::vector<double>> sim_;
};

struct TrainingPair {
  std::size_t a = 0;  // index into the dataset
  std::size_t b = 0;
  double label = 0.0;
};

/// Shared-weight Siamese head: both texts of a pair go through the same W.
struct ProjectionModel {
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  Matrix weights;  // d_out x d_in

  static ProjectionModel identity(std::size_t d);
  void validate() const;
  bool operator==(const ProjectionModel&) const = default;
};

enum class LossKind { cosine, contrastive };

struct TrainConfig {
  LossKind loss = LossKind::contrastive;
  double margin = 1.0;
  double learning_rate = 0.01;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double binarize_threshold = 0.5;
  /// Output dimension of the head; 0 keeps d_out = d_in (identity init).
  std::size_t output_dim = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

/// All unordered pairs (i < j), labelled from the matrix, in a seeded shuffle.
std::vector<TrainingPair> generate_pairs(std::span<const LabeledDocument> dataset,
                                         const ClusterSimilarityMatrix& matrix, std::uint64_t seed);

PerspectiveEmbedding project(const ProjectionModel& model, std::span<const double> e);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// (cos(a, b) - y)^2
double cosine_loss(std::span<const double> ea, std::span<const double> eb, double y);

/// y d^2 + (1 - y) max(0, m - d)^2 with d = |ea - eb|.
double contrastive_loss(std::span<const double> ea, std::span<const double> eb, int y_bin,
                        double margin);

struct LossGradient {
  double loss = 0.0;
  Matrix grad;  // dL/dW, d_out x d_in
};

/// Loss of one pair and its gradient with respect to the shared W, summed
/// over both branches. For the contrastive loss the label is binarized with
/// cfg.binarize_threshold. Returns nullopt when a projected embedding has
/// zero norm under the cosine loss (the pair is skipped).
std::optional<LossGradient> loss_gradient(const ProjectionModel& model,
                                          std::span<const double> base_a,
                                          std::span<const double> base_b, double y,
                                          const TrainConfig& cfg);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::size_t pairs_used = 0;
  std::size_t pairs_skipped = 0;
};

struct TrainingLog {
  std::size_t pair_count = 0;
  std::vector<EpochStats> epochs;
  std::size_t total_skipped() const;
};

struct TrainResult {
  ProjectionModel model;
  TrainingLog log;
};

/// Initial head: identity when square, else Gaussian(0, 1/d_in) seeded.
ProjectionModel initial_model(std::size_t d_in, std::size_t d_out, std::uint64_t seed);

/// Plain SGD over seed-shuffled pairs, one pair per step. Sequential by
/// contract: the step order is part of the determinism guarantee.
TrainResult train(std::span<const LabeledDocument> dataset, const ClusterSimilarityMatrix& matrix,
                  const Embedder& embedder, const TrainConfig& cfg);

TrainResult train(std::span<const LabeledDocument> dataset, const ClusterSimilarityMatrix& matrix,
                  const EmbeddingBackendConfig& backend, const TrainConfig& cfg);

/// Texts of a dataset in order, for batch embedding.
std::vector<std::string> texts_of(std::span<const LabeledDocument> docs);

}  // namespace pdial
