#pragma once

#include <span>
#include <string>
#include <vector>

#include "pdial/embedding.hpp"
#include "pdial/metric.hpp"

namespace pdial {

using StatMatrix = std::vector<std::vector<double>>;

/// Test-cluster x train-cluster cosine statistics before and after training.
/// Row r is test cluster test_clusters[r]; column c is train cluster
/// clusters[c]. Standard deviations are population (divide by N).
struct SimilarityReport {
  std::vector<std::string> clusters;
  std::vector<std::string> test_clusters;
  StatMatrix pre_mean, pre_std;
  StatMatrix post_mean, post_std;
};

struct CellStats {
  double mean = 0.0;
  double std = 0.0;
};

/// Two-pass mean and population standard deviation.
CellStats mean_and_std(std::span<const double> values);

/// Clusters in order of first appearance.
std::vector<std::string> cluster_order(std::span<const LabeledDocument> docs);

/// Compares every test document against every train document. "pre" uses
/// the base embeddings directly (identity head), "post" the given model.
SimilarityReport cluster_similarity_report(std::span<const LabeledDocument> train,
                                           std::span<const LabeledDocument> test,
                                           const ProjectionModel& model, const Embedder& embedder);

SimilarityReport cluster_similarity_report(std::span<const LabeledDocument> train,
                                           std::span<const LabeledDocument> test,
                                           const ProjectionModel& model,
                                           const EmbeddingBackendConfig& backend);

/// Table with "mean (std)" cells to two decimals, one block per test cluster.
std::string render_report_table(const SimilarityReport& report);

}  // namespace pdial
