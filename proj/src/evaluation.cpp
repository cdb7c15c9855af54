#include "pdial/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pdial/errors.hpp"

namespace pdial {

CellStats mean_and_std(std::span<const double> values) {
  if (values.empty()) throw InputError("mean_and_std: no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

std::vector<std::string> cluster_order(std::span<const LabeledDocument> docs) {
  std::vector<std::string> order;
  for (const auto& d : docs) {
    if (std::find(order.begin(), order.end(), d.cluster) == order.end()) order.push_back(d.cluster);
  }
  return order;
}

namespace {

std::size_t position(const std::vector<std::string>& v, const std::string& s) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), s) - v.begin());
}

void fill_stats(const std::vector<Vector>& train_vecs, const std::vector<Vector>& test_vecs,
                std::span<const LabeledDocument> train, std::span<const LabeledDocument> test,
                const SimilarityReport& shape, StatMatrix& mean, StatMatrix& std) {
  const std::size_t rows = shape.test_clusters.size();
  const std::size_t cols = shape.clusters.size();
  std::vector<std::vector<std::vector<double>>> cells(rows, std::vector<std::vector<double>>(cols));
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::size_t r = position(shape.test_clusters, test[i].cluster);
    for (std::size_t j = 0; j < train.size(); ++j) {
      const std::size_t c = position(shape.clusters, train[j].cluster);
      cells[r][c].push_back(cosine_similarity(test_vecs[i], train_vecs[j]));
    }
  }
  mean.assign(rows, std::vector<double>(cols));
  std.assign(rows, std::vector<double>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto s = mean_and_std(cells[r][c]);
      mean[r][c] = s.mean;
      std[r][c] = s.std;
    }
  }
}

std::vector<Vector> project_all(const ProjectionModel& model, const std::vector<Vector>& base,
                                std::span<const LabeledDocument> docs) {
  std::vector<Vector> out;
  out.reserve(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto p = project(model, base[i]);
    if (norm(p) == 0.0) {
      throw NumericError("document '" + docs[i].id + "' projects to the zero vector");
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

SimilarityReport cluster_similarity_report(std::span<const LabeledDocument> train,
                                           std::span<const LabeledDocument> test,
                                           const ProjectionModel& model, const Embedder& embedder) {
  if (train.empty() || test.empty()) throw InputError("similarity report needs non-empty splits");
  model.validate();
  if (model.d_in != embedder.dimension()) {
    throw ConfigError("model expects d_in = " + std::to_string(model.d_in) +
                      " but the embedding backend has dimension " +
                      std::to_string(embedder.dimension()));
  }

  SimilarityReport report;
  report.clusters = cluster_order(train);
  const auto test_order = cluster_order(test);
  for (const auto& c : report.clusters) {
    if (std::find(test_order.begin(), test_order.end(), c) != test_order.end()) {
      report.test_clusters.push_back(c);
    }
  }
  if (report.test_clusters.empty()) {
    throw InputError("test and train splits share no cluster labels");
  }
  for (const auto& c : test_order) {
    if (std::find(report.clusters.begin(), report.clusters.end(), c) == report.clusters.end()) {
      throw InputError("test cluster '" + c + "' does not occur in the training split");
    }
  }

  const auto train_base = embedder.embed_batch(texts_of(train));
  const auto test_base = embedder.embed_batch(texts_of(test));
  fill_stats(train_base, test_base, train, test, report, report.pre_mean, report.pre_std);
  fill_stats(project_all(model, train_base, train), project_all(model, test_base, test), train, test,
             report, report.post_mean, report.post_std);
  return report;
}

SimilarityReport cluster_similarity_report(std::span<const LabeledDocument> train,
                                           std::span<const LabeledDocument> test,
                                           const ProjectionModel& model,
                                           const EmbeddingBackendConfig& backend) {
  const auto embedder = make_embedder(backend);
  return cluster_similarity_report(train, test, model, *embedder);
}

namespace {

std::string cell(double mean, double std) {
  char buf[64];
  // Avoid printing "-0.00".
  if (std::abs(mean) < 0.005) mean = 0.0;
  std::snprintf(buf, sizeof buf, "%.2f (%.2f)", mean, std);
  return buf;
}

}  // namespace

std::string render_report_table(const SimilarityReport& report) {
  std::size_t label_width = std::string("Train Set").size();
  for (const auto& c : report.clusters) label_width = std::max(label_width, c.size() + 2);
  for (const auto& c : report.test_clusters) label_width = std::max(label_width, c.size() + 7);
  const std::size_t col = 14;

  std::ostringstream out;
  auto pad = [](const std::string& s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
  };
  out << pad("Train Set", label_width) << " | " << pad("Pre-Train", col) << " | Post-Train\n";
  const std::string rule(label_width + col + 18, '-');
  out << rule << '\n';
  for (std::size_t r = 0; r < report.test_clusters.size(); ++r) {
    out << report.test_clusters[r] << " (Test)\n";
    for (std::size_t c = 0; c < report.clusters.size(); ++c) {
      out << pad("  " + report.clusters[c], label_width) << " | "
          << pad(cell(report.pre_mean[r][c], report.pre_std[r][c]), col) << " | "
          << cell(report.post_mean[r][c], report.post_std[r][c]) << '\n';
    }
    out << rule << '\n';
  }
  out << "cells: mean (population std) of cosine similarity over all test x train pairs\n";
  return out.str();
}

}  // namespace pdial
