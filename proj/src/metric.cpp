#include "pdial/metric.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "pdial/errors.hpp"
#include "pdial/random.hpp"

namespace pdial {

ClusterSimilarityMatrix::ClusterSimilarityMatrix(std::vector<std::string> clusters,
                                                 std::vector<std::vector<double>> sim)
    : clusters_(std::move(clusters)), sim_(std::move(sim)) {
  const std::size_t n = clusters_.size();
  if (n == 0) throw ConfigError("cluster matrix has no clusters");
  std::set<std::string> unique;
  for (const auto& c : clusters_) {
    if (c.empty()) throw ConfigError("cluster matrix contains an empty cluster label");
    if (!unique.insert(c).second) throw ConfigError("cluster matrix repeats label '" + c + "'");
  }
  if (sim_.size() != n) {
    throw ConfigError("cluster matrix has " + std::to_string(sim_.size()) + " rows for " +
                      std::to_string(n) + " clusters");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (sim_[i].size() != n) {
      throw ConfigError("cluster matrix row " + std::to_string(i) + " has " +
                        std::to_string(sim_[i].size()) + " entries, expected " + std::to_string(n));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (sim_[i][i] != 1.0) {
      throw ConfigError("cluster matrix diagonal entry for '" + clusters_[i] + "' must be 1.0");
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double v = sim_[i][j];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError("cluster matrix entry (" + clusters_[i] + ", " + clusters_[j] +
                          ") is outside [0, 1]");
      }
      if (v != sim_[j][i]) {
        throw ConfigError("cluster matrix is not symmetric at (" + clusters_[i] + ", " +
                          clusters_[j] + ")");
      }
    }
  }
}

ClusterSimilarityMatrix ClusterSimilarityMatrix::three_way(const std::string& pole_a,
                                                           const std::string& center,
                                                           const std::string& pole_b,
                                                           double center_label, double pole_label) {
  return ClusterSimilarityMatrix({pole_a, center, pole_b}, {{1.0, center_label, pole_label},
                                                            {center_label, 1.0, center_label},
                                                            {pole_label, center_label, 1.0}});
}

std::optional<std::size_t> ClusterSimilarityMatrix::index_of(const std::string& cluster) const {
  for (std::size_t i = 0; i < clusters_.size(); ++i) {
    if (clusters_[i] == cluster) return i;
  }
  return std::nullopt;
}

double ClusterSimilarityMatrix::label(const std::string& a, const std::string& b) const {
  const auto ia = index_of(a);
  if (!ia) throw ConfigError("cluster '" + a + "' is not in the similarity matrix");
  const auto ib = index_of(b);
  if (!ib) throw ConfigError("cluster '" + b + "' is not in the similarity matrix");
  return sim_[*ia][*ib];
}

ProjectionModel ProjectionModel::identity(std::size_t d) {
  return ProjectionModel{d, d, Matrix::identity(d)};
}

void ProjectionModel::validate() const {
  if (d_in == 0 || d_out == 0) throw ConfigError("projection model dimensions must be positive");
  if (weights.rows() != d_out || weights.cols() != d_in) {
    throw ConfigError("projection weights are " + std::to_string(weights.rows()) + "x" +
                      std::to_string(weights.cols()) + ", expected " + std::to_string(d_out) +
                      "x" + std::to_string(d_in));
  }
  if (!all_finite(weights.data())) throw NumericError("projection weights contain non-finite values");
}

void TrainConfig::validate() const {
  if (!(margin > 0.0) || !std::isfinite(margin)) throw ConfigError("margin must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0)) {
    throw ConfigError("binarize threshold must lie in (0, 1)");
  }
}

std::string to_string(LossKind k) { return k == LossKind::cosine ? "cosine" : "contrastive"; }

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "cosine") return LossKind::cosine;
  if (s == "contrastive") return LossKind::contrastive;
  throw ConfigError("unknown loss '" + s + "' (expected cosine or contrastive)");
}

std::vector<TrainingPair> generate_pairs(std::span<const LabeledDocument> dataset,
                                         const ClusterSimilarityMatrix& matrix,
                                         std::uint64_t seed) {
  if (dataset.size() < 2) throw InputError("generate_pairs needs at least 2 documents");
  std::vector<std::size_t> cluster_index(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto idx = matrix.index_of(dataset[i].cluster);
    if (!idx) {
      throw ConfigError("document '" + dataset[i].id + "' has cluster '" + dataset[i].cluster +
                        "' which is not in the similarity matrix");
    }
    cluster_index[i] = *idx;
  }
  std::vector<TrainingPair> pairs;
  pairs.reserve(dataset.size() * (dataset.size() - 1) / 2);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t j = i + 1; j < dataset.size(); ++j) {
      pairs.push_back({i, j, matrix.sim()[cluster_index[i]][cluster_index[j]]});
    }
  }
  Rng rng(seed);
  rng.shuffle(pairs);
  return pairs;
}

PerspectiveEmbedding project(const ProjectionModel& model, std::span<const double> e) {
  if (e.size() != model.d_in) {
    throw InputError("project: embedding has length " + std::to_string(e.size()) +
                     ", model expects " + std::to_string(model.d_in));
  }
  return matvec(model.weights, e);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw InputError("cosine_similarity: length mismatch");
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw InputError("cosine_similarity: zero-norm vector");
  const double c = dot(u, v) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

double cosine_loss(std::span<const double> ea, std::span<const double> eb, double y) {
  const double r = cosine_similarity(ea, eb) - y;
  return r * r;
}

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// grad += scale * u v^T
void add_outer(Matrix& grad, double scale, std::span<const double> u, std::span<const double> v) {
  for (std::size_t r = 0; r < grad.rows(); ++r) {
    const double ur = scale * u[r];
    auto row = grad.row(r);
    for (std::size_t c = 0; c < grad.cols(); ++c) row[c] += ur * v[c];
  }
}

}  // namespace

double contrastive_loss(std::span<const double> ea, std::span<const double> eb, int y_bin,
                        double margin) {
  if (y_bin != 0 && y_bin != 1) throw InputError("contrastive_loss: label must be 0 or 1");
  if (!(margin > 0.0)) throw InputError("contrastive_loss: margin must be positive");
  const double d = distance(ea, eb);
  if (y_bin == 1) return d * d;
  const double gap = std::max(0.0, margin - d);
  return gap * gap;
}

std::optional<LossGradient> loss_gradient(const ProjectionModel& model,
                                          std::span<const double> base_a,
                                          std::span<const double> base_b, double y,
                                          const TrainConfig& cfg) {
  const Vector a = project(model, base_a);
  const Vector b = project(model, base_b);
  LossGradient out{0.0, Matrix(model.d_out, model.d_in)};

  if (cfg.loss == LossKind::cosine) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return std::nullopt;
    // Unclamped cosine keeps the loss consistent with its derivative.
    const double c = dot(a, b) / (na * nb);
    const double r = c - y;
    out.loss = r * r;
    // dc/da = b/(|a||b|) - c a/|a|^2, and symmetrically for b.
    Vector dca(a.size());
    Vector dcb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      dca[i] = b[i] / (na * nb) - c * a[i] / (na * na);
      dcb[i] = a[i] / (na * nb) - c * b[i] / (nb * nb);
    }
    add_outer(out.grad, 2.0 * r, dca, base_a);
    add_outer(out.grad, 2.0 * r, dcb, base_b);
    return out;
  }

  const int y_bin = y >= cfg.binarize_threshold ? 1 : 0;
  Vector diff(a.size());
  Vector base_diff(base_a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  for (std::size_t i = 0; i < base_a.size(); ++i) base_diff[i] = base_a[i] - base_b[i];
  const double d = norm(diff);
  if (y_bin == 1) {
    out.loss = d * d;
    add_outer(out.grad, 2.0, diff, base_diff);
  } else if (d < cfg.margin) {
    const double gap = cfg.margin - d;
    out.loss = gap * gap;
    // At d == 0 the hinge has no unique direction; the zero subgradient is used.
    if (d > 0.0) add_outer(out.grad, -2.0 * gap / d, diff, base_diff);
  }
  return out;
}

std::size_t TrainingLog::total_skipped() const {
  std::size_t s = 0;
  for (const auto& e : epochs) s += e.pairs_skipped;
  return s;
}

ProjectionModel initial_model(std::size_t d_in, std::size_t d_out, std::uint64_t seed) {
  if (d_in == 0 || d_out == 0) throw ConfigError("projection dimensions must be positive");
  if (d_in == d_out) return ProjectionModel::identity(d_in);
  ProjectionModel m{d_in, d_out, Matrix(d_out, d_in)};
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (double& w : m.weights.data()) w = scale * rng.gaussian();
  return m;
}

std::vector<std::string> texts_of(std::span<const LabeledDocument> docs) {
  std::vector<std::string> texts;
  texts.reserve(docs.size());
  for (const auto& d : docs) texts.push_back(d.text);
  return texts;
}

TrainResult train(std::span<const LabeledDocument> dataset, const ClusterSimilarityMatrix& matrix,
                  const Embedder& embedder, const TrainConfig& cfg) {
  cfg.validate();
  std::set<std::string> clusters;
  for (const auto& d : dataset) clusters.insert(d.cluster);
  if (clusters.size() < 2) {
    throw InputError("training needs at least 2 clusters with at least one document each");
  }

  auto pairs = generate_pairs(dataset, matrix, cfg.seed);
  const auto texts = texts_of(dataset);
  const auto base = embedder.embed_batch(texts);
  const std::size_t d_in = embedder.dimension();
  const std::size_t d_out = cfg.output_dim == 0 ? d_in : cfg.output_dim;

  TrainResult result{initial_model(d_in, d_out, cfg.seed), {}};
  result.log.pair_count = pairs.size();
  Matrix& w = result.model.weights;
  Rng rng(cfg.seed + 1);

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(pairs);
    EpochStats stats{epoch + 1, 0.0, 0, 0};
    double loss_sum = 0.0;
    for (const auto& p : pairs) {
      auto lg = loss_gradient(result.model, base[p.a], base[p.b], p.label, cfg);
      if (!lg) {
        ++stats.pairs_skipped;
        ++step;
        continue;
      }
      if (!std::isfinite(lg->loss) || !all_finite(lg->grad.data())) {
        std::ostringstream msg;
        msg << "non-finite loss or gradient at step " << step << " (epoch " << epoch + 1
            << ", pair '" << dataset[p.a].id << "' / '" << dataset[p.b].id << "')";
        throw NumericError(msg.str());
      }
      auto& wd = w.data();
      const auto& gd = lg->grad.data();
      for (std::size_t i = 0; i < wd.size(); ++i) wd[i] -= cfg.learning_rate * gd[i];
      loss_sum += lg->loss;
      ++stats.pairs_used;
      ++step;
    }
    stats.mean_loss = stats.pairs_used ? loss_sum / static_cast<double>(stats.pairs_used) : 0.0;
    result.log.epochs.push_back(stats);
  }
  return result;
}

TrainResult train(std::span<const LabeledDocument> dataset, const ClusterSimilarityMatrix& matrix,
                  const EmbeddingBackendConfig& backend, const TrainConfig& cfg) {
  const auto embedder = make_embedder(backend);
  return train(dataset, matrix, *embedder, cfg);
}

}  // namespace pdial
