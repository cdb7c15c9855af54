// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "pdial/evaluation.hpp"
#include "pdial/metric.hpp"
#include "pdial/optimizer.hpp"
#include "pdial/pca.hpp"
#include "pdial/persistence.hpp"
#include "pdial/plot.hpp"
#include "test_support.hpp"

using namespace pdial;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1

double oracle_loss(const Matrix& w, const std::vector<double>& x, const std::vector<double>& z,
                   double y, LossKind kind, double margin) {
  std::vector<double> a(w.rows(), 0.0), b(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
      a[r] += w(r, c) * x[c];
      b[r] += w(r, c) * z[c];
    }
  }
  if (kind == LossKind::cosine) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ab += a[i] * b[i];
      aa += a[i] * a[i];
      bb += b[i] * b[i];
    }
    const double c = ab / std::sqrt(aa * bb);
    return (c - y) * (c - y);
  }
  double d2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  if (y >= 0.5) return d2;
  const double gap = std::max(0.0, margin - std::sqrt(d2));
  return gap * gap;
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int instances = 0;
  for (LossKind kind : {LossKind::cosine, LossKind::contrastive}) {
    std::mt19937_64 rng(kind == LossKind::cosine ? 101 : 202);
    std::uniform_int_distribution<std::size_t> din(3, 8), dout(2, 4);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t, ++instances) {
      const std::size_t d_in = din(rng), d_out = dout(rng);
      ProjectionModel m{d_in, d_out, Matrix(d_out, d_in)};
      for (double& w : m.weights.data()) w = g(rng);
      std::vector<double> x(d_in), z(d_in);
      for (auto& v : x) v = g(rng);
      for (auto& v : z) v = g(rng);
      TrainConfig cfg;
      cfg.loss = kind;
      cfg.margin = 0.5 + 4.0 * u(rng);
      const double y = kind == LossKind::cosine ? u(rng) : (u(rng) < 0.5 ? 0.0 : 1.0);
      const auto lg = loss_gradient(m, x, z, y, cfg);
      if (!lg) return {false, "unexpected skipped pair"};
      const double h = 1e-5;
      for (std::size_t i = 0; i < d_out; ++i) {
        for (std::size_t j = 0; j < d_in; ++j) {
          Matrix plus = m.weights, minus = m.weights;
          plus(i, j) += h;
          minus(i, j) -= h;
          const double numeric = (oracle_loss(plus, x, z, y, kind, cfg.margin) -
                                  oracle_loss(minus, x, z, y, kind, cfg.margin)) / (2 * h);
          const double analytic = lg->grad(i, j);
          const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
          worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d instances, max relative error %.3e (< 1e-4), %.2f s (< 10 s)",
                instances, worst, secs);
  return {worst < 1e-4 && secs < 10.0, buf};
}

// ---------------------------------------------------------------- fixture pipeline

struct PipelineFiles {
  std::string model, report, traces[3], svg;
};

struct Pipeline {
  std::vector<LabeledDocument> train_docs = load_dataset(pdial::testing::fixture("train.jsonl"));
  std::vector<LabeledDocument> test_docs = load_dataset(pdial::testing::fixture("test.jsonl"));
  ClusterSimilarityMatrix matrix = load_matrix(pdial::testing::fixture("sim.json"));
  HashedEmbedder embedder{64};

  TrainConfig train_cfg() const {
    TrainConfig cfg;
    cfg.loss = LossKind::contrastive;
    cfg.margin = 1.0;
    cfg.epochs = 50;
    cfg.learning_rate = 0.05;
    cfg.seed = 7;
    return cfg;
  }
};

Outcome separation(const Pipeline& p, const pdial::testing::TempDir& dir, PipelineFiles& files,
                   ProjectionModel& model_out) {
  const auto t0 = Clock::now();
  const auto result = train(p.train_docs, p.matrix, p.embedder, p.train_cfg());
  const auto report = cluster_similarity_report(p.train_docs, p.test_docs, result.model, p.embedder);
  const double secs = seconds_since(t0);
  files.model = dir.file("model.json");
  files.report = dir.file("report.json");
  save_model(files.model, result.model, p.train_cfg());
  write_text_file(files.report, report_to_json(report).dump(2) + "\n");
  model_out = result.model;

  bool ok = report.test_clusters == report.clusters;
  std::string detail;
  for (std::size_t r = 0; r < report.test_clusters.size(); ++r) {
    const std::size_t diag = r;
    const double d = report.post_mean[r][diag];
    bool row_ok = d > report.pre_mean[r][diag];
    for (std::size_t c = 0; c < report.clusters.size(); ++c) {
      if (c != diag && !(d > report.post_mean[r][c])) row_ok = false;
    }
    ok = ok && row_ok;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s%s %.2f->%.2f", detail.empty() ? "" : ", ",
                  report.test_clusters[r].c_str(), report.pre_mean[r][diag], d);
    detail += buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "; %.2f s (< 60 s)", secs);
  return {ok && secs < 60.0, "diagonal pre->post " + detail + buf};
}

// ---------------------------------------------------------------- 3

Outcome label_scheme(const Pipeline& p) {
  const auto pairs = generate_pairs(p.train_docs, p.matrix, 7);
  std::map<double, std::size_t> counts;
  for (const auto& pr : pairs) ++counts[pr.label];
  // 3 clusters of 5: same-cluster 3 * C(5,2); centre/pole 2 * 5 * 5; pole/pole 5 * 5.
  const std::map<double, std::size_t> expected{{1.0, 30}, {0.35, 50}, {0.0, 25}};
  char buf[128];
  std::snprintf(buf, sizeof buf, "counts 1.0:%zu 0.35:%zu 0.0:%zu of %zu (expected 30/50/25 of 105)",
                counts[1.0], counts[0.35], counts[0.0], pairs.size());
  return {counts == expected && pairs.size() == 105, buf};
}

// ---------------------------------------------------------------- 4

Outcome pca_oracle() {
  const auto t0 = Clock::now();
  double eval_err = 0, vec_err = 0, ortho_err = 0, trace_err = 0;
  for (int t = 0; t < 20; ++t) {
    std::mt19937_64 rng(5000 + t);
    std::normal_distribution<double> g;
    const std::size_t n = 40, d = 6;
    std::vector<Vector> pts(n, Vector(d));
    for (auto& pt : pts) {
      for (std::size_t k = 0; k < d; ++k) pt[k] = g(rng) * (1.0 + static_cast<double>(d - k));
    }
    const auto m = fit_pca(pts, d);

    Eigen::MatrixXd x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) x(i, k) = pts[i][k];
    }
    const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(n - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    for (std::size_t k = 0; k < d; ++k) {
      const auto ek = static_cast<Eigen::Index>(d - 1 - k);
      eval_err = std::max(eval_err, std::abs(m.explained_variance[k] - es.eigenvalues()(ek)));
      double s = 0;
      for (std::size_t j = 0; j < d; ++j) s += m.components(k, j) * es.eigenvectors()(j, ek);
      const double sign = s < 0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        vec_err = std::max(vec_err, std::abs(m.components(k, j) - sign * es.eigenvectors()(j, ek)));
      }
      for (std::size_t l = 0; l < d; ++l) {
        ortho_err = std::max(ortho_err, std::abs(dot(m.components.row(k), m.components.row(l)) -
                                                 (k == l ? 1.0 : 0.0)));
      }
    }
    double sum = 0;
    for (double v : m.explained_variance) sum += v;
    trace_err = std::max(trace_err, std::abs(sum - cov.trace()));
  }
  const double secs = seconds_since(t0);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "20 clouds, eigenvalue %.1e, eigenvector %.1e, orthonormality %.1e, trace %.1e (all < 1e-8), %.2f s (< 5 s)",
                eval_err, vec_err, ortho_err, trace_err, secs);
  return {eval_err < 1e-8 && vec_err < 1e-8 && ortho_err < 1e-8 && trace_err < 1e-8 && secs < 5.0,
          buf};
}

// ---------------------------------------------------------------- 5

class EchoLlm final : public LlmClient {
 public:
  EchoLlm() : LlmClient(1) {}

 protected:
  std::string sample(const std::string& prompt) const override { return prompt; }
};

PromptSpec spec27() {
  return {{"B0", "B1", "B2"}, {{"p0", "p1", "p2"}, {"q0", "q1", "q2"}}};
}

bool monotone(const SearchTrace& t) {
  const auto b = t.best_so_far();
  for (std::size_t i = 1; i < b.size(); ++i) {
    if (b[i] > b[i - 1]) return false;
  }
  return true;
}

Outcome search_optimality(const pdial::testing::TempDir& dir, std::string& trace_path) {
  const auto t0 = Clock::now();
  const auto spec = spec27();
  const PerspectivePoint target{0.25, -0.5};

  // Arbitrary pinned points for the general table.
  std::mt19937_64 rng(27);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::map<std::string, PerspectivePoint> table;
  std::string oracle_prompt;
  double oracle_loss = 1e300;
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        const std::string prompt = spec.base_phrases[b] + " " + spec.slots[0][i] + " " + spec.slots[1][j];
        const PerspectivePoint pt{u(rng), u(rng)};
        table[prompt] = pt;
        const double l = std::sqrt((pt.x - target.x) * (pt.x - target.x) +
                                   (pt.y - target.y) * (pt.y - target.y));
        if (l < oracle_loss) {
          oracle_loss = l;
          oracle_prompt = prompt;
        }
      }
    }
  }
  EchoLlm llm;
  const PerspectiveFn lookup = [&table](const std::vector<std::string>& outs) { return table.at(outs.at(0)); };
  const auto bf = brute_force_search(spec, target, llm, lookup);
  bool ok = bf.evaluations.size() == 27 && bf.best_evaluation().prompt == oracle_prompt &&
            monotone(bf);

  // Separable variant: point x = a_b + c_i + e_j, y = 0, target at origin with all terms >= 0.
  const double base_t[3] = {0.7, 0.2, 0.9}, s1_t[3] = {0.4, 0.6, 0.1}, s2_t[3] = {0.3, 0.05, 0.5};
  std::map<std::string, PerspectivePoint> sep;
  std::string sep_oracle;
  double sep_best = 1e300;
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        const std::string prompt = spec.base_phrases[b] + " " + spec.slots[0][i] + " " + spec.slots[1][j];
        const double l = base_t[b] + s1_t[i] + s2_t[j];
        sep[prompt] = {l, 0.0};
        if (l < sep_best) {
          sep_best = l;
          sep_oracle = prompt;
        }
      }
    }
  }
  const PerspectiveFn sep_lookup = [&sep](const std::vector<std::string>& outs) { return sep.at(outs.at(0)); };
  const PerspectivePoint origin{0.0, 0.0};
  const auto gcd = gcd_search(spec, origin, llm, sep_lookup);
  const auto bf_sep = brute_force_search(spec, origin, llm, sep_lookup);
  ok = ok && gcd.best_evaluation().prompt == sep_oracle &&
       bf_sep.best_evaluation().prompt == sep_oracle && gcd.evaluations.size() <= 27 &&
       monotone(gcd) && monotone(bf_sep);

  trace_path = dir.file("search.jsonl");
  save_trace(trace_path, gcd, {"gcd", origin, spec.base_phrases});
  const double secs = seconds_since(t0);
  char buf[220];
  std::snprintf(buf, sizeof buf,
                "brute force argmin \"%s\" (oracle \"%s\"), gcd \"%s\" in %zu evaluations (oracle \"%s\"), %.3f s (< 5 s)",
                bf.best_evaluation().prompt.c_str(), oracle_prompt.c_str(),
                gcd.best_evaluation().prompt.c_str(), gcd.evaluations.size(), sep_oracle.c_str(), secs);
  return {ok && secs < 5.0, buf};
}

// ---------------------------------------------------------------- 6

Outcome correct_phrase(const Pipeline& p, const ProjectionModel& model,
                       const pdial::testing::TempDir& dir, PipelineFiles& files) {
  std::vector<Vector> projected;
  for (const auto& e : p.embedder.embed_batch(texts_of(p.train_docs))) projected.push_back(project(model, e));
  const auto pca = fit_pca(projected);
  const auto spec = load_prompt_spec(pdial::testing::fixture("prompts.json"));
  LlmBackendConfig llm_cfg;
  llm_cfg.mock_table_path = pdial::testing::fixture("mock_table.json");
  const auto llm = make_llm(llm_cfg, spec.all_phrases());
  const auto measure = make_perspective_fn(p.embedder, model, pca);

  // Base phrase i speaks for cluster i of the matrix order.
  const auto& clusters = p.matrix.clusters();
  int correct = 0;
  std::string detail;
  PlotInput plot;
  plot.title = "search traces";
  for (const auto& c : clusters) {
    PlotSeries s{c, {}};
    for (const auto& d : p.train_docs) {
      if (d.cluster == c) s.points.push_back(pca_transform(pca, project(model, p.embedder.embed(d.text))));
    }
    plot.series.push_back(std::move(s));
  }
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const auto target = cluster_centroid(clusters[k], p.train_docs, model, pca, p.embedder);
    const auto trace = gcd_search(spec, target, *llm, measure);
    const auto chosen = trace.best_evaluation().assignment.base_index;
    if (chosen == k) ++correct;
    detail += (detail.empty() ? "" : ", ") + clusters[k] + "->base " + std::to_string(chosen);
    files.traces[k] = dir.file("trace_" + clusters[k] + ".jsonl");
    save_trace(files.traces[k], trace, {"gcd", target, spec.base_phrases});
    if (k == 0) {
      plot.target = target;
      std::size_t best = 0;
      for (std::size_t i = 0; i < trace.evaluations.size(); ++i) {
        if (trace.evaluations[i].loss < trace.evaluations[best].loss) best = i;
        plot.path.push_back(trace.evaluations[best].point);
      }
    }
  }
  files.svg = dir.file("plot.svg");
  write_text_file(files.svg, render_svg(plot));
  return {correct == 3, std::to_string(correct) + "/3 correct (" + detail + ")"};
}

// ---------------------------------------------------------------- 7

struct RunArtifacts {
  PipelineFiles files;
  std::string search_trace;
};

RunArtifacts run_pipeline(const Pipeline& p, const pdial::testing::TempDir& dir) {
  RunArtifacts a;
  ProjectionModel model;
  separation(p, dir, a.files, model);
  search_optimality(dir, a.search_trace);
  correct_phrase(p, model, dir, a.files);
  return a;
}

Outcome determinism(const Pipeline& p, const RunArtifacts& first) {
  pdial::testing::TempDir again_dir;
  const auto again = run_pipeline(p, again_dir);
  std::vector<std::pair<std::string, std::string>> pairs{
      {first.files.model, again.files.model},
      {first.files.report, again.files.report},
      {first.search_trace, again.search_trace},
      {first.files.traces[0], again.files.traces[0]},
      {first.files.traces[1], again.files.traces[1]},
      {first.files.traces[2], again.files.traces[2]},
      {first.files.svg, again.files.svg}};
  std::size_t same = 0;
  for (const auto& [a, b] : pairs) {
    if (read_text_file(a) == read_text_file(b)) ++same;
  }
  return {same == pairs.size(), std::to_string(same) + "/" + std::to_string(pairs.size()) +
                                    " files byte-identical (model, report, 4 traces, svg)"};
}

void report(int id, const char* name, const Outcome& o, int& failures) {
  std::printf("[%s] criterion %d: %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
  if (!o.pass) ++failures;
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main() {
  int failures = 0;
  const Pipeline p;
  pdial::testing::TempDir dir;
  RunArtifacts first;
  ProjectionModel model;

  report(1, "gradient correctness", guarded(gradient_check), failures);
  report(2, "separation property",
         guarded([&] { return separation(p, dir, first.files, model); }), failures);
  report(3, "label scheme fidelity", guarded([&] { return label_scheme(p); }), failures);
  report(4, "pca oracle", guarded(pca_oracle), failures);
  report(5, "search optimality",
         guarded([&] { return search_optimality(dir, first.search_trace); }), failures);
  report(6, "correct phrase returned",
         guarded([&] { return correct_phrase(p, model, dir, first.files); }), failures);
  report(7, "determinism", guarded([&] { return determinism(p, first); }), failures);

  std::printf("%d/7 criteria passed\n", 7 - failures);
  return failures == 0 ? 0 : 1;
}
