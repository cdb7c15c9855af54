// pdial: train a perspective metric, fit its 2-D PCA view, evaluate cluster
// separation, and steer LLM prompts toward a target perspective.

#include <cmath>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pdial/embedding.hpp"
#include "pdial/errors.hpp"
#include "pdial/evaluation.hpp"
#include "pdial/llm.hpp"
#include "pdial/metric.hpp"
#include "pdial/optimizer.hpp"
#include "pdial/pca.hpp"
#include "pdial/persistence.hpp"
#include "pdial/plot.hpp"

namespace {

using namespace pdial;

/// Missing or contradictory flags detected after parsing.
struct UsageError : std::runtime_error {
  UsageError(const CLI::App* cmd, const std::string& msg) : std::runtime_error(msg), command(cmd) {}
  const CLI::App* command;
};

struct EmbeddingFlags {
  std::string kind;
  std::string url;
  std::string model;
  std::size_t dim = 0;
  std::size_t batch = 0;
  double timeout_s = 0.0;

  void add(CLI::App* app) {
    app->add_option("--embedding", kind, "Embedding backend (hashed for offline use)")
        ->check(CLI::IsMember({"hashed", "http"}));
    app->add_option("--embedding-url", url, "Embeddings endpoint URL (implies --embedding http)");
    app->add_option("--embedding-model", model, "Model name sent to the embeddings endpoint");
    app->add_option("--dim", dim, "Base embedding dimension")->check(CLI::PositiveNumber);
    app->add_option("--batch-size", batch, "Texts per embeddings request")
        ->check(CLI::PositiveNumber);
    app->add_option("--embedding-timeout", timeout_s, "Request timeout in seconds")
        ->check(CLI::PositiveNumber);
  }

  /// Overlays the flags on `base`. When no dimension is given anywhere,
  /// `fallback_dim` (e.g. the model's d_in) is used.
  EmbeddingBackendConfig resolve(EmbeddingBackendConfig base, bool base_has_dim,
                                 std::size_t fallback_dim) const {
    if (!url.empty()) {
      base.kind = EmbeddingBackendKind::http;
      base.endpoint_url = url;
    }
    if (kind == "hashed") base.kind = EmbeddingBackendKind::hashed;
    if (kind == "http") base.kind = EmbeddingBackendKind::http;
    if (!model.empty()) base.model_name = model;
    if (dim) {
      base.dimension = dim;
    } else if (!base_has_dim && fallback_dim) {
      base.dimension = fallback_dim;
    }
    if (batch) base.batch_size = batch;
    if (timeout_s > 0) base.timeout = std::chrono::duration<double>(timeout_s);
    base.validate();
    return base;
  }
};

struct Common {
  std::string config_path;
  RunConfig run;
  bool config_has_dim = false;

  void load() {
    if (config_path.empty()) return;
    run = load_run_config(config_path);
    const auto j = load_json_file(config_path);
    config_has_dim = j.contains("embedding") && j["embedding"].contains("dimension");
  }
};

std::string pick(const std::string& flag, const std::string& from_config) {
  return flag.empty() ? from_config : flag;
}

void require(const CLI::App* cmd, const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError(cmd, flag + " is required");
}

std::filesystem::path sibling(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  auto stem = p.stem().string();
  return p.parent_path() / (stem + suffix);
}

std::vector<Vector> projected_points(const std::vector<LabeledDocument>& docs,
                                     const ProjectionModel& model, const Embedder& embedder) {
  std::vector<Vector> out;
  for (const auto& e : embedder.embed_batch(texts_of(docs))) out.push_back(project(model, e));
  return out;
}

// train ----------------------------------------------------------------------

struct TrainArgs {
  std::string data, matrix, loss, out, log, pca_out;
  std::optional<double> margin, lr, threshold;
  std::optional<std::size_t> epochs, out_dim;
  std::optional<std::uint64_t> seed;
  EmbeddingFlags emb;
};

int cmd_train(const CLI::App* cmd, const TrainArgs& a, Common& common) {
  common.load();
  const auto& rc = common.run;
  const std::string data = pick(a.data, rc.paths.dataset);
  const std::string matrix_path = pick(a.matrix, rc.paths.matrix);
  const std::string out = pick(a.out, rc.paths.model);
  require(cmd, data, "--data");
  require(cmd, matrix_path, "--matrix");
  require(cmd, out, "--out");

  TrainConfig cfg = rc.train;
  if (!a.loss.empty()) cfg.loss = loss_kind_from_string(a.loss);
  if (a.margin) cfg.margin = *a.margin;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.threshold) cfg.binarize_threshold = *a.threshold;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.seed) cfg.seed = *a.seed;
  if (a.out_dim) cfg.output_dim = *a.out_dim;
  cfg.validate();

  const auto docs = load_dataset(data);
  const auto matrix = load_matrix(matrix_path);
  const auto backend = a.emb.resolve(rc.embedding, common.config_has_dim, 0);
  const auto embedder = make_embedder(backend);
  const auto result = train(docs, matrix, *embedder, cfg);

  save_model(out, result.model, cfg);
  const std::string log_path = a.log.empty() ? sibling(out, ".log.json").string() : a.log;
  nlohmann::json log = training_log_to_json(result.log);
  log["train_config"] = train_config_to_json(cfg);
  write_text_file(log_path, log.dump(2) + "\n");

  if (!a.pca_out.empty()) {
    save_pca(a.pca_out, fit_pca(projected_points(docs, result.model, *embedder)));
  }

  const auto& last = result.log.epochs;
  std::cout << "trained on " << docs.size() << " documents, " << result.log.pair_count
            << " pairs, " << cfg.epochs << " epochs";
  if (!last.empty()) std::cout << ", final mean loss " << last.back().mean_loss;
  std::cout << ", skipped pairs " << result.log.total_skipped() << "\nmodel: " << out
            << "\nlog: " << log_path << '\n';
  return 0;
}

// fit-pca --------------------------------------------------------------------

struct PcaArgs {
  std::string model, data, extra, out;
  EmbeddingFlags emb;
};

int cmd_fit_pca(const CLI::App* cmd, const PcaArgs& a, Common& common) {
  common.load();
  const auto& rc = common.run;
  const std::string model_path = pick(a.model, rc.paths.model);
  const std::string data = pick(a.data, rc.paths.dataset);
  const std::string out = pick(a.out, rc.paths.pca);
  require(cmd, model_path, "--model");
  require(cmd, data, "--data");
  require(cmd, out, "--out");

  const auto model = load_model(model_path);
  auto docs = load_dataset(data);
  if (!a.extra.empty()) {
    for (auto& d : load_dataset(a.extra)) docs.push_back(std::move(d));
  }
  const auto embedder = make_embedder(a.emb.resolve(rc.embedding, common.config_has_dim, model.d_in));
  const auto pca = fit_pca(projected_points(docs, model, *embedder));
  save_pca(out, pca);
  std::cout << "pca fitted on " << docs.size() << " documents; explained variance "
            << pca.explained_variance[0] << ", " << pca.explained_variance[1] << "\npca: " << out
            << '\n';
  return 0;
}

// eval -----------------------------------------------------------------------

struct EvalArgs {
  std::string model, train, test, out, text_out;
  EmbeddingFlags emb;
};

int cmd_eval(const CLI::App* cmd, const EvalArgs& a, Common& common) {
  common.load();
  const auto& rc = common.run;
  const std::string model_path = pick(a.model, rc.paths.model);
  const std::string train_path = pick(a.train, rc.paths.dataset);
  const std::string test_path = pick(a.test, rc.paths.test_dataset);
  const std::string out = pick(a.out, rc.paths.report);
  require(cmd, model_path, "--model");
  require(cmd, train_path, "--train");
  require(cmd, test_path, "--test");

  const auto model = load_model(model_path);
  const auto train_docs = load_dataset(train_path);
  const auto test_docs = load_dataset(test_path);
  const auto embedder = make_embedder(a.emb.resolve(rc.embedding, common.config_has_dim, model.d_in));
  const auto report = cluster_similarity_report(train_docs, test_docs, model, *embedder);
  const auto table = render_report_table(report);

  if (!out.empty()) {
    write_text_file(out, report_to_json(report).dump(2) + "\n");
    const std::string text_out = a.text_out.empty() ? sibling(out, ".txt").string() : a.text_out;
    write_text_file(text_out, table);
  } else if (!a.text_out.empty()) {
    write_text_file(a.text_out, table);
  }
  std::cout << table;
  return 0;
}

// optimize -------------------------------------------------------------------

struct OptimizeArgs {
  std::string model, pca, prompts, mode = "gcd", target_cluster, data, out;
  std::optional<double> target_x, target_y;
  std::string llm, llm_url, llm_model, mock_table;
  std::optional<double> temperature;
  std::optional<std::size_t> samples;
  std::size_t max_sweeps = 10;
  std::size_t parallel = 1;
  EmbeddingFlags emb;
};

int cmd_optimize(const CLI::App* cmd, const OptimizeArgs& a, Common& common) {
  common.load();
  const auto& rc = common.run;
  const std::string model_path = pick(a.model, rc.paths.model);
  const std::string pca_path = pick(a.pca, rc.paths.pca);
  const std::string prompts_path = pick(a.prompts, rc.paths.prompts);
  const std::string out = pick(a.out, rc.paths.trace);
  require(cmd, model_path, "--model");
  require(cmd, pca_path, "--pca");
  require(cmd, prompts_path, "--prompts");
  require(cmd, out, "--out");
  const bool raw_target = a.target_x.has_value() || a.target_y.has_value();
  if (raw_target && !a.target_cluster.empty()) {
    throw UsageError(cmd, "give either --target-x/--target-y or --target-cluster, not both");
  }
  if (raw_target && !(a.target_x && a.target_y)) {
    throw UsageError(cmd, "--target-x and --target-y must be given together");
  }
  if (!raw_target && a.target_cluster.empty()) {
    throw UsageError(cmd, "a target is required: --target-x/--target-y or --target-cluster");
  }

  LlmBackendConfig llm_cfg = rc.llm;
  if (!a.llm_url.empty()) {
    llm_cfg.kind = LlmBackendKind::http;
    llm_cfg.endpoint_url = a.llm_url;
  }
  if (a.llm == "mock") llm_cfg.kind = LlmBackendKind::mock;
  if (a.llm == "http") llm_cfg.kind = LlmBackendKind::http;
  if (!a.llm_model.empty()) llm_cfg.model_name = a.llm_model;
  if (!a.mock_table.empty()) llm_cfg.mock_table_path = a.mock_table;
  if (a.temperature) llm_cfg.temperature = *a.temperature;
  if (a.samples) llm_cfg.samples_n = *a.samples;
  llm_cfg.validate();

  const auto model = load_model(model_path);
  const auto pca = load_pca(pca_path);
  const auto spec = load_prompt_spec(prompts_path);
  if (a.mode == "brute" && (spec.slots.size() > kMaxBruteForceSlots ||
                            spec.combination_count() > kMaxBruteForceCombinations)) {
    throw ConfigError("brute force over " + std::to_string(spec.combination_count()) +
                      " combinations exceeds the guard (" +
                      std::to_string(kMaxBruteForceCombinations) + " prompts, " +
                      std::to_string(kMaxBruteForceSlots) + " slots)");
  }
  const auto embedder = make_embedder(a.emb.resolve(rc.embedding, common.config_has_dim, model.d_in));

  PerspectivePoint target;
  if (raw_target) {
    target = {*a.target_x, *a.target_y};
  } else {
    const std::string data = pick(a.data, rc.paths.dataset);
    require(cmd, data, "--data (needed for --target-cluster)");
    target = cluster_centroid(a.target_cluster, load_dataset(data), model, pca, *embedder);
  }

  const auto llm = make_llm(llm_cfg, spec.all_phrases());
  const auto measure = make_perspective_fn(*embedder, model, pca);
  SearchOptions opts;
  opts.max_sweeps = a.max_sweeps;
  opts.parallelism = a.parallel;
  const auto trace = a.mode == "brute" ? brute_force_search(spec, target, *llm, measure, opts)
                                       : gcd_search(spec, target, *llm, measure, opts);
  save_trace(out, trace, TraceSummary{a.mode, target, spec.base_phrases});

  const auto& best = trace.best_evaluation();
  std::cout << "mode: " << a.mode << "\ntarget: (" << target.x << ", " << target.y << ")"
            << "\nevaluations: " << trace.evaluations.size() << "\nbest prompt: " << best.prompt
            << "\nbest loss: " << best.loss << "\ntrace: " << out << '\n';
  return 0;
}

// plot -----------------------------------------------------------------------

struct PlotArgs {
  std::string pca, model, data, trace, out, title;
  EmbeddingFlags emb;
};

int cmd_plot(const CLI::App* cmd, const PlotArgs& a, Common& common) {
  common.load();
  const auto& rc = common.run;
  require(cmd, a.out, "--out");
  if (a.data.empty() && a.trace.empty()) {
    throw UsageError(cmd, "nothing to plot: give --data and/or --trace");
  }

  PlotInput in;
  in.title = a.title;
  if (!a.data.empty()) {
    const std::string model_path = pick(a.model, rc.paths.model);
    const std::string pca_path = pick(a.pca, rc.paths.pca);
    require(cmd, model_path, "--model (needed for --data)");
    require(cmd, pca_path, "--pca (needed for --data)");
    const auto model = load_model(model_path);
    const auto pca = load_pca(pca_path);
    const auto docs = load_dataset(a.data);
    const auto embedder =
        make_embedder(a.emb.resolve(rc.embedding, common.config_has_dim, model.d_in));
    const auto points = projected_points(docs, model, *embedder);
    for (const auto& c : cluster_order(docs)) {
      PlotSeries s{c, {}};
      for (std::size_t i = 0; i < docs.size(); ++i) {
        if (docs[i].cluster == c) s.points.push_back(pca_transform(pca, points[i]));
      }
      in.series.push_back(std::move(s));
    }
  }
  if (!a.trace.empty()) {
    const auto tf = load_trace(a.trace);
    in.target = tf.summary.target;
    const std::size_t n_base = std::max<std::size_t>(tf.summary.base_phrases.size(), 1);
    std::vector<PlotSeries> by_base(n_base);
    for (std::size_t b = 0; b < n_base; ++b) {
      by_base[b].label = b < tf.summary.base_phrases.size() ? tf.summary.base_phrases[b]
                                                           : "base " + std::to_string(b);
    }
    std::size_t best = 0;
    for (std::size_t i = 0; i < tf.trace.evaluations.size(); ++i) {
      const auto& e = tf.trace.evaluations[i];
      if (e.assignment.base_index >= by_base.size()) by_base.resize(e.assignment.base_index + 1);
      by_base[e.assignment.base_index].points.push_back(e.point);
      if (e.loss < tf.trace.evaluations[best].loss) best = i;
      in.path.push_back(tf.trace.evaluations[best].point);
    }
    for (auto& s : by_base) {
      if (!s.points.empty()) in.series.push_back(std::move(s));
    }
  }
  write_text_file(a.out, render_svg(in));
  std::cout << "svg: " << a.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perspective metric training, evaluation and LLM prompt steering"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train the projection head on labelled texts");
  train_cmd->add_option("--data", ta.data, "Training documents (JSONL)");
  train_cmd->add_option("--matrix", ta.matrix, "Cluster similarity matrix (JSON)");
  train_cmd->add_option("--loss", ta.loss, "Objective")->check(CLI::IsMember({"cosine", "contrastive"}));
  train_cmd->add_option("--margin", ta.margin, "Contrastive margin");
  train_cmd->add_option("--lr", ta.lr, "SGD learning rate");
  train_cmd->add_option("--epochs", ta.epochs, "Training epochs");
  train_cmd->add_option("--seed", ta.seed, "Shuffle / init seed");
  train_cmd->add_option("--threshold", ta.threshold, "Label threshold for contrastive similarity");
  train_cmd->add_option("--out-dim", ta.out_dim, "Head output dimension (default: input dim)");
  train_cmd->add_option("--out", ta.out, "Model output file");
  train_cmd->add_option("--log", ta.log, "Training log output (default: <out>.log.json)");
  train_cmd->add_option("--pca-out", ta.pca_out, "Also fit and write the 2-D PCA");
  ta.emb.add(train_cmd);

  PcaArgs pa;
  auto* pca_cmd = app.add_subcommand("fit-pca", "Fit the 2-D perspective space on projected texts");
  pca_cmd->add_option("--model", pa.model, "Projection model");
  pca_cmd->add_option("--data", pa.data, "Documents to fit on (JSONL, usually the train split)");
  pca_cmd->add_option("--also", pa.extra, "Additional documents, e.g. the test split");
  pca_cmd->add_option("--out", pa.out, "PCA output file");
  pa.emb.add(pca_cmd);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Cluster-vs-cluster similarity report");
  eval_cmd->add_option("--model", ea.model, "Projection model");
  eval_cmd->add_option("--train", ea.train, "Train split (JSONL)");
  eval_cmd->add_option("--test", ea.test, "Test split (JSONL)");
  eval_cmd->add_option("--out", ea.out, "Report JSON output");
  eval_cmd->add_option("--text-out", ea.text_out, "Text table output (default: <out>.txt)");
  ea.emb.add(eval_cmd);

  OptimizeArgs oa;
  auto* opt_cmd = app.add_subcommand("optimize", "Search prompt phrases toward a target perspective");
  opt_cmd->add_option("--model", oa.model, "Projection model");
  opt_cmd->add_option("--pca", oa.pca, "PCA model");
  opt_cmd->add_option("--prompts", oa.prompts, "Prompt spec (JSON)");
  opt_cmd->add_option("--mode", oa.mode, "Search strategy")->check(CLI::IsMember({"gcd", "brute"}));
  opt_cmd->add_option("--target-x", oa.target_x, "Target PC1 coordinate");
  opt_cmd->add_option("--target-y", oa.target_y, "Target PC2 coordinate");
  opt_cmd->add_option("--target-cluster", oa.target_cluster, "Use this cluster's centroid as target");
  opt_cmd->add_option("--data", oa.data, "Training documents for --target-cluster");
  opt_cmd->add_option("--llm", oa.llm, "LLM backend")->check(CLI::IsMember({"mock", "http"}));
  opt_cmd->add_option("--llm-url", oa.llm_url, "Chat completions endpoint URL (implies --llm http)");
  opt_cmd->add_option("--llm-model", oa.llm_model, "Model name for the chat endpoint");
  opt_cmd->add_option("--mock-table", oa.mock_table, "Prompt -> response table for the mock LLM");
  opt_cmd->add_option("--temperature", oa.temperature, "Sampling temperature");
  opt_cmd->add_option("--samples", oa.samples, "Generations averaged per prompt")
      ->check(CLI::PositiveNumber);
  opt_cmd->add_option("--max-sweeps", oa.max_sweeps, "GCD sweep limit")->check(CLI::PositiveNumber);
  opt_cmd->add_option("--parallel", oa.parallel, "Concurrent prompt evaluations")
      ->check(CLI::PositiveNumber);
  opt_cmd->add_option("--out", oa.out, "Trace output (JSONL)");
  oa.emb.add(opt_cmd);

  PlotArgs pl;
  auto* plot_cmd = app.add_subcommand("plot", "Render dataset clusters and/or a search trace as SVG");
  plot_cmd->add_option("--pca", pl.pca, "PCA model");
  plot_cmd->add_option("--model", pl.model, "Projection model");
  plot_cmd->add_option("--data", pl.data, "Documents to scatter, one color per cluster");
  plot_cmd->add_option("--trace", pl.trace, "Search trace, one color per base phrase");
  plot_cmd->add_option("--title", pl.title, "Plot title");
  plot_cmd->add_option("--out", pl.out, "SVG output");
  pl.emb.add(plot_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train_cmd) return cmd_train(train_cmd, ta, common);
    if (*pca_cmd) return cmd_fit_pca(pca_cmd, pa, common);
    if (*eval_cmd) return cmd_eval(eval_cmd, ea, common);
    if (*opt_cmd) return cmd_optimize(opt_cmd, oa, common);
    if (*plot_cmd) return cmd_plot(plot_cmd, pl, common);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << e.command->help();
    return 2;
  } catch (const pdial::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
