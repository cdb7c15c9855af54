#include "pdial/persistence.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "pdial/errors.hpp"

namespace pdial {

using nlohmann::json;

void warn_stderr(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError(source + ":" + std::to_string(line) + ":" + std::to_string(column) +
                         ": malformed JSON: " + e.what(),
                     line, column);
  }
}

json load_json_file(const std::filesystem::path& path) {
  return parse_json(read_text_file(path), path.string());
}

namespace {

// Typed field access that reports the file and key on mismatch.
template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out, const std::string& where) {
  if (j.is_object() && j.contains(key)) out = field<T>(j, key, where);
}

void check_format(const json& j, const char* expected, const std::string& where) {
  const auto tag = field<std::string>(j, "format", where);
  if (tag != expected) {
    throw ConfigError(where + ": format tag '" + tag + "' does not match expected '" + expected +
                      "'");
  }
}

json point_json(const PerspectivePoint& p) { return json::array({p.x, p.y}); }

PerspectivePoint point_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(where + ": expected a point [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw ConfigError(where + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

StatMatrix stat_matrix(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected a matrix");
  StatMatrix m;
  for (const auto& row : j) m.push_back(numbers(row, where));
  return m;
}

}  // namespace

json train_config_to_json(const TrainConfig& cfg) {
  return {{"loss", to_string(cfg.loss)},
          {"margin", cfg.margin},
          {"learning_rate", cfg.learning_rate},
          {"epochs", cfg.epochs},
          {"seed", cfg.seed},
          {"binarize_threshold", cfg.binarize_threshold},
          {"output_dim", cfg.output_dim}};
}

TrainConfig train_config_from_json(const json& j) {
  const std::string where = "train_config";
  TrainConfig cfg;
  if (j.contains("loss")) cfg.loss = loss_kind_from_string(field<std::string>(j, "loss", where));
  maybe(j, "margin", cfg.margin, where);
  maybe(j, "learning_rate", cfg.learning_rate, where);
  maybe(j, "epochs", cfg.epochs, where);
  maybe(j, "seed", cfg.seed, where);
  maybe(j, "binarize_threshold", cfg.binarize_threshold, where);
  maybe(j, "output_dim", cfg.output_dim, where);
  return cfg;
}

json model_to_json(const ProjectionModel& m, const std::optional<TrainConfig>& cfg) {
  m.validate();
  json j = {{"format", kModelFormat},
            {"d_in", m.d_in},
            {"d_out", m.d_out},
            {"w_row_major", m.weights.data()}};
  if (cfg) j["train_config"] = train_config_to_json(*cfg);
  return j;
}

ModelFile model_from_json(const json& j) {
  const std::string where = "model";
  check_format(j, kModelFormat, where);
  ModelFile f;
  f.model.d_in = field<std::size_t>(j, "d_in", where);
  f.model.d_out = field<std::size_t>(j, "d_out", where);
  if (!j.contains("w_row_major")) throw ConfigError(where + ": missing field 'w_row_major'");
  auto w = numbers(j["w_row_major"], where + ".w_row_major");
  if (w.size() != f.model.d_in * f.model.d_out) {
    throw ConfigError(where + ": w_row_major has " + std::to_string(w.size()) +
                      " entries, expected d_out * d_in = " +
                      std::to_string(f.model.d_in * f.model.d_out));
  }
  f.model.weights = Matrix(f.model.d_out, f.model.d_in, std::move(w));
  f.model.validate();
  if (j.contains("train_config")) f.train_config = train_config_from_json(j["train_config"]);
  return f;
}

void save_model(const std::filesystem::path& path, const ProjectionModel& m,
                const std::optional<TrainConfig>& cfg) {
  write_text_file(path, model_to_json(m, cfg).dump() + "\n");
}

ModelFile load_model_file(const std::filesystem::path& path) {
  try {
    return model_from_json(load_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ProjectionModel load_model(const std::filesystem::path& path) { return load_model_file(path).model; }

json pca_to_json(const PcaModel& m) {
  json comps = json::array();
  for (std::size_t r = 0; r < m.components.rows(); ++r) {
    const auto row = m.components.row(r);
    comps.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"format", kPcaFormat},
          {"mean", m.mean},
          {"components", comps},
          {"explained_variance", m.explained_variance}};
}

PcaModel pca_from_json(const json& j) {
  const std::string where = "pca";
  check_format(j, kPcaFormat, where);
  PcaModel m;
  if (!j.contains("mean")) throw ConfigError(where + ": missing field 'mean'");
  m.mean = numbers(j["mean"], where + ".mean");
  if (!j.contains("components") || !j["components"].is_array()) {
    throw ConfigError(where + ": missing field 'components'");
  }
  const auto& comps = j["components"];
  std::vector<double> flat;
  for (const auto& row : comps) {
    const auto r = numbers(row, where + ".components");
    if (r.size() != m.mean.size()) {
      throw ConfigError(where + ": component length does not match the mean");
    }
    flat.insert(flat.end(), r.begin(), r.end());
  }
  m.components = Matrix(comps.size(), m.mean.size(), std::move(flat));
  if (!j.contains("explained_variance")) {
    throw ConfigError(where + ": missing field 'explained_variance'");
  }
  m.explained_variance = numbers(j["explained_variance"], where + ".explained_variance");
  if (m.explained_variance.size() != m.components.rows()) {
    throw ConfigError(where + ": explained_variance length does not match components");
  }
  return m;
}

void save_pca(const std::filesystem::path& path, const PcaModel& m) {
  write_text_file(path, pca_to_json(m).dump() + "\n");
}

PcaModel load_pca(const std::filesystem::path& path) {
  try {
    return pca_from_json(load_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<LabeledDocument> parse_dataset(const std::string& text, const std::string& source,
                                           const Warn& warn) {
  std::vector<LabeledDocument> docs;
  std::map<std::string, std::size_t> first_line;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      const std::size_t column = e.byte == 0 ? 1 : e.byte;
      throw ParseError(source + ":" + std::to_string(line_no) + ":" + std::to_string(column) +
                           ": malformed JSON: " + e.what(),
                       line_no, column);
    }
    const std::string where = source + ":" + std::to_string(line_no);
    LabeledDocument d{field<std::string>(j, "id", where), field<std::string>(j, "text", where),
                      field<std::string>(j, "cluster", where)};
    if (d.id.empty()) throw ConfigError(where + ": empty id");
    if (d.text.find_first_not_of(" \t\n\r") == std::string::npos) {
      throw ConfigError(where + ": document '" + d.id + "' has empty text");
    }
    if (d.cluster.empty()) throw ConfigError(where + ": document '" + d.id + "' has empty cluster");
    if (auto [it, inserted] = first_line.emplace(d.id, line_no); !inserted) {
      throw ConfigError(source + ": duplicate id '" + d.id + "' on lines " +
                        std::to_string(it->second) + " and " + std::to_string(line_no));
    }
    docs.push_back(std::move(d));
  }
  if (docs.empty() && warn) warn(source + ": dataset is empty");
  return docs;
}

std::vector<LabeledDocument> load_dataset(const std::filesystem::path& path, const Warn& warn) {
  return parse_dataset(read_text_file(path), path.string(), warn);
}

ClusterSimilarityMatrix matrix_from_json(const json& j) {
  const std::string where = "cluster matrix";
  auto clusters = field<std::vector<std::string>>(j, "clusters", where);
  auto sim = field<std::vector<std::vector<double>>>(j, "sim", where);
  return ClusterSimilarityMatrix(std::move(clusters), std::move(sim));
}

ClusterSimilarityMatrix load_matrix(const std::filesystem::path& path) {
  try {
    return matrix_from_json(load_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

PromptSpec prompt_spec_from_json(const json& j) {
  const std::string where = "prompt spec";
  PromptSpec spec;
  spec.base_phrases = field<std::vector<std::string>>(j, "base_phrases", where);
  maybe(j, "slots", spec.slots, where);
  maybe(j, "joiner", spec.joiner, where);
  try {
    spec.validate();
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

json prompt_spec_to_json(const PromptSpec& spec) {
  return {{"base_phrases", spec.base_phrases}, {"slots", spec.slots}, {"joiner", spec.joiner}};
}

PromptSpec load_prompt_spec(const std::filesystem::path& path) {
  try {
    return prompt_spec_from_json(load_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

MockTable mock_table_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("mock table must be a JSON object of prompt -> response");
  MockTable t;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw ConfigError("mock table entry '" + k + "' is not a string");
    t.emplace(k, v.get<std::string>());
  }
  return t;
}

MockTable load_mock_table(const std::filesystem::path& path) {
  try {
    return mock_table_from_json(load_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json report_to_json(const SimilarityReport& r) {
  return {{"clusters", r.clusters},
          {"test_clusters", r.test_clusters},
          {"std_kind", "population"},
          {"pre", {{"mean", r.pre_mean}, {"std", r.pre_std}}},
          {"post", {{"mean", r.post_mean}, {"std", r.post_std}}}};
}

SimilarityReport report_from_json(const json& j) {
  const std::string where = "report";
  SimilarityReport r;
  r.clusters = field<std::vector<std::string>>(j, "clusters", where);
  r.test_clusters = r.clusters;
  maybe(j, "test_clusters", r.test_clusters, where);
  const auto pre = field<json>(j, "pre", where);
  const auto post = field<json>(j, "post", where);
  r.pre_mean = stat_matrix(field<json>(pre, "mean", where), where);
  r.pre_std = stat_matrix(field<json>(pre, "std", where), where);
  r.post_mean = stat_matrix(field<json>(post, "mean", where), where);
  r.post_std = stat_matrix(field<json>(post, "std", where), where);
  return r;
}

json training_log_to_json(const TrainingLog& log) {
  json epochs = json::array();
  for (const auto& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"mean_loss", e.mean_loss},
                      {"pairs_used", e.pairs_used},
                      {"pairs_skipped", e.pairs_skipped}});
  }
  return {{"pair_count", log.pair_count},
          {"skipped_pairs", log.total_skipped()},
          {"epochs", epochs}};
}

std::string trace_to_jsonl(const SearchTrace& trace, const TraceSummary& summary) {
  std::string out;
  const auto best_so_far = trace.best_so_far();
  for (std::size_t i = 0; i < trace.evaluations.size(); ++i) {
    const auto& e = trace.evaluations[i];
    json line = {{"type", "evaluation"},
                 {"index", i},
                 {"base_index", e.assignment.base_index},
                 {"choices", e.assignment.choices},
                 {"prompt", e.prompt},
                 {"outputs", e.outputs},
                 {"point", point_json(e.point)},
                 {"loss", e.loss},
                 {"best_so_far", best_so_far[i]}};
    out += line.dump();
    out += '\n';
  }
  json s = {{"type", "summary"},
            {"mode", summary.mode},
            {"target", point_json(summary.target)},
            {"base_phrases", summary.base_phrases},
            {"evaluations", trace.evaluations.size()},
            {"best", trace.best},
            {"sweeps", trace.sweeps},
            {"converged", trace.converged}};
  if (!trace.evaluations.empty()) {
    s["best_prompt"] = trace.best_evaluation().prompt;
    s["best_loss"] = trace.best_evaluation().loss;
    s["best_point"] = point_json(trace.best_evaluation().point);
  }
  out += s.dump();
  out += '\n';
  return out;
}

void save_trace(const std::filesystem::path& path, const SearchTrace& trace,
                const TraceSummary& summary) {
  write_text_file(path, trace_to_jsonl(trace, summary));
}

TraceFile parse_trace(const std::string& text, const std::string& source) {
  TraceFile f;
  bool have_summary = false;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const json j = parse_json(line, where);
    const auto type = field<std::string>(j, "type", where);
    if (type == "evaluation") {
      Evaluation e;
      e.assignment.base_index = field<std::size_t>(j, "base_index", where);
      e.assignment.choices = field<std::vector<std::size_t>>(j, "choices", where);
      e.prompt = field<std::string>(j, "prompt", where);
      e.outputs = field<std::vector<std::string>>(j, "outputs", where);
      e.point = point_from(field<json>(j, "point", where), where);
      e.loss = field<double>(j, "loss", where);
      f.trace.evaluations.push_back(std::move(e));
    } else if (type == "summary") {
      have_summary = true;
      f.summary.mode = field<std::string>(j, "mode", where);
      f.summary.target = point_from(field<json>(j, "target", where), where);
      maybe(j, "base_phrases", f.summary.base_phrases, where);
      f.trace.best = field<std::size_t>(j, "best", where);
      maybe(j, "sweeps", f.trace.sweeps, where);
      maybe(j, "converged", f.trace.converged, where);
    } else {
      throw ConfigError(where + ": unknown record type '" + type + "'");
    }
  }
  if (!have_summary) throw ConfigError(source + ": trace has no summary line");
  if (!f.trace.evaluations.empty() && f.trace.best >= f.trace.evaluations.size()) {
    throw ConfigError(source + ": summary best index is out of range");
  }
  return f;
}

TraceFile load_trace(const std::filesystem::path& path) {
  return parse_trace(read_text_file(path), path.string());
}

RunConfig run_config_from_json(const json& j) {
  RunConfig rc;
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  if (j.contains("embedding")) {
    const auto& e = j["embedding"];
    const std::string where = "run config embedding";
    if (e.contains("kind")) {
      const auto k = field<std::string>(e, "kind", where);
      if (k == "hashed") rc.embedding.kind = EmbeddingBackendKind::hashed;
      else if (k == "http") rc.embedding.kind = EmbeddingBackendKind::http;
      else throw ConfigError(where + ": unknown kind '" + k + "'");
    }
    maybe(e, "endpoint_url", rc.embedding.endpoint_url, where);
    maybe(e, "model_name", rc.embedding.model_name, where);
    maybe(e, "dimension", rc.embedding.dimension, where);
    maybe(e, "batch_size", rc.embedding.batch_size, where);
    maybe(e, "max_in_flight", rc.embedding.max_in_flight, where);
    if (e.contains("timeout_s")) {
      rc.embedding.timeout = std::chrono::duration<double>(field<double>(e, "timeout_s", where));
    }
  }
  if (j.contains("llm")) {
    const auto& l = j["llm"];
    const std::string where = "run config llm";
    if (l.contains("kind")) {
      const auto k = field<std::string>(l, "kind", where);
      if (k == "mock") rc.llm.kind = LlmBackendKind::mock;
      else if (k == "http") rc.llm.kind = LlmBackendKind::http;
      else throw ConfigError(where + ": unknown kind '" + k + "'");
    }
    maybe(l, "endpoint_url", rc.llm.endpoint_url, where);
    maybe(l, "model_name", rc.llm.model_name, where);
    maybe(l, "temperature", rc.llm.temperature, where);
    maybe(l, "samples_n", rc.llm.samples_n, where);
    maybe(l, "mock_table_path", rc.llm.mock_table_path, where);
    maybe(l, "max_attempts", rc.llm.max_attempts, where);
    maybe(l, "max_in_flight", rc.llm.max_in_flight, where);
    if (l.contains("timeout_s")) {
      rc.llm.timeout = std::chrono::duration<double>(field<double>(l, "timeout_s", where));
    }
    if (l.contains("initial_backoff_s")) {
      rc.llm.initial_backoff =
          std::chrono::duration<double>(field<double>(l, "initial_backoff_s", where));
    }
  }
  if (j.contains("train")) rc.train = train_config_from_json(j["train"]);
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    const std::string where = "run config paths";
    maybe(p, "dataset", rc.paths.dataset, where);
    maybe(p, "test_dataset", rc.paths.test_dataset, where);
    maybe(p, "matrix", rc.paths.matrix, where);
    maybe(p, "model", rc.paths.model, where);
    maybe(p, "pca", rc.paths.pca, where);
    maybe(p, "report", rc.paths.report, where);
    maybe(p, "prompts", rc.paths.prompts, where);
    maybe(p, "trace", rc.paths.trace, where);
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(load_json_file(path));
}

}  // namespace pdial
