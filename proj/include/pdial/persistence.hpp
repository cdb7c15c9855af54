#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdial/embedding.hpp"
#include "pdial/evaluation.hpp"
#include "pdial/llm.hpp"
#include "pdial/metric.hpp"
#include "pdial/optimizer.hpp"
#include "pdial/pca.hpp"

namespace pdial {

inline constexpr const char* kModelFormat = "pdial-proj-v1";
inline constexpr const char* kPcaFormat = "pdial-pca-v1";

using Warn = std::function<void(const std::string&)>;
/// Writes "warning: <msg>" to stderr.
void warn_stderr(const std::string& msg);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// Parses JSON, converting parse failures to ParseError with 1-based
/// line/column and the source name in the message.
nlohmann::json parse_json(const std::string& text, const std::string& source);
nlohmann::json load_json_file(const std::filesystem::path& path);

// Projection model ----------------------------------------------------------

struct ModelFile {
  ProjectionModel model;
  std::optional<TrainConfig> train_config;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const ProjectionModel& m,
                             const std::optional<TrainConfig>& cfg = std::nullopt);
ModelFile model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const ProjectionModel& m,
                const std::optional<TrainConfig>& cfg = std::nullopt);
ProjectionModel load_model(const std::filesystem::path& path);
ModelFile load_model_file(const std::filesystem::path& path);

// PCA -----------------------------------------------------------------------

nlohmann::json pca_to_json(const PcaModel& m);
PcaModel pca_from_json(const nlohmann::json& j);
void save_pca(const std::filesystem::path& path, const PcaModel& m);
PcaModel load_pca(const std::filesystem::path& path);

// Inputs --------------------------------------------------------------------

/// JSON Lines of {"id", "text", "cluster"}. Blank lines are skipped.
/// Rejects duplicate ids, citing both line numbers.
std::vector<LabeledDocument> parse_dataset(const std::string& text, const std::string& source,
                                           const Warn& warn = warn_stderr);
std::vector<LabeledDocument> load_dataset(const std::filesystem::path& path,
                                          const Warn& warn = warn_stderr);

ClusterSimilarityMatrix matrix_from_json(const nlohmann::json& j);
ClusterSimilarityMatrix load_matrix(const std::filesystem::path& path);

PromptSpec prompt_spec_from_json(const nlohmann::json& j);
nlohmann::json prompt_spec_to_json(const PromptSpec& spec);
PromptSpec load_prompt_spec(const std::filesystem::path& path);

MockTable mock_table_from_json(const nlohmann::json& j);
MockTable load_mock_table(const std::filesystem::path& path);

// Outputs -------------------------------------------------------------------

nlohmann::json report_to_json(const SimilarityReport& r);
SimilarityReport report_from_json(const nlohmann::json& j);

nlohmann::json training_log_to_json(const TrainingLog& log);

struct TraceSummary {
  std::string mode;
  PerspectivePoint target;
  std::vector<std::string> base_phrases;
};

/// One "evaluation" object per line, then one "summary" line.
std::string trace_to_jsonl(const SearchTrace& trace, const TraceSummary& summary);
void save_trace(const std::filesystem::path& path, const SearchTrace& trace,
                const TraceSummary& summary);

struct TraceFile {
  SearchTrace trace;
  TraceSummary summary;
};
TraceFile parse_trace(const std::string& text, const std::string& source);
TraceFile load_trace(const std::filesystem::path& path);

// Run configuration ---------------------------------------------------------

struct RunPaths {
  std::string dataset;
  std::string test_dataset;
  std::string matrix;
  std::string model;
  std::string pca;
  std::string report;
  std::string prompts;
  std::string trace;
};

struct RunConfig {
  EmbeddingBackendConfig embedding;
  LlmBackendConfig llm;
  TrainConfig train;
  RunPaths paths;
};

/// Every section and key is optional; missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace pdial
