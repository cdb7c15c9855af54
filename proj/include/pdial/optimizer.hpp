#pragma once

#include <compare>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pdial/embedding.hpp"
#include "pdial/llm.hpp"
#include "pdial/metric.hpp"
#include "pdial/pca.hpp"

namespace pdial {

inline constexpr std::size_t kMaxBruteForceSlots = 8;
inline constexpr std::size_t kMaxBruteForceCombinations = 10'000;

/// Query = base phrase followed by one candidate from each slot. Slot
/// candidates may be the empty string, which is elided when rendering.
struct PromptSpec {
  std::vector<std::string> base_phrases;
  std::vector<std::vector<std::string>> slots;
  std::string joiner = " ";

  void validate() const;
  /// Product of all candidate counts, saturating at SIZE_MAX.
  std::size_t combination_count() const;
  /// Every base phrase and non-empty candidate.
  std::vector<std::string> all_phrases() const;
};

struct PromptAssignment {
  std::size_t base_index = 0;
  std::vector<std::size_t> choices;
  auto operator<=>(const PromptAssignment&) const = default;
};

struct Evaluation {
  PromptAssignment assignment;
  std::string prompt;
  std::vector<std::string> outputs;
  PerspectivePoint point;
  double loss = 0.0;
};

struct SearchTrace {
  std::vector<Evaluation> evaluations;
  std::size_t best = 0;
  std::size_t sweeps = 0;    // gcd only
  bool converged = true;     // gcd: false when max_sweeps was hit with changes pending

  const Evaluation& best_evaluation() const { return evaluations.at(best); }
  /// Running minimum of the loss over evaluation order.
  std::vector<double> best_so_far() const;
};

/// Maps the generated outputs of one prompt to a point in perspective space.
using PerspectiveFn = std::function<PerspectivePoint(const std::vector<std::string>& outputs)>;

struct SearchOptions {
  /// Prompts evaluated concurrently inside one batch (brute force chunk or
  /// GCD coordinate). Results are committed in candidate order regardless.
  std::size_t parallelism = 1;
  std::size_t max_sweeps = 10;
};

std::string render_prompt(const PromptSpec& spec, const PromptAssignment& a);

double loss_to_target(const PerspectivePoint& p, const PerspectivePoint& target);

PerspectivePoint perspective_of_output(const std::string& text, const ProjectionModel& proj,
                                       const PcaModel& pca, const Embedder& embedder);

/// Mean perspective point over the given outputs.
PerspectiveFn make_perspective_fn(const Embedder& embedder, const ProjectionModel& proj,
                                  const PcaModel& pca);

/// Every assignment once, base index major, last slot fastest.
/// Throws ConfigError before any LLM call when the guard is exceeded.
SearchTrace brute_force_search(const PromptSpec& spec, const PerspectivePoint& target,
                               const LlmClient& llm, const PerspectiveFn& measure,
                               const SearchOptions& opts = {});

/// Greedy coordinate descent from (0, all 0): coordinate 0 is the base
/// phrase, then slots left to right. Each coordinate adopts the lowest-index
/// argmin. Stops after a sweep without change or after max_sweeps. Prompts
/// are memoized on their rendered text, so the trace holds each once.
SearchTrace gcd_search(const PromptSpec& spec, const PerspectivePoint& target,
                       const LlmClient& llm, const PerspectiveFn& measure,
                       const SearchOptions& opts = {});

SearchTrace brute_force_search(const PromptSpec& spec, const PerspectivePoint& target,
                               const ProjectionModel& proj, const PcaModel& pca,
                               const LlmBackendConfig& llm_cfg,
                               const EmbeddingBackendConfig& backend_cfg);

SearchTrace gcd_search(const PromptSpec& spec, const PerspectivePoint& target,
                       const ProjectionModel& proj, const PcaModel& pca,
                       const LlmBackendConfig& llm_cfg, const EmbeddingBackendConfig& backend_cfg,
                       std::size_t max_sweeps = 10);

/// Mean PCA-space point of one cluster's documents.
PerspectivePoint cluster_centroid(const std::string& cluster,
                                  std::span<const LabeledDocument> docs,
                                  const ProjectionModel& proj, const PcaModel& pca,
                                  const Embedder& embedder);

}  // namespace pdial
