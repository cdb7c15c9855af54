#include "pdial/optimizer.hpp"

#include <cmath>
#include <future>
#include <limits>
#include <map>

#include "pdial/errors.hpp"

namespace pdial {

void PromptSpec::validate() const {
  if (base_phrases.empty()) throw InputError("prompt spec needs at least one base phrase");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].empty()) {
      throw InputError("prompt spec slot " + std::to_string(i) + " has no candidates");
    }
  }
}

std::size_t PromptSpec::combination_count() const {
  std::size_t n = base_phrases.size();
  for (const auto& s : slots) {
    if (s.empty()) return 0;
    if (n > std::numeric_limits<std::size_t>::max() / s.size()) {
      return std::numeric_limits<std::size_t>::max();
    }
    n *= s.size();
  }
  return n;
}

std::vector<std::string> PromptSpec::all_phrases() const {
  std::vector<std::string> out = base_phrases;
  for (const auto& s : slots) {
    for (const auto& c : s) {
      if (!c.empty()) out.push_back(c);
    }
  }
  return out;
}

std::vector<double> SearchTrace::best_so_far() const {
  std::vector<double> out;
  out.reserve(evaluations.size());
  double best_loss = std::numeric_limits<double>::infinity();
  for (const auto& e : evaluations) {
    best_loss = std::min(best_loss, e.loss);
    out.push_back(best_loss);
  }
  return out;
}

std::string render_prompt(const PromptSpec& spec, const PromptAssignment& a) {
  if (a.base_index >= spec.base_phrases.size()) {
    throw InputError("base index " + std::to_string(a.base_index) + " is out of range");
  }
  if (a.choices.size() != spec.slots.size()) {
    throw InputError("assignment has " + std::to_string(a.choices.size()) + " choices for " +
                     std::to_string(spec.slots.size()) + " slots");
  }
  std::string out = spec.base_phrases[a.base_index];
  for (std::size_t i = 0; i < a.choices.size(); ++i) {
    if (a.choices[i] >= spec.slots[i].size()) {
      throw InputError("slot " + std::to_string(i) + " choice " + std::to_string(a.choices[i]) +
                       " is out of range");
    }
    const auto& phrase = spec.slots[i][a.choices[i]];
    if (phrase.empty()) continue;
    if (out.empty()) {
      out = phrase;
    } else {
      out += spec.joiner;
      out += phrase;
    }
  }
  return out;
}

double loss_to_target(const PerspectivePoint& p, const PerspectivePoint& target) {
  return std::hypot(p.x - target.x, p.y - target.y);
}

PerspectivePoint perspective_of_output(const std::string& text, const ProjectionModel& proj,
                                       const PcaModel& pca, const Embedder& embedder) {
  return pca_transform(pca, project(proj, embedder.embed(text)));
}

PerspectiveFn make_perspective_fn(const Embedder& embedder, const ProjectionModel& proj,
                                  const PcaModel& pca) {
  return [&embedder, &proj, &pca](const std::vector<std::string>& outputs) {
    const auto base = embedder.embed_batch(outputs);
    PerspectivePoint mean;
    for (const auto& e : base) {
      const auto p = pca_transform(pca, project(proj, e));
      mean.x += p.x;
      mean.y += p.y;
    }
    mean.x /= static_cast<double>(base.size());
    mean.y /= static_cast<double>(base.size());
    return mean;
  };
}

namespace {

class Evaluator {
 public:
  Evaluator(const PromptSpec& spec, const PerspectivePoint& target, const LlmClient& llm,
            const PerspectiveFn& measure, const SearchOptions& opts)
      : spec_(spec), target_(target), llm_(llm), measure_(measure), opts_(opts) {}

  /// Losses of the given assignments, evaluating unseen prompts (possibly
  /// concurrently) and appending them to the trace in input order.
  std::vector<double> losses(const std::vector<PromptAssignment>& batch) {
    std::vector<std::string> prompts;
    prompts.reserve(batch.size());
    for (const auto& a : batch) prompts.push_back(render_prompt(spec_, a));

    std::vector<std::size_t> fresh;
    std::map<std::string, std::size_t> pending;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (memo_.contains(prompts[i]) || pending.contains(prompts[i])) continue;
      pending.emplace(prompts[i], i);
      fresh.push_back(i);
    }

    std::vector<Evaluation> results(fresh.size());
    const std::size_t width = std::max<std::size_t>(1, opts_.parallelism);
    for (std::size_t start = 0; start < fresh.size(); start += width) {
      const std::size_t end = std::min(fresh.size(), start + width);
      if (width == 1) {
        results[start] = evaluate(batch[fresh[start]], prompts[fresh[start]]);
        continue;
      }
      std::vector<std::future<Evaluation>> futures;
      for (std::size_t k = start; k < end; ++k) {
        futures.push_back(std::async(std::launch::async, [this, &batch, &prompts, &fresh, k] {
          return evaluate(batch[fresh[k]], prompts[fresh[k]]);
        }));
      }
      std::exception_ptr error;
      for (std::size_t k = start; k < end; ++k) {
        try {
          results[k] = futures[k - start].get();
        } catch (...) {
          if (!error) error = std::current_exception();
        }
      }
      if (error) std::rethrow_exception(error);
    }

    for (auto& r : results) commit(std::move(r));

    std::vector<double> out;
    out.reserve(batch.size());
    for (const auto& p : prompts) out.push_back(trace_.evaluations[memo_.at(p)].loss);
    return out;
  }

  SearchTrace take() && { return std::move(trace_); }

 private:
  Evaluation evaluate(const PromptAssignment& a, const std::string& prompt) const {
    Evaluation e{a, prompt, llm_.complete(prompt), {}, 0.0};
    e.point = measure_(e.outputs);
    e.loss = loss_to_target(e.point, target_);
    if (!std::isfinite(e.loss)) {
      throw NumericError("non-finite perspective loss for prompt '" + prompt + "'");
    }
    return e;
  }

  void commit(Evaluation e) {
    const std::size_t idx = trace_.evaluations.size();
    memo_.emplace(e.prompt, idx);
    if (idx == 0 || e.loss < trace_.evaluations[trace_.best].loss) trace_.best = idx;
    trace_.evaluations.push_back(std::move(e));
  }

  const PromptSpec& spec_;
  PerspectivePoint target_;
  const LlmClient& llm_;
  const PerspectiveFn& measure_;
  SearchOptions opts_;
  SearchTrace trace_;
  std::map<std::string, std::size_t> memo_;
};

// Odometer increment: last slot fastest, base index slowest.
void advance(const PromptSpec& spec, PromptAssignment& a) {
  for (std::size_t k = spec.slots.size(); k-- > 0;) {
    if (++a.choices[k] < spec.slots[k].size()) return;
    a.choices[k] = 0;
  }
  ++a.base_index;
}

void check_target(const PerspectivePoint& target) {
  if (!std::isfinite(target.x) || !std::isfinite(target.y)) {
    throw InputError("target point must be finite");
  }
}

}  // namespace

SearchTrace brute_force_search(const PromptSpec& spec, const PerspectivePoint& target,
                               const LlmClient& llm, const PerspectiveFn& measure,
                               const SearchOptions& opts) {
  spec.validate();
  check_target(target);
  if (spec.slots.size() > kMaxBruteForceSlots) {
    throw ConfigError("brute force supports at most " + std::to_string(kMaxBruteForceSlots) +
                      " slots, spec has " + std::to_string(spec.slots.size()));
  }
  const std::size_t total = spec.combination_count();
  if (total > kMaxBruteForceCombinations) {
    throw ConfigError("brute force would evaluate " + std::to_string(total) +
                      " prompts, above the limit of " + std::to_string(kMaxBruteForceCombinations));
  }

  std::vector<PromptAssignment> all;
  all.reserve(total);
  PromptAssignment a{0, std::vector<std::size_t>(spec.slots.size(), 0)};
  for (std::size_t n = 0; n < total; ++n) {
    all.push_back(a);
    advance(spec, a);
  }

  Evaluator eval(spec, target, llm, measure, opts);
  // Distinct assignments may render the same prompt (empty candidates); the
  // memo then shares one evaluation between them.
  eval.losses(all);
  return std::move(eval).take();
}

SearchTrace gcd_search(const PromptSpec& spec, const PerspectivePoint& target,
                       const LlmClient& llm, const PerspectiveFn& measure,
                       const SearchOptions& opts) {
  spec.validate();
  check_target(target);
  if (opts.max_sweeps < 1) throw ConfigError("gcd max_sweeps must be >= 1");

  Evaluator eval(spec, target, llm, measure, opts);
  PromptAssignment current{0, std::vector<std::size_t>(spec.slots.size(), 0)};
  const std::size_t coords = spec.slots.size() + 1;

  std::size_t sweeps = 0;
  bool changed = true;
  while (changed && sweeps < opts.max_sweeps) {
    changed = false;
    for (std::size_t c = 0; c < coords; ++c) {
      const std::size_t n = c == 0 ? spec.base_phrases.size() : spec.slots[c - 1].size();
      std::vector<PromptAssignment> candidates(n, current);
      for (std::size_t i = 0; i < n; ++i) {
        if (c == 0) {
          candidates[i].base_index = i;
        } else {
          candidates[i].choices[c - 1] = i;
        }
      }
      const auto losses = eval.losses(candidates);
      std::size_t arg = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (losses[i] < losses[arg]) arg = i;
      }
      const std::size_t old = c == 0 ? current.base_index : current.choices[c - 1];
      // Keep the current choice when it ties with the lowest-index minimum.
      if (arg != old && losses[old] > losses[arg]) {
        current = candidates[arg];
        changed = true;
      }
    }
    ++sweeps;
  }

  auto trace = std::move(eval).take();
  trace.sweeps = sweeps;
  trace.converged = !changed;
  return trace;
}

SearchTrace brute_force_search(const PromptSpec& spec, const PerspectivePoint& target,
                               const ProjectionModel& proj, const PcaModel& pca,
                               const LlmBackendConfig& llm_cfg,
                               const EmbeddingBackendConfig& backend_cfg) {
  const auto embedder = make_embedder(backend_cfg);
  const auto llm = make_llm(llm_cfg, spec.all_phrases());
  return brute_force_search(spec, target, *llm, make_perspective_fn(*embedder, proj, pca));
}

SearchTrace gcd_search(const PromptSpec& spec, const PerspectivePoint& target,
                       const ProjectionModel& proj, const PcaModel& pca,
                       const LlmBackendConfig& llm_cfg, const EmbeddingBackendConfig& backend_cfg,
                       std::size_t max_sweeps) {
  const auto embedder = make_embedder(backend_cfg);
  const auto llm = make_llm(llm_cfg, spec.all_phrases());
  SearchOptions opts;
  opts.max_sweeps = max_sweeps;
  return gcd_search(spec, target, *llm, make_perspective_fn(*embedder, proj, pca), opts);
}

PerspectivePoint cluster_centroid(const std::string& cluster,
                                  std::span<const LabeledDocument> docs,
                                  const ProjectionModel& proj, const PcaModel& pca,
                                  const Embedder& embedder) {
  std::vector<std::string> texts;
  for (const auto& d : docs) {
    if (d.cluster == cluster) texts.push_back(d.text);
  }
  if (texts.empty()) throw InputError("no documents belong to target cluster '" + cluster + "'");
  const auto base = embedder.embed_batch(texts);
  PerspectivePoint c;
  for (const auto& e : base) {
    const auto p = pca_transform(pca, project(proj, e));
    c.x += p.x;
    c.y += p.y;
  }
  c.x /= static_cast<double>(base.size());
  c.y /= static_cast<double>(base.size());
  return c;
}

}  // namespace pdial
