#pragma once

#include "ipr/config.hpp"
#include "ipr/ddpm.hpp"
#include "ipr/evalkit.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <vector>

namespace ipr::trainloop {

using config::ExperimentConfig;
using config::Method;
using ddpm::ModelState;
using ddpm::TrainingExample;
using scenegen::StructuredPrompt;

struct ProvenanceCounts {
  long matched = 0;
  long relation_fix = 0;
  long count_fix = 0;
  long color_fix = 0;
  long empty = 0;
  long total() const { return matched + relation_fix + count_fix + color_fix + empty; }
};

struct IterationDataset {
  std::vector<TrainingExample> examples;
  ProvenanceCounts prov;
  std::vector<nlohmann::json> relabel_log;
};

struct IterationMetrics {
  int iteration = 0;
  evalkit::AccuracyReport train_eval;
  evalkit::AccuracyReport unseen_eval;
  double train_loss = 0.0;   // mean batch loss of the final epoch; NaN for untrained rows
  double matched_frac = 0.0; // NaN for untrained rows
  ProvenanceCounts prov;
  bool overfit_flagged = false;
  int growth_added = 0;
};

struct RunResult {
  ExperimentConfig cfg;  // effective config echo (method override applied)
  Method method = Method::Direct;
  std::vector<IterationMetrics> iterations;
  std::vector<ModelState> iteration_states;  // one per training iteration
  ModelState final_state;
  std::vector<std::string> lineage_labels;
  std::vector<nlohmann::json> relabel_log;
};

/// Freshly initialized denoiser (substream "model:init"), no training.
ModelState init_untrained(const ExperimentConfig& cfg, SeedLineage& lineage);

/// Trains the denoiser on synthetic scenes with weak spatial grounding
/// (p_align); substreams "pretrain:data" and "pretrain:train". Throws
/// DivergenceError on non-finite loss.
ModelState pretrain_base(const ExperimentConfig& cfg, SeedLineage& lineage);

/// Samples one latent per example (prompts cycled round-robin), detects, and
/// applies the method's relabel/weight semantics:
///   pr       relabeled prompts, every weight 1
///   rldf     original prompts, weight 1 if matched else lambda_relabel
///   pr_rldf / ipr_rldf  relabeled prompts with RelabelOutcome weights
IterationDataset build_iteration_dataset(const ModelState& model,
                                         const std::vector<StructuredPrompt>& prompts,
                                         Method method, const ExperimentConfig& cfg,
                                         SeedLineage& lineage, int iteration);

/// epochs_per_iter passes of shuffled minibatches (weighted loss + Adam);
/// returns the mean batch loss of the final epoch. The optimizer is reset by
/// the caller per training phase. epoch_losses, when given, receives the mean
/// batch loss of every epoch.
double train_iteration(ModelState& model, std::span<const TrainingExample> examples,
                       const ExperimentConfig& cfg, SeedLineage& lineage, int iteration,
                       std::vector<double>* epoch_losses = nullptr);

struct GrowthDecision {
  bool overfit = false;
};

/// Overfitting flag: train loss decreased while unseen-split accuracy dropped
/// by more than 2 percentage points, iteration over iteration.
GrowthDecision overfit_guard(const std::vector<IterationMetrics>& history);

/// Full Alg-style run: direct evaluates the base; pr/rldf/pr_rldf run one
/// iteration; ipr_rldf runs cfg.train.iterations, resampling from the updated
/// model each time (or accumulating datasets when configured). Both splits
/// are evaluated after every iteration.
RunResult run_method(const ModelState& base, const ExperimentConfig& cfg, Method method,
                     SeedLineage& lineage);

/// Directory layout: config.json, metrics.csv, relabel_log.jsonl,
/// lineage.json, eval_detail_<split>_iter<k>.jsonl, model_iter<k>.bin(+.json),
/// model_final.bin(+.json).
void persist_run(const std::string& dir, const RunResult& result);

std::string metrics_csv(const RunResult& result);
evalkit::RunView view_of(const RunResult& result);
evalkit::RunView load_run_view(const std::string& dir);

}  // namespace ipr::trainloop
