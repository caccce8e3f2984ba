#pragma once

#include "ipr/ddpm.hpp"
#include "ipr/detector.hpp"
#include "ipr/relabel.hpp"
#include "ipr/scenegen.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace ipr::evalkit {

using ddpm::ModelState;
using detector::DetectionSet;
using detector::DetectorConfig;
using scenegen::StructuredPrompt;
using scenegen::WorldConfig;

struct Verdict {
  bool count_ok = false;
  bool relation_ok = false;  // defined only when count_ok
  bool overall = false;
};

/// Correct iff both the object counts and the prompted relation (by bbox
/// centers) are right; an ambiguous relation counts as wrong.
Verdict judge_image(const StructuredPrompt& p, const DetectionSet& d, const WorldConfig& world,
                    double tau = 0.0);

struct SampleRecord {
  int prompt_index = 0;
  int sample_index = 0;
  DetectionSet detections;
  Verdict verdict;
};

struct AccuracyReport {
  std::string split_tag;
  long n_samples = 0;
  long overall_num = 0;
  long left_right_num = 0, left_right_den = 0;
  long above_below_num = 0, above_below_den = 0;
  long count_num = 0;
  double overall = 0.0, left_right = 0.0, above_below = 0.0, object_number = 0.0;
  std::vector<SampleRecord> details;
};

/// Fills the fraction fields from the counters (0 when a denominator is 0).
void finalize_fractions(AccuracyReport& report);

/// Tallies judge_image over samples_per_prompt draws per prompt. Sampling and
/// detection use per-(prompt, sample) substreams labelled
/// eval:<split>:<iteration>:<prompt>:<sample>[:detect].
AccuracyReport spatial_accuracy(const ModelState& model,
                                const std::vector<StructuredPrompt>& prompts,
                                const WorldConfig& world, const DetectorConfig& det_cfg,
                                int samples_per_prompt, SeedLineage& lineage,
                                const std::string& split_tag, int iteration);

/// One JSONL line per sample: prompt index, sample index, detections,
/// verdict. The acceptance recompute reads these back.
void write_detail_jsonl(const std::string& path, const AccuracyReport& report,
                        const WorldConfig& world);
std::vector<SampleRecord> read_detail_jsonl(const std::string& path, const WorldConfig& world);

/// Per-iteration metrics row as persisted in metrics.csv.
struct MetricsRow {
  int iteration = 0;
  std::string split;
  double overall = 0.0, left_right = 0.0, above_below = 0.0, object_number = 0.0;
  double train_loss = 0.0;
  double matched_frac = 0.0;
  long n = 0;
};

/// What compare_runs needs to know about one finished run.
struct RunView {
  std::string method;
  std::uint64_t master_seed = 0;
  nlohmann::json compat;  // prompt-set spec + detector config echo
  std::vector<MetricsRow> rows;

  const MetricsRow& final_row(const std::string& split) const;
};

struct Comparison {
  struct Entry {
    std::string method;
    MetricsRow row;  // final iteration for one split
  };
  std::vector<Entry> rows;
  bool ordering_pass = false;
  std::vector<std::string> ordering_notes;
};

/// Method-by-metric table plus the declared ordering check on train-split
/// overall accuracy: direct <= rldf and direct <= pr <= pr_rldf <= ipr_rldf
/// (pairs with both methods present). Throws ConfigError listing mismatched
/// fields when runs differ in prompt-set spec or detector config.
Comparison compare_runs(const std::vector<RunView>& runs);

std::string comparison_to_csv(const Comparison& c);

}  // namespace ipr::evalkit
