#pragma once

#include "ipr/detector.hpp"
#include "ipr/scenegen.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <string>

namespace ipr::relabel {

using detector::DetectedObject;
using detector::DetectionSet;
using scenegen::Relation;
using scenegen::RelationFamily;
using scenegen::StructuredPrompt;
using scenegen::WorldConfig;

struct RelabelConfig {
  double lambda_relabel = 0.5;
  double tau = 0.0;  // center-difference margin below which a relation is ambiguous

  void validate() const;
  bool operator==(const RelabelConfig&) const = default;
};

/// Multiset key; color = -1 outside color mode.
struct CountKey {
  int category = 0;
  int color = -1;
  auto operator<=>(const CountKey&) const = default;
};

struct CountVerdict {
  std::map<CountKey, int> expected;
  std::map<CountKey, int> observed;
  bool matches = false;
};

/// Compares the prompt's expected object multiset against detections. Keys
/// include colors in color mode; an EmptyScene prompt expects the empty map.
CountVerdict check_counts(const StructuredPrompt& p, const DetectionSet& d,
                          const WorldConfig& world);

/// Relation of A relative to B by bbox centers. cy is measured from the
/// bottom of the unit square, so cy_a > cy_b means Above. nullopt when the
/// center difference along the family axis is within tau (ambiguous).
std::optional<Relation> determine_relation(const DetectedObject& a, const DetectedObject& b,
                                           RelationFamily family, double tau = 0.0);

enum class OutcomeKind { Matched, RelationFix, CountFix, ColorFix, Empty };
std::string outcome_kind_token(OutcomeKind k);

struct RelabelOutcome {
  bool matched = false;
  StructuredPrompt new_prompt;
  double weight = 1.0;
  OutcomeKind kind = OutcomeKind::Matched;
};

/// Hindsight relabeling: matched pairs keep their prompt at weight 1; a wrong
/// relation is corrected within its axis family; a count mismatch (or an
/// ambiguous relation) rewrites to the observed counting prompt; no
/// detections rewrite to an empty-scene prompt. Every rewrite carries
/// lambda_relabel. Total over all prompt kinds, and idempotent against the
/// same detections.
RelabelOutcome relabel(const StructuredPrompt& p, const DetectionSet& d, const RelabelConfig& cfg,
                       const WorldConfig& world);

/// Color-correction step alone (requires color mode and matching category
/// counts); relabel() applies it before relation analysis.
RelabelOutcome relabel_color(const StructuredPrompt& p, const DetectionSet& d,
                             const RelabelConfig& cfg, const WorldConfig& world);

/// One relabel-log record: original prompt, detections digest, outcome.
nlohmann::json outcome_to_json(const StructuredPrompt& original, const DetectionSet& d,
                               const RelabelOutcome& outcome, const WorldConfig& world);

}  // namespace ipr::relabel
