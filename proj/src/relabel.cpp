#include "ipr/relabel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace ipr::relabel {
namespace {

using scenegen::CountEntry;
using scenegen::CountingPrompt;
using scenegen::EmptyScenePrompt;
using scenegen::RelationalPrompt;

std::map<int, int> category_counts(const DetectionSet& d) {
  std::map<int, int> m;
  for (const auto& obj : d.objects) m[obj.category] += 1;
  return m;
}

/// Observed multiset as a counting prompt, ordered by descending count then
/// category index.
StructuredPrompt counting_of_observed(const DetectionSet& d, int template_id) {
  const std::map<int, int> counts = category_counts(d);
  std::vector<CountEntry> entries;
  entries.reserve(counts.size());
  for (const auto& [cat, count] : counts) entries.push_back(CountEntry{count, cat});
  std::stable_sort(entries.begin(), entries.end(), [](const CountEntry& a, const CountEntry& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.category < b.category;
  });
  return StructuredPrompt{CountingPrompt{std::move(entries)}, template_id};
}

const DetectedObject* find_category(const DetectionSet& d, int category) {
  for (const auto& obj : d.objects)
    if (obj.category == category) return &obj;
  return nullptr;
}

}  // namespace

void RelabelConfig::validate() const {
  if (!(lambda_relabel >= 0.0 && lambda_relabel <= 1.0))
    throw ConfigError("relabel.lambda_relabel must lie in [0,1]");
  if (!(tau >= 0.0 && tau < 1.0)) throw ConfigError("relabel.tau must lie in [0,1)");
}

CountVerdict check_counts(const StructuredPrompt& p, const DetectionSet& d,
                          const WorldConfig& world) {
  // Relational prompts in color mode specify colored subjects, so the
  // multiset keys carry colors there; counting prompts only name categories.
  const bool color_keys = world.color_mode && p.is_relational();

  CountVerdict v;
  if (p.is_relational()) {
    const RelationalPrompt& r = p.relational();
    v.expected[CountKey{r.subject_a, color_keys ? r.color_a.value_or(-1) : -1}] += 1;
    v.expected[CountKey{r.subject_b, color_keys ? r.color_b.value_or(-1) : -1}] += 1;
  } else if (p.is_counting()) {
    for (const CountEntry& e : p.counting().entries) v.expected[CountKey{e.category, -1}] += e.count;
  }
  for (const auto& obj : d.objects)
    v.observed[CountKey{obj.category, color_keys ? obj.color.value_or(-1) : -1}] += 1;
  v.matches = v.expected == v.observed;
  return v;
}

std::optional<Relation> determine_relation(const DetectedObject& a, const DetectedObject& b,
                                           RelationFamily family, double tau) {
  if (family == RelationFamily::Horizontal) {
    if (std::abs(a.cx - b.cx) <= tau) return std::nullopt;
    return a.cx < b.cx ? Relation::LeftOf : Relation::RightOf;
  }
  if (std::abs(a.cy - b.cy) <= tau) return std::nullopt;
  return a.cy > b.cy ? Relation::Above : Relation::Below;
}

std::string outcome_kind_token(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Matched: return "matched";
    case OutcomeKind::RelationFix: return "relation-fix";
    case OutcomeKind::CountFix: return "count-fix";
    case OutcomeKind::ColorFix: return "color-fix";
    case OutcomeKind::Empty: return "empty";
  }
  return {};
}

RelabelOutcome relabel_color(const StructuredPrompt& p, const DetectionSet& d,
                             const RelabelConfig& cfg, const WorldConfig& world) {
  if (!world.color_mode) throw std::invalid_argument("relabel_color requires color mode");
  if (!p.is_relational()) throw std::invalid_argument("relabel_color applies to relational prompts");
  const RelationalPrompt& r = p.relational();
  const DetectedObject* da = find_category(d, r.subject_a);
  const DetectedObject* db = find_category(d, r.subject_b);
  if (da == nullptr || db == nullptr)
    throw std::invalid_argument("relabel_color requires matching category counts");

  RelationalPrompt fixed = r;
  fixed.color_a = da->color;
  fixed.color_b = db->color;
  if (fixed == r) return RelabelOutcome{true, p, 1.0, OutcomeKind::Matched};
  return RelabelOutcome{false, StructuredPrompt{fixed, p.template_id}, cfg.lambda_relabel,
                        OutcomeKind::ColorFix};
}

RelabelOutcome relabel(const StructuredPrompt& p, const DetectionSet& d, const RelabelConfig& cfg,
                       const WorldConfig& world) {
  const double lam = cfg.lambda_relabel;

  if (p.is_empty_scene()) {
    if (d.empty()) return RelabelOutcome{true, p, 1.0, OutcomeKind::Matched};
    return RelabelOutcome{false, counting_of_observed(d, p.template_id), lam, OutcomeKind::CountFix};
  }

  if (p.is_counting()) {
    std::map<int, int> expected;
    for (const CountEntry& e : p.counting().entries) expected[e.category] += e.count;
    if (expected == category_counts(d)) return RelabelOutcome{true, p, 1.0, OutcomeKind::Matched};
    if (d.empty())
      return RelabelOutcome{false, StructuredPrompt{EmptyScenePrompt{}, p.template_id}, lam,
                            OutcomeKind::Empty};
    return RelabelOutcome{false, counting_of_observed(d, p.template_id), lam, OutcomeKind::CountFix};
  }

  const RelationalPrompt& r = p.relational();
  if (d.empty())
    return RelabelOutcome{false, StructuredPrompt{EmptyScenePrompt{}, p.template_id}, lam,
                          OutcomeKind::Empty};

  std::map<int, int> expected;
  expected[r.subject_a] += 1;
  expected[r.subject_b] += 1;
  if (expected != category_counts(d))
    return RelabelOutcome{false, counting_of_observed(d, p.template_id), lam, OutcomeKind::CountFix};

  const DetectedObject* da = find_category(d, r.subject_a);
  const DetectedObject* db = find_category(d, r.subject_b);

  RelationalPrompt fixed = r;
  bool color_changed = false;
  if (world.color_mode) {
    fixed.color_a = da->color;
    fixed.color_b = db->color;
    color_changed = fixed.color_a != r.color_a || fixed.color_b != r.color_b;
  }

  const auto actual = determine_relation(*da, *db, scenegen::family_of(r.relation), cfg.tau);
  if (!actual)
    return RelabelOutcome{false, counting_of_observed(d, p.template_id), lam, OutcomeKind::CountFix};

  const bool relation_changed = *actual != r.relation;
  fixed.relation = *actual;
  if (!relation_changed && !color_changed)
    return RelabelOutcome{true, p, 1.0, OutcomeKind::Matched};
  return RelabelOutcome{false, StructuredPrompt{fixed, p.template_id}, lam,
                        relation_changed ? OutcomeKind::RelationFix : OutcomeKind::ColorFix};
}

nlohmann::json outcome_to_json(const StructuredPrompt& original, const DetectionSet& d,
                               const RelabelOutcome& outcome, const WorldConfig& world) {
  nlohmann::json j;
  j["prompt"] = scenegen::render_prompt(original, world);
  j["detections"] = detector::detections_to_json(d, world);
  j["outcome"] = outcome_kind_token(outcome.kind);
  j["new_prompt"] = scenegen::render_prompt(outcome.new_prompt, world);
  j["lambda"] = outcome.weight;
  return j;
}

}  // namespace ipr::relabel
