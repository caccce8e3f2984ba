#include "ipr/relabel.hpp"

#include "oracle_relabel.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

using namespace ipr;
using namespace ipr::relabel;
using scenegen::Relation;
using scenegen::RelationFamily;
using scenegen::StructuredPrompt;
using scenegen::WorldConfig;

namespace {

DetectedObject det(int category, double cx, double cy, double conf = 0.9,
                   std::optional<int> color = std::nullopt) {
  DetectedObject d;
  d.category = category;
  d.color = color;
  d.cx = cx;
  d.cy = cy;
  d.w = 0.2;
  d.h = 0.2;
  d.confidence = conf;
  return d;
}

StructuredPrompt relational(int a, Relation r, int b, int tid = 0) {
  scenegen::RelationalPrompt rp;
  rp.subject_a = a;
  rp.relation = r;
  rp.subject_b = b;
  return StructuredPrompt{rp, tid};
}

bool same_prompt(const StructuredPrompt& a, const StructuredPrompt& b) { return a == b; }

// Random prompt over the full default world, biased toward relational.
StructuredPrompt random_prompt(Rng& rng, const WorldConfig& world) {
  const double kind = rng.uniform();
  if (kind < 0.70) {
    const int a = rng.uniform_index(world.vocab.size());
    int b = rng.uniform_index(world.vocab.size() - 1);
    if (b >= a) b += 1;
    return relational(a, scenegen::all_relations()[rng.uniform_index(4)], b,
                      rng.uniform_index(scenegen::kTemplatesPerKind));
  }
  if (kind < 0.90) {
    scenegen::CountingPrompt c;
    const int kinds = 1 + rng.uniform_index(2);
    int total = 0;
    for (int i = 0; i < kinds && total < world.k_max; ++i) {
      const int count = 1 + rng.uniform_index(world.k_max - total);
      int cat = rng.uniform_index(world.vocab.size());
      bool dup = false;
      for (const auto& e : c.entries) dup = dup || e.category == cat;
      if (dup) continue;
      c.entries.push_back(scenegen::CountEntry{count, cat});
      total += count;
    }
    if (!c.entries.empty())
      return StructuredPrompt{c, rng.uniform_index(scenegen::kTemplatesPerKind)};
  }
  return StructuredPrompt{scenegen::EmptyScenePrompt{},
                          rng.uniform_index(scenegen::kTemplatesPerKind)};
}

DetectionSet random_detections(Rng& rng, const WorldConfig& world) {
  DetectionSet d;
  const int n = rng.uniform_index(world.k_max + 1);
  // occasional exact ties to exercise the ambiguous path
  const bool force_tie = rng.uniform() < 0.15;
  double conf = 0.95;
  for (int i = 0; i < n; ++i) {
    const double cx = force_tie && i > 0 ? d.objects[0].cx : 0.1 * rng.uniform_index(11);
    const double cy = force_tie && i > 0 ? d.objects[0].cy : 0.1 * rng.uniform_index(11);
    d.objects.push_back(det(rng.uniform_index(world.vocab.size()), cx, cy, conf));
    conf -= 0.05;
  }
  return d;
}

}  // namespace

TEST_SUITE_BEGIN("relabel");

TEST_CASE("relation determination follows the pinned center convention") {
  CHECK(*determine_relation(det(0, 0.3, 0.5), det(1, 0.7, 0.5), RelationFamily::Horizontal) ==
        Relation::LeftOf);
  CHECK(*determine_relation(det(0, 0.7, 0.5), det(1, 0.3, 0.5), RelationFamily::Horizontal) ==
        Relation::RightOf);
  // cy measured from the bottom: larger cy is higher
  CHECK(*determine_relation(det(0, 0.5, 0.8), det(1, 0.5, 0.2), RelationFamily::Vertical) ==
        Relation::Above);
  CHECK(*determine_relation(det(0, 0.5, 0.2), det(1, 0.5, 0.8), RelationFamily::Vertical) ==
        Relation::Below);
  CHECK_FALSE(
      determine_relation(det(0, 0.5, 0.5), det(1, 0.5, 0.5), RelationFamily::Horizontal));
  CHECK_FALSE(determine_relation(det(0, 0.5, 0.5), det(1, 0.5, 0.5), RelationFamily::Vertical));
  // tau widens the ambiguous band
  CHECK_FALSE(determine_relation(det(0, 0.48, 0.5), det(1, 0.52, 0.5),
                                 RelationFamily::Horizontal, 0.05));
}

TEST_CASE("count verdicts compare category multisets") {
  const WorldConfig world;
  const auto p = relational(0, Relation::LeftOf, 2);  // dog left of car

  DetectionSet ok;
  ok.objects = {det(0, 0.3, 0.5), det(2, 0.7, 0.5)};
  CHECK(check_counts(p, ok, world).matches);

  const auto cat_above_dog = relational(1, Relation::Above, 0);
  DetectionSet extra;
  extra.objects = {det(1, 0.2, 0.8), det(1, 0.4, 0.6), det(0, 0.5, 0.2)};
  const auto verdict = check_counts(cat_above_dog, extra, world);
  CHECK_FALSE(verdict.matches);
  CHECK(verdict.observed.at(CountKey{1, -1}) == 2);
  CHECK(verdict.observed.at(CountKey{0, -1}) == 1);

  CHECK_FALSE(check_counts(p, DetectionSet{}, world).matches);
  CHECK(check_counts(StructuredPrompt{scenegen::EmptyScenePrompt{}, 0}, DetectionSet{}, world)
            .matches);
}

TEST_CASE("matched pairs keep their prompt at full weight") {
  const WorldConfig world;
  const RelabelConfig cfg;
  const auto p = relational(0, Relation::LeftOf, 2);
  DetectionSet d;
  d.objects = {det(0, 0.3, 0.5), det(2, 0.7, 0.5)};
  const auto out = ipr::relabel::relabel(p, d, cfg, world);
  CHECK(out.matched);
  CHECK(out.weight == 1.0);
  CHECK(same_prompt(out.new_prompt, p));
  CHECK(out.kind == OutcomeKind::Matched);
}

TEST_CASE("a flipped relation is corrected within its family at half weight") {
  const WorldConfig world;
  const RelabelConfig cfg;
  const auto p = relational(0, Relation::LeftOf, 2);
  DetectionSet d;
  d.objects = {det(0, 0.7, 0.5), det(2, 0.3, 0.5)};
  const auto out = ipr::relabel::relabel(p, d, cfg, world);
  CHECK_FALSE(out.matched);
  CHECK(out.weight == 0.5);
  CHECK(out.kind == OutcomeKind::RelationFix);
  CHECK(same_prompt(out.new_prompt, relational(0, Relation::RightOf, 2)));
  CHECK(scenegen::render_prompt(out.new_prompt, world) == "a dog right of a car");
}

TEST_CASE("count mismatches rewrite to the observed counting prompt") {
  const WorldConfig world;
  const RelabelConfig cfg;
  const auto p = relational(1, Relation::Above, 0);  // a cat above a dog
  DetectionSet d;
  d.objects = {det(1, 0.2, 0.8), det(1, 0.4, 0.6), det(0, 0.5, 0.2)};
  const auto out = ipr::relabel::relabel(p, d, cfg, world);
  CHECK_FALSE(out.matched);
  CHECK(out.weight == 0.5);
  CHECK(out.kind == OutcomeKind::CountFix);
  CHECK(scenegen::render_prompt(out.new_prompt, world) == "2 cats and 1 dog");
}

TEST_CASE("no detections rewrite to an empty-scene prompt") {
  const WorldConfig world;
  const RelabelConfig cfg;
  const auto out = ipr::relabel::relabel(relational(0, Relation::Below, 4), DetectionSet{}, cfg, world);
  CHECK_FALSE(out.matched);
  CHECK(out.kind == OutcomeKind::Empty);
  CHECK(out.new_prompt.is_empty_scene());
  CHECK(out.weight == 0.5);
}

TEST_CASE("ties route to a counting relabel rather than a relation guess") {
  const WorldConfig world;
  const RelabelConfig cfg;
  const auto p = relational(0, Relation::LeftOf, 2);
  DetectionSet d;
  d.objects = {det(0, 0.5, 0.5), det(2, 0.5, 0.9)};
  const auto out = ipr::relabel::relabel(p, d, cfg, world);
  CHECK_FALSE(out.matched);
  CHECK(out.kind == OutcomeKind::CountFix);
  CHECK(out.new_prompt.is_counting());
}

TEST_CASE("lambda is configurable") {
  const WorldConfig world;
  RelabelConfig cfg;
  cfg.lambda_relabel = 0.1;
  DetectionSet d;
  d.objects = {det(0, 0.7, 0.5), det(2, 0.3, 0.5)};
  CHECK(ipr::relabel::relabel(relational(0, Relation::LeftOf, 2), d, cfg, world).weight == 0.1);
  cfg.lambda_relabel = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("relabel agrees with the brute-force rule table on a small world") {
  WorldConfig world;
  world.vocab = scenegen::CategoryVocab({"dog", "cat", "car"});
  const RelabelConfig cfg;

  // all prompts over 3 categories
  std::vector<StructuredPrompt> prompts;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      if (a == b) continue;
      for (const auto rel : scenegen::all_relations()) prompts.push_back(relational(a, rel, b));
    }
  for (int c0 = 1; c0 <= 3; ++c0) prompts.push_back(StructuredPrompt{
      scenegen::CountingPrompt{{scenegen::CountEntry{c0, 0}}}, 0});
  prompts.push_back(StructuredPrompt{
      scenegen::CountingPrompt{{scenegen::CountEntry{1, 1}, scenegen::CountEntry{2, 2}}}, 0});
  prompts.push_back(StructuredPrompt{scenegen::EmptyScenePrompt{}, 0});

  // all detection sets of size <= 3 over a 3x3 grid (unit test; the
  // acceptance suite runs the full 5x5 world)
  std::vector<DetectedObject> slots;
  for (int cat = 0; cat < 3; ++cat)
    for (int gx = 0; gx < 3; ++gx)
      for (int gy = 0; gy < 3; ++gy)
        slots.push_back(det(cat, 0.25 * (gx + 1), 0.25 * (gy + 1)));

  long checked = 0;
  const auto check_one = [&](const DetectionSet& d) {
    for (const auto& p : prompts) {
      const auto got = ipr::relabel::relabel(p, d, cfg, world);
      const auto want = oracle::reference_relabel(p, d, cfg.lambda_relabel, cfg.tau);
      REQUIRE(got.matched == want.matched);
      REQUIRE(got.weight == want.weight);
      REQUIRE(same_prompt(got.new_prompt, want.new_prompt));
      ++checked;
    }
  };

  check_one(DetectionSet{});
  for (std::size_t i = 0; i < slots.size(); ++i) {
    DetectionSet d1;
    d1.objects = {slots[i]};
    check_one(d1);
    for (std::size_t j = i; j < slots.size(); ++j) {
      DetectionSet d2;
      d2.objects = {slots[i], slots[j]};
      check_one(d2);
      for (std::size_t k = j; k < slots.size(); ++k) {
        DetectionSet d3;
        d3.objects = {slots[i], slots[j], slots[k]};
        check_one(d3);
      }
    }
  }
  CHECK(checked > 100000);
}

TEST_CASE("relabeling is idempotent and partitions weights") {
  const WorldConfig world;
  const RelabelConfig cfg;
  Rng rng(123);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto p = random_prompt(rng, world);
    const auto d = random_detections(rng, world);
    const auto out = ipr::relabel::relabel(p, d, cfg, world);

    // weight partition: 1 iff matched
    CHECK(out.weight == (out.matched ? 1.0 : cfg.lambda_relabel));
    if (out.matched) CHECK(same_prompt(out.new_prompt, p));

    // family preservation on relation fixes
    if (out.kind == OutcomeKind::RelationFix)
      CHECK(scenegen::family_of(out.new_prompt.relational().relation) ==
            scenegen::family_of(p.relational().relation));

    const auto again = ipr::relabel::relabel(out.new_prompt, d, cfg, world);
    CHECK(again.matched);
    CHECK(again.weight == 1.0);
    CHECK(same_prompt(again.new_prompt, out.new_prompt));
  }
}

TEST_CASE("color relabeling rewrites mismatched colors") {
  WorldConfig world;
  world.color_mode = true;
  const RelabelConfig cfg;

  scenegen::RelationalPrompt rp;
  rp.subject_a = 1;  // cat
  rp.color_a = world.color_index("red");
  rp.relation = Relation::Above;
  rp.subject_b = 0;  // dog
  rp.color_b = world.color_index("green");
  const StructuredPrompt p{rp, 0};

  DetectionSet match;
  match.objects = {det(1, 0.5, 0.8, 0.95, world.color_index("red")),
                   det(0, 0.5, 0.2, 0.9, world.color_index("green"))};
  const auto identity = relabel_color(p, match, cfg, world);
  CHECK(identity.matched);
  CHECK(same_prompt(identity.new_prompt, p));

  DetectionSet blue;
  blue.objects = {det(1, 0.5, 0.8, 0.95, world.color_index("blue")),
                  det(0, 0.5, 0.2, 0.9, world.color_index("green"))};
  const auto recolored = relabel_color(p, blue, cfg, world);
  CHECK_FALSE(recolored.matched);
  CHECK(recolored.weight == 0.5);
  CHECK(scenegen::render_prompt(recolored.new_prompt, world) == "a blue cat above a green dog");

  // color and relation both wrong: one relabel, one penalty
  DetectionSet both;
  both.objects = {det(1, 0.5, 0.2, 0.95, world.color_index("blue")),
                  det(0, 0.5, 0.8, 0.9, world.color_index("green"))};
  const auto fixed = ipr::relabel::relabel(p, both, cfg, world);
  CHECK_FALSE(fixed.matched);
  CHECK(fixed.weight == 0.5);
  CHECK(fixed.kind == OutcomeKind::RelationFix);
  CHECK(scenegen::render_prompt(fixed.new_prompt, world) == "a blue cat below a green dog");
  const auto again = ipr::relabel::relabel(fixed.new_prompt, both, cfg, world);
  CHECK(again.matched);

  WorldConfig plain;
  CHECK_THROWS_AS((void)relabel_color(p, match, cfg, plain), std::invalid_argument);
}

TEST_CASE("relabel log records carry the decision") {
  const WorldConfig world;
  const RelabelConfig cfg;
  DetectionSet d;
  d.objects = {det(0, 0.7, 0.5), det(2, 0.3, 0.5)};
  const auto p = relational(0, Relation::LeftOf, 2);
  const auto out = ipr::relabel::relabel(p, d, cfg, world);
  const auto rec = outcome_to_json(p, d, out, world);
  CHECK(rec.at("prompt") == "a dog left of a car");
  CHECK(rec.at("new_prompt") == "a dog right of a car");
  CHECK(rec.at("outcome") == "relation-fix");
  CHECK(rec.at("lambda") == 0.5);
  CHECK(rec.at("detections").size() == 2);
}

TEST_SUITE_END();
