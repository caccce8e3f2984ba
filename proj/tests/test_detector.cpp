#include "ipr/detector.hpp"

#include "test_util.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>

using namespace ipr;
using namespace ipr::detector;
using scenegen::ObjectInstance;
using scenegen::Scene;
using scenegen::SceneLatent;
using scenegen::WorldConfig;

namespace {

SceneLatent random_latent(Rng& rng, const WorldConfig& world) {
  Vec v(world.latent_dim());
  for (Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return SceneLatent{std::move(v)};
}

}  // namespace

TEST_SUITE_BEGIN("detector");

TEST_CASE("slot confidence is the pinned logistic") {
  CHECK(slot_confidence(0.0) == doctest::Approx(0.5));
  CHECK(slot_confidence(1.0) == doctest::Approx(1.0 / (1.0 + std::exp(-4.0))));
  CHECK(slot_confidence(1.0) == doctest::Approx(0.98201379003790845));
  CHECK(slot_confidence(-1.0) == doctest::Approx(1.0 - 0.98201379003790845));
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double c = slot_confidence(-2.0 + 0.04 * i);
    CHECK(c > prev);
    prev = c;
  }
  CHECK_THROWS_AS((void)slot_confidence(std::numeric_limits<double>::quiet_NaN()),
                  std::invalid_argument);
}

TEST_CASE("config validation") {
  DetectorConfig bad;
  bad.score_threshold = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = DetectorConfig{};
  bad.flip_prob = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = DetectorConfig{};
  bad.jitter_sigma = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("empty scenes yield no detections at the default threshold") {
  const WorldConfig world;
  Rng rng(1);
  const auto dets = detect(scenegen::encode_scene(Scene{}, world), world, DetectorConfig{}, rng);
  CHECK(dets.empty());
}

TEST_CASE("a clean object is detected with its category and box") {
  const WorldConfig world;
  Scene s;
  s.objects.push_back(ObjectInstance::make(5, std::nullopt, 0.25, 0.75, 0.2, 0.1));
  Rng rng(2);
  const auto dets = detect(scenegen::encode_scene(s, world), world, DetectorConfig{}, rng);
  REQUIRE(dets.size() == 1);
  const auto& d = dets.objects[0];
  CHECK(d.category == 5);
  CHECK(d.cx == s.objects[0].cx);
  CHECK(d.cy == s.objects[0].cy);
  CHECK(d.w == s.objects[0].w);
  CHECK(d.h == s.objects[0].h);
  CHECK(d.confidence == doctest::Approx(0.982).epsilon(1e-3));
}

TEST_CASE("noiseless detection recovers whole scenes exactly") {
  const WorldConfig world;
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Scene s;
    const int n = rng.uniform_index(world.k_max + 1);
    for (int i = 0; i < n; ++i)
      s.objects.push_back(ObjectInstance::make(rng.uniform_index(world.vocab.size()), std::nullopt,
                                               rng.uniform(), rng.uniform(),
                                               rng.uniform_range(0.05, 0.5),
                                               rng.uniform_range(0.05, 0.5)));
    Rng det_rng(trial);
    const auto dets = detect(scenegen::encode_scene(s, world), world, DetectorConfig{}, det_rng);
    const Scene canon = scenegen::canonical_order(s);
    REQUIRE(dets.size() == canon.objects.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
      CHECK(dets.objects[i].category == canon.objects[i].category);
      CHECK(dets.objects[i].cx == canon.objects[i].cx);
      CHECK(dets.objects[i].cy == canon.objects[i].cy);
    }
  }
}

TEST_CASE("raising the threshold never adds detections") {
  const WorldConfig world;
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const auto z = random_latent(rng, world);
    for (const auto noise : {0.0, 0.3}) {
      DetectorConfig lo;
      lo.score_threshold = 0.45;
      lo.drop_prob = noise;
      lo.jitter_sigma = noise * 0.1;
      DetectorConfig hi = lo;
      hi.score_threshold = 0.60;
      Rng r1(trial), r2(trial);
      const auto at_lo = detect(z, world, lo, r1);
      const auto at_hi = detect(z, world, hi, r2);
      CHECK(at_hi.size() <= at_lo.size());
    }
  }
}

TEST_CASE("detection output is sorted by descending confidence") {
  const WorldConfig world;
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto z = random_latent(rng, world);
    Rng det_rng(trial);
    const auto dets = detect(z, world, DetectorConfig{}, det_rng);
    for (std::size_t i = 1; i < dets.size(); ++i)
      CHECK(dets.objects[i - 1].confidence >= dets.objects[i].confidence);
  }
}

TEST_CASE("noise modes are deterministic per seed") {
  const WorldConfig world;
  DetectorConfig cfg;
  cfg.flip_prob = 0.3;
  cfg.drop_prob = 0.2;
  cfg.jitter_sigma = 0.05;
  Rng rng(6);
  const auto z = random_latent(rng, world);
  Rng r1(77), r2(77);
  const auto a = detect(z, world, cfg, r1);
  const auto b = detect(z, world, cfg, r2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.objects[i].category == b.objects[i].category);
    CHECK(a.objects[i].cx == b.objects[i].cx);
    CHECK(a.objects[i].confidence == b.objects[i].confidence);
  }
}

TEST_CASE("noise modes behave as advertised in the extremes") {
  const WorldConfig world;
  Scene s;
  s.objects.push_back(ObjectInstance::make(3, std::nullopt, 0.5, 0.5, 0.2, 0.2));
  const auto z = scenegen::encode_scene(s, world);

  DetectorConfig drop_all;
  drop_all.drop_prob = 1.0;
  Rng r1(1);
  CHECK(detect(z, world, drop_all, r1).empty());

  DetectorConfig flip_all;
  flip_all.flip_prob = 1.0;
  int flipped = 0;
  for (int i = 0; i < 50; ++i) {
    Rng r(i);
    const auto dets = detect(z, world, flip_all, r);
    REQUIRE(dets.size() == 1);
    if (dets.objects[0].category != 3) ++flipped;
    CHECK(dets.objects[0].category >= 0);
    CHECK(dets.objects[0].category < world.vocab.size());
  }
  CHECK(flipped == 50);

  DetectorConfig jitter;
  jitter.jitter_sigma = 10.0;
  for (int i = 0; i < 20; ++i) {
    Rng r(i);
    const auto dets = detect(z, world, jitter, r);
    REQUIRE(dets.size() == 1);
    CHECK(dets.objects[0].cx >= 0.0);
    CHECK(dets.objects[0].cx <= 1.0);
    CHECK(dets.objects[0].cy >= 0.0);
    CHECK(dets.objects[0].cy <= 1.0);
  }
}

TEST_CASE("detections serialize to JSONL records and back") {
  const WorldConfig world;
  Scene s;
  s.objects.push_back(ObjectInstance::make(2, std::nullopt, 0.3, 0.4, 0.25, 0.15));
  s.objects.push_back(ObjectInstance::make(7, std::nullopt, 0.8, 0.1, 0.1, 0.3));
  Rng rng(9);
  const auto dets = detect(scenegen::encode_scene(s, world), world, DetectorConfig{}, rng);
  const auto j = detections_to_json(dets, world);
  const auto back = detections_from_json(j, world);
  REQUIRE(back.size() == dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    CHECK(back.objects[i].category == dets.objects[i].category);
    CHECK(back.objects[i].cx == dets.objects[i].cx);
    CHECK(back.objects[i].confidence == dets.objects[i].confidence);
  }
}

TEST_SUITE_END();
