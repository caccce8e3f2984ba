#include "ipr/detector.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace ipr::detector {

namespace {
constexpr double kLogisticSlope = 4.0;
}

void DetectorConfig::validate() const {
  if (!(score_threshold > 0.0 && score_threshold < 1.0))
    throw ConfigError("detector.score_threshold must lie in (0,1)");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0))
    throw ConfigError("detector.flip_prob must lie in [0,1]");
  if (!(drop_prob >= 0.0 && drop_prob <= 1.0))
    throw ConfigError("detector.drop_prob must lie in [0,1]");
  if (!(jitter_sigma >= 0.0)) throw ConfigError("detector.jitter_sigma must be >= 0");
}

double slot_confidence(double presence) {
  if (!std::isfinite(presence)) throw std::invalid_argument("presence must be finite");
  return 1.0 / (1.0 + std::exp(-kLogisticSlope * presence));
}

DetectionSet detect(const SceneLatent& z, const WorldConfig& world, const DetectorConfig& cfg,
                    Rng& rng) {
  if (z.values.size() != world.latent_dim())
    throw std::invalid_argument("latent dimension mismatch in detect");
  const int sd = world.slot_dim();

  DetectionSet out;
  for (int slot = 0; slot < world.k_max; ++slot) {
    const int base = slot * sd;

    // Fixed per-slot draw budget keeps noise streams aligned across
    // thresholds.
    const double u_drop = rng.uniform();
    const double u_flip = rng.uniform();
    const int flip_pick = rng.uniform_index(std::max(world.vocab.size() - 1, 1));
    const double jx = rng.normal();
    const double jy = rng.normal();

    const double confidence = slot_confidence(z.values[base]);
    if (confidence < cfg.score_threshold) continue;
    if (u_drop < cfg.drop_prob) continue;

    int off = base + 1;
    int category = 0;
    for (int c = 1; c < world.vocab.size(); ++c)
      if (z.values[off + c] > z.values[off + category]) category = c;
    if (u_flip < cfg.flip_prob && world.vocab.size() > 1)
      category = flip_pick >= category ? flip_pick + 1 : flip_pick;
    off += world.vocab.size();

    std::optional<int> color;
    if (world.color_mode) {
      int best = 0;
      for (int c = 1; c < world.palette_size(); ++c)
        if (z.values[off + c] > z.values[off + best]) best = c;
      color = best;
      off += world.palette_size();
    }

    const auto unmap = [](double v) { return (v + 1.0) / 2.0; };
    DetectedObject d;
    d.category = category;
    d.color = color;
    d.cx = std::clamp(unmap(z.values[off + 0]) + cfg.jitter_sigma * jx, 0.0, 1.0);
    d.cy = std::clamp(unmap(z.values[off + 1]) + cfg.jitter_sigma * jy, 0.0, 1.0);
    d.w = std::clamp(unmap(z.values[off + 2]), scenegen::kMinObjectSize, scenegen::kMaxObjectSize);
    d.h = std::clamp(unmap(z.values[off + 3]), scenegen::kMinObjectSize, scenegen::kMaxObjectSize);
    d.confidence = confidence;
    out.objects.push_back(d);
  }

  std::stable_sort(out.objects.begin(), out.objects.end(),
                   [](const DetectedObject& a, const DetectedObject& b) {
                     return a.confidence > b.confidence;
                   });
  return out;
}

nlohmann::json detection_to_json(const DetectedObject& d, const WorldConfig& world) {
  nlohmann::json j;
  j["category"] = world.vocab.name(d.category);
  if (d.color) j["color"] = world.palette.at(static_cast<std::size_t>(*d.color));
  j["bbox"] = {d.cx, d.cy, d.w, d.h};
  j["confidence"] = d.confidence;
  return j;
}

nlohmann::json detections_to_json(const DetectionSet& ds, const WorldConfig& world) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : ds.objects) arr.push_back(detection_to_json(d, world));
  return arr;
}

DetectionSet detections_from_json(const nlohmann::json& j, const WorldConfig& world) {
  DetectionSet ds;
  for (const auto& item : j) {
    DetectedObject d;
    d.category = world.vocab.index_of(item.at("category").get<std::string>());
    if (d.category < 0) throw ConfigError("detection category not in vocabulary");
    if (item.contains("color")) {
      const int c = world.color_index(item.at("color").get<std::string>());
      if (c < 0) throw ConfigError("detection color not in palette");
      d.color = c;
    }
    const auto& bbox = item.at("bbox");
    d.cx = bbox.at(0).get<double>();
    d.cy = bbox.at(1).get<double>();
    d.w = bbox.at(2).get<double>();
    d.h = bbox.at(3).get<double>();
    d.confidence = item.at("confidence").get<double>();
    ds.objects.push_back(d);
  }
  return ds;
}

}  // namespace ipr::detector
