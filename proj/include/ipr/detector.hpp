#pragma once

#include "ipr/rng.hpp"
#include "ipr/scenegen.hpp"
#include "ipr/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <vector>

namespace ipr::detector {

using scenegen::SceneLatent;
using scenegen::WorldConfig;

struct DetectorConfig {
  double score_threshold = 0.45;
  double flip_prob = 0.0;    // category misread
  double drop_prob = 0.0;    // missed detection
  double jitter_sigma = 0.0; // center noise

  void validate() const;
  bool operator==(const DetectorConfig&) const = default;
};

struct DetectedObject {
  int category = 0;
  std::optional<int> color;
  double cx = 0.5, cy = 0.5, w = 0.1, h = 0.1;
  double confidence = 0.0;
};

/// Sorted by descending confidence (ties keep slot order); at most k_max
/// entries.
struct DetectionSet {
  std::vector<DetectedObject> objects;
  bool empty() const { return objects.empty(); }
  std::size_t size() const { return objects.size(); }
};

/// logistic(4 * presence); strictly increasing.
double slot_confidence(double presence);

/// Reads slots straight off the latent: a slot is emitted iff its confidence
/// clears the threshold and survives the drop draw. Noise draws are consumed
/// per slot regardless of emission, so detection counts are monotone
/// non-increasing in the threshold for a fixed seed.
DetectionSet detect(const SceneLatent& z, const WorldConfig& world, const DetectorConfig& cfg,
                    Rng& rng);

nlohmann::json detection_to_json(const DetectedObject& d, const WorldConfig& world);
nlohmann::json detections_to_json(const DetectionSet& ds, const WorldConfig& world);
DetectionSet detections_from_json(const nlohmann::json& j, const WorldConfig& world);

}  // namespace ipr::detector
