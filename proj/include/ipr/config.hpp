#pragma once

#include "ipr/detector.hpp"
#include "ipr/relabel.hpp"
#include "ipr/scenegen.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace ipr::config {

enum class Method { Direct, PR, RLDF, PR_RLDF, IPR_RLDF };

std::string method_token(Method m);
Method parse_method(const std::string& token);  // throws ConfigError

struct ModelConfig {
  std::vector<int> hidden = {128, 128};
  std::string activation = "tanh";
  int t_d = 32;
  double beta_start = 0.004;
  double beta_end = 0.18;
};

struct TrainConfig {
  Method method = Method::IPR_RLDF;
  int iterations = 2;
  int samples_per_iter = 400;
  int epochs_per_iter = 3;
  int batch_size = 4;
  double learning_rate = 3e-4;
  int pretrain_epochs = 90;
  int pretrain_examples = 4000;
  double pretrain_lr = 1e-3;
  int growth_step = 2000;
  bool accumulate_datasets = false;
  std::uint64_t seed = 1;
};

struct EvalConfig {
  int n_prompts = 100;
  int samples_per_prompt = 4;
  int template_id = 0;  // surface template applied to generated prompt sets
};

/// Everything a run needs, loaded from a sectioned key=value file. Unknown
/// keys are errors; every key has a documented default.
struct ExperimentConfig {
  scenegen::WorldConfig world;
  ModelConfig model;
  detector::DetectorConfig detector;
  relabel::RelabelConfig relabel;
  TrainConfig train;
  EvalConfig eval;

  void validate() const;  // throws ConfigError; includes alpha_bar(T) < 0.05
};

/// Grammar: [section] headers, key = value lines, '#' starts a comment.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// Canonical form; parse(serialize(parse(x))) == parse(x).
std::string serialize_config(const ExperimentConfig& cfg);

struct ConfigKeyDoc {
  std::string section;
  std::string key;
  std::string default_value;
  std::string doc;
};
std::vector<ConfigKeyDoc> config_key_docs();

nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// The subset that must agree for runs to be comparable: prompt-set spec and
/// detector config.
nlohmann::json compat_json(const ExperimentConfig& cfg);

}  // namespace ipr::config
