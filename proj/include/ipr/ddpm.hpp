#pragma once

#include "ipr/rng.hpp"
#include "ipr/scenegen.hpp"
#include "ipr/tensornet.hpp"
#include "ipr/types.hpp"

#include <span>
#include <vector>

namespace ipr::ddpm {

using scenegen::SceneLatent;
using scenegen::StructuredPrompt;
using scenegen::WorldConfig;

struct NoiseSchedule {
  int t_d = 0;
  Vec beta;       // beta[t-1] for t = 1..T
  Vec alpha;      // 1 - beta
  Vec alpha_bar;  // cumulative product of alpha

  double beta_at(int t) const { return beta[t - 1]; }
  double alpha_at(int t) const { return alpha[t - 1]; }
  double alpha_bar_at(int t) const { return alpha_bar[t - 1]; }
};

/// Linear beta interpolation inclusive of both endpoints.
NoiseSchedule make_schedule(int t_d, double beta_start, double beta_end);

/// Condition-vector layout: [A one-hot | relation one-hot(4) | B one-hot |
/// A/B color one-hots (color mode) | per-category count one-hots (k_max+1)
/// each, counting prompts only | kind one-hot(3)]. template_id is excluded,
/// so rephrased prompts condition identically.
struct EmbedConfig {
  int vocab_size = 10;
  int k_max = 3;
  bool color_mode = false;
  int palette_size = 4;
  int relation_count = 4;
  int time_dim = 16;

  static EmbedConfig from_world(const WorldConfig& world);
  int latent_dim() const { return k_max * (1 + vocab_size + (color_mode ? palette_size : 0) + 4); }
  int cond_dim() const {
    return 2 * vocab_size + relation_count + (color_mode ? 2 * palette_size : 0) +
           vocab_size * (k_max + 1) + 3;
  }
  int input_dim() const { return latent_dim() + cond_dim() + kOrderFeatureDim + time_dim; }

  static constexpr int kOrderFeatureDim = 2;

  bool operator==(const EmbedConfig&) const = default;
};

/// Denoiser input features derived from the condition: the required sign of
/// (slot0 - slot1) along cx and cy once the canonical slot order is resolved
/// (categories sort A into slot 0 iff its index is lower). Zero for prompts
/// without a relational constraint. A function of the condition, so encoder
/// injectivity is untouched; without it the net has to learn a category-order
/// comparison circuit per category pair, which does not fit a desk-scale MLP.
Vec order_features(const StructuredPrompt& p);

/// Sinusoidal embedding, 8 geometric frequency pairs.
Vec time_embed(int t, int t_d);

Vec embed_condition(const StructuredPrompt& p, const EmbedConfig& cfg);

struct TrainingExample {
  SceneLatent latent;
  StructuredPrompt prompt;
  double weight = 1.0;
  int iteration_tag = 0;
};

struct ModelState {
  tensornet::Mlp denoiser;
  NoiseSchedule schedule;
  EmbedConfig embed;
  tensornet::AdamState opt;
};

/// Fresh denoiser with input [x_t | condition | time]; hidden widths from
/// `hidden`, output = latent_dim.
ModelState init_model(const EmbedConfig& embed, const NoiseSchedule& schedule,
                      const std::vector<int>& hidden, const std::string& activation, double lr,
                      Rng& rng);

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Vec forward_noise(const Vec& x0, int t, const Vec& eps, const NoiseSchedule& schedule);

struct LossGrads {
  double loss = 0.0;
  tensornet::ParamSet grads;
};

/// Single-example epsilon-prediction loss at a uniformly drawn timestep.
LossGrads ddpm_example_loss(const ModelState& model, const TrainingExample& example, Rng& rng);

/// loss = (1/n) sum_i weight_i * ||eps_i - eps_hat_i||^2; gradient
/// contributions scale exactly by weight_i. (t, eps) pairs are drawn from rng
/// in ascending example order.
LossGrads weighted_batch_loss(const ModelState& model, std::span<const TrainingExample> batch,
                              Rng& rng);

/// Ancestral sampler: sigma_t = sqrt(beta_t), no noise at t=1.
SceneLatent sample_latent(const ModelState& model, const StructuredPrompt& p, Rng& rng);

}  // namespace ipr::ddpm
