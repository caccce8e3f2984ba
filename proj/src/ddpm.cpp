#include "ipr/ddpm.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ipr::ddpm {

NoiseSchedule make_schedule(int t_d, double beta_start, double beta_end) {
  if (t_d < 2) throw ConfigError("diffusion step count must be >= 2");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw ConfigError("beta range must satisfy 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.t_d = t_d;
  s.beta.resize(t_d);
  s.alpha.resize(t_d);
  s.alpha_bar.resize(t_d);
  double prod = 1.0;
  for (int t = 0; t < t_d; ++t) {
    const double frac = static_cast<double>(t) / static_cast<double>(t_d - 1);
    s.beta[t] = beta_start + frac * (beta_end - beta_start);
    s.alpha[t] = 1.0 - s.beta[t];
    prod *= s.alpha[t];
    s.alpha_bar[t] = prod;
  }
  for (int t = 1; t < t_d; ++t)
    if (!(s.alpha_bar[t] < s.alpha_bar[t - 1]))
      throw ConfigError("alpha_bar must be strictly decreasing");
  return s;
}

EmbedConfig EmbedConfig::from_world(const WorldConfig& world) {
  EmbedConfig cfg;
  cfg.vocab_size = world.vocab.size();
  cfg.k_max = world.k_max;
  cfg.color_mode = world.color_mode;
  cfg.palette_size = world.palette_size();
  return cfg;
}

Vec time_embed(int t, int t_d) {
  if (t < 1 || t > t_d) throw std::invalid_argument("timestep out of range");
  constexpr int kPairs = 8;
  constexpr double kMinFreq = 0.5;
  // Top frequency scales with the step count so the code stays smooth
  // between adjacent timesteps (no aliasing).
  const double max_freq = std::max(2.0, static_cast<double>(t_d) / 8.0);
  const double x = static_cast<double>(t) / static_cast<double>(t_d);
  Vec e(2 * kPairs);
  for (int k = 0; k < kPairs; ++k) {
    const double freq =
        kMinFreq * std::pow(max_freq / kMinFreq, static_cast<double>(k) / (kPairs - 1));
    const double phase = 2.0 * std::numbers::pi * freq * x;
    e[2 * k] = std::sin(phase);
    e[2 * k + 1] = std::cos(phase);
  }
  return e;
}

Vec embed_condition(const StructuredPrompt& p, const EmbedConfig& cfg) {
  Vec v = Vec::Zero(cfg.cond_dim());
  const int rel_off = cfg.vocab_size;
  const int b_off = rel_off + cfg.relation_count;
  const int color_off = b_off + cfg.vocab_size;
  const int count_off = color_off + (cfg.color_mode ? 2 * cfg.palette_size : 0);
  const int kind_off = count_off + cfg.vocab_size * (cfg.k_max + 1);

  if (p.is_relational()) {
    const auto& r = p.relational();
    v[r.subject_a] = 1.0;
    v[rel_off + static_cast<int>(r.relation)] = 1.0;
    v[b_off + r.subject_b] = 1.0;
    if (cfg.color_mode) {
      if (r.color_a) v[color_off + *r.color_a] = 1.0;
      if (r.color_b) v[color_off + cfg.palette_size + *r.color_b] = 1.0;
    }
    v[kind_off + 0] = 1.0;
  } else if (p.is_counting()) {
    for (const auto& e : p.counting().entries) {
      const int count = std::min(e.count, cfg.k_max);
      v[count_off + e.category * (cfg.k_max + 1) + count] = 1.0;
    }
    v[kind_off + 1] = 1.0;
  } else {
    v[kind_off + 2] = 1.0;
  }
  return v;
}

ModelState init_model(const EmbedConfig& embed, const NoiseSchedule& schedule,
                      const std::vector<int>& hidden, const std::string& activation, double lr,
                      Rng& rng) {
  ModelState m;
  m.embed = embed;
  m.schedule = schedule;
  m.denoiser.arch.widths.push_back(embed.input_dim());
  for (const int h : hidden) m.denoiser.arch.widths.push_back(h);
  m.denoiser.arch.widths.push_back(embed.latent_dim());
  m.denoiser.arch.activation = activation;
  m.denoiser.params = tensornet::mlp_init(m.denoiser.arch, rng);
  tensornet::AdamConfig adam;
  adam.lr = lr;
  m.opt = tensornet::AdamState::init(m.denoiser.params, adam);
  return m;
}

Vec forward_noise(const Vec& x0, int t, const Vec& eps, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.t_d) throw std::invalid_argument("timestep out of range");
  if (eps.size() != x0.size()) throw std::invalid_argument("noise dimension mismatch");
  const double ab = schedule.alpha_bar_at(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

Vec order_features(const StructuredPrompt& p) {
  Vec f = Vec::Zero(EmbedConfig::kOrderFeatureDim);
  if (!p.is_relational()) return f;
  const auto& r = p.relational();
  // A lands in slot 0 iff its category index is lower (ties cannot occur;
  // prompts forbid equal subjects).
  const double a_first = r.subject_a < r.subject_b ? 1.0 : -1.0;
  switch (r.relation) {
    case scenegen::Relation::LeftOf: f[0] = -a_first; break;   // cx0 < cx1 when A first
    case scenegen::Relation::RightOf: f[0] = a_first; break;
    case scenegen::Relation::Above: f[1] = a_first; break;     // cy0 > cy1 when A first
    case scenegen::Relation::Below: f[1] = -a_first; break;
  }
  return f;
}

namespace {

Vec assemble_input(const Vec& x_t, const Vec& cond, const Vec& order, int t,
                   const ModelState& model) {
  Vec in(model.embed.input_dim());
  in.head(x_t.size()) = x_t;
  in.segment(x_t.size(), cond.size()) = cond;
  in.segment(x_t.size() + cond.size(), order.size()) = order;
  in.tail(model.embed.time_dim) = time_embed(t, model.schedule.t_d);
  return in;
}

}  // namespace

LossGrads weighted_batch_loss(const ModelState& model, std::span<const TrainingExample> batch,
                              Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("batch must be non-empty");
  const int d = model.embed.latent_dim();
  const Index n = static_cast<Index>(batch.size());

  Mat inputs(model.embed.input_dim(), n);
  tensornet::LossSpec spec;
  spec.targets.resize(d, n);
  spec.weights.resize(n);

  for (Index i = 0; i < n; ++i) {
    const TrainingExample& ex = batch[static_cast<std::size_t>(i)];
    if (ex.latent.values.size() != d) throw std::invalid_argument("latent dimension mismatch");
    const int t = 1 + rng.uniform_index(model.schedule.t_d);
    const Vec eps = rng.normal_vec(d);
    const Vec x_t = forward_noise(ex.latent.values, t, eps, model.schedule);
    inputs.col(i) = assemble_input(x_t, embed_condition(ex.prompt, model.embed),
                                   order_features(ex.prompt), t, model);
    spec.targets.col(i) = eps;
    spec.weights[i] = ex.weight;
  }

  tensornet::BackwardResult res =
      tensornet::backward(model.denoiser.arch, model.denoiser.params, inputs, spec);
  return LossGrads{res.loss, std::move(res.grads)};
}

LossGrads ddpm_example_loss(const ModelState& model, const TrainingExample& example, Rng& rng) {
  const TrainingExample unit{example.latent, example.prompt, 1.0, example.iteration_tag};
  return weighted_batch_loss(model, std::span<const TrainingExample>(&unit, 1), rng);
}

SceneLatent sample_latent(const ModelState& model, const StructuredPrompt& p, Rng& rng) {
  const int d = model.embed.latent_dim();
  const Vec cond = embed_condition(p, model.embed);
  Vec x = rng.normal_vec(d);
  Vec in(model.embed.input_dim());
  in.segment(d, cond.size()) = cond;
  in.segment(d + cond.size(), EmbedConfig::kOrderFeatureDim) = order_features(p);
  for (int t = model.schedule.t_d; t >= 1; --t) {
    in.head(d) = x;
    in.tail(model.embed.time_dim) = time_embed(t, model.schedule.t_d);
    const Mat eps_hat = tensornet::forward(model.denoiser.arch, model.denoiser.params, in);
    const double beta = model.schedule.beta_at(t);
    const double alpha = model.schedule.alpha_at(t);
    const double ab = model.schedule.alpha_bar_at(t);
    x = (x - (beta / std::sqrt(1.0 - ab)) * eps_hat.col(0)) / std::sqrt(alpha);
    if (t > 1) x += std::sqrt(beta) * rng.normal_vec(d);
  }
  return SceneLatent{std::move(x)};
}

}  // namespace ipr::ddpm
