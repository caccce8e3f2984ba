#include "ipr/tensornet.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace ipr::tensornet {
namespace {

double activate(double x, bool tanh_act) { return tanh_act ? std::tanh(x) : x; }

// Derivative expressed through the activation value (h = tanh(a) -> 1 - h^2).
double activate_grad(double h, bool tanh_act) { return tanh_act ? 1.0 - h * h : 1.0; }

/// Pairwise (recursive halving) sum; pinned reduction order for per-example
/// losses.
double pairwise_sum(const double* data, Index n) {
  if (n <= 4) {
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) acc += data[i];
    return acc;
  }
  const Index half = n / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

}  // namespace

void ParamSet::add(std::string name, Mat value) {
  for (const auto& a : arrays_)
    if (a.name == name) throw std::invalid_argument("duplicate parameter name: " + name);
  arrays_.push_back(NamedArray{std::move(name), std::move(value)});
}

const Mat& ParamSet::at(const std::string& name) const {
  for (const auto& a : arrays_)
    if (a.name == name) return a.value;
  throw std::out_of_range("no parameter array named " + name);
}

Mat& ParamSet::at(const std::string& name) {
  for (auto& a : arrays_)
    if (a.name == name) return a.value;
  throw std::out_of_range("no parameter array named " + name);
}

Index ParamSet::total_count() const {
  Index n = 0;
  for (const auto& a : arrays_) n += a.value.size();
  return n;
}

double ParamSet::flat_get(Index flat) const {
  for (const auto& a : arrays_) {
    if (flat < a.value.size()) return a.value.data()[flat];
    flat -= a.value.size();
  }
  throw std::out_of_range("flat parameter index out of range");
}

void ParamSet::flat_add(Index flat, double delta) {
  for (auto& a : arrays_) {
    if (flat < a.value.size()) {
      a.value.data()[flat] += delta;
      return;
    }
    flat -= a.value.size();
  }
  throw std::out_of_range("flat parameter index out of range");
}

bool ParamSet::same_shape(const ParamSet& other) const {
  if (arrays_.size() != other.arrays_.size()) return false;
  for (std::size_t i = 0; i < arrays_.size(); ++i) {
    if (arrays_[i].name != other.arrays_[i].name) return false;
    if (arrays_[i].value.rows() != other.arrays_[i].value.rows()) return false;
    if (arrays_[i].value.cols() != other.arrays_[i].value.cols()) return false;
  }
  return true;
}

bool ParamSet::all_finite() const {
  for (const auto& a : arrays_)
    if (!a.value.allFinite()) return false;
  return true;
}

void ParamSet::set_zero() {
  for (auto& a : arrays_) a.value.setZero();
}

ParamSet ParamSet::zeros_like(const ParamSet& other) {
  ParamSet out;
  for (const auto& a : other.arrays_) out.add(a.name, Mat::Zero(a.value.rows(), a.value.cols()));
  return out;
}

void MlpArch::validate() const {
  if (widths.size() < 3) throw std::invalid_argument("arch needs input, >=1 hidden, output widths");
  for (const int w : widths)
    if (w < 1) throw std::invalid_argument("layer widths must be >= 1");
  if (activation != "tanh" && activation != "identity")
    throw std::invalid_argument("unknown activation: " + activation);
}

ParamSet mlp_init(const MlpArch& arch, Rng& rng) {
  arch.validate();
  ParamSet params;
  for (int l = 0; l < arch.layer_count(); ++l) {
    const int fan_in = arch.widths[static_cast<std::size_t>(l)];
    const int fan_out = arch.widths[static_cast<std::size_t>(l) + 1];
    const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Mat w(fan_out, fan_in);
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform_range(-limit, limit);
    params.add("layer" + std::to_string(l) + "/W", std::move(w));
    params.add("layer" + std::to_string(l) + "/b", Mat::Zero(fan_out, 1));
  }
  return params;
}

Mat forward(const MlpArch& arch, const ParamSet& params, const Mat& inputs) {
  if (inputs.rows() != arch.input_width())
    throw std::invalid_argument("input width " + std::to_string(inputs.rows()) +
                                " does not match arch input " + std::to_string(arch.input_width()));
  const bool tanh_act = arch.activation == "tanh";
  const int layers = arch.layer_count();
  Mat out(arch.output_width(), inputs.cols());
  Vec h, a;
  for (Index col = 0; col < inputs.cols(); ++col) {
    h = inputs.col(col);
    for (int l = 0; l < layers; ++l) {
      const Mat& w = params.array(static_cast<std::size_t>(2 * l)).value;
      const Mat& b = params.array(static_cast<std::size_t>(2 * l + 1)).value;
      a.noalias() = w * h;
      a += b.col(0);
      if (l + 1 < layers)
        for (Index i = 0; i < a.size(); ++i) a[i] = activate(a[i], tanh_act);
      h = a;
    }
    out.col(col) = h;
  }
  return out;
}

BackwardResult backward(const MlpArch& arch, const ParamSet& params, const Mat& inputs,
                        const LossSpec& spec) {
  if (inputs.rows() != arch.input_width()) throw std::invalid_argument("input width mismatch");
  if (spec.targets.rows() != arch.output_width() || spec.targets.cols() != inputs.cols())
    throw std::invalid_argument("target shape mismatch");
  if (spec.weights.size() != inputs.cols())
    throw std::invalid_argument("weight count does not match batch size");
  if (!inputs.allFinite() || !spec.targets.allFinite() || !spec.weights.allFinite())
    throw std::invalid_argument("non-finite inputs to backward");

  const bool tanh_act = arch.activation == "tanh";
  const int layers = arch.layer_count();
  const Index n = inputs.cols();

  BackwardResult result;
  result.grads = ParamSet::zeros_like(params);
  ParamSet scratch = ParamSet::zeros_like(params);

  std::vector<Vec> act(static_cast<std::size_t>(layers) + 1);  // act[0] = input
  Vec delta, residual, sq, back;
  double loss_acc = 0.0;

  for (Index col = 0; col < n; ++col) {
    act[0] = inputs.col(col);
    for (int l = 0; l < layers; ++l) {
      const Mat& w = params.array(static_cast<std::size_t>(2 * l)).value;
      const Mat& b = params.array(static_cast<std::size_t>(2 * l + 1)).value;
      Vec& out = act[static_cast<std::size_t>(l) + 1];
      out.noalias() = w * act[static_cast<std::size_t>(l)];
      out += b.col(0);
      if (l + 1 < layers)
        for (Index i = 0; i < out.size(); ++i) out[i] = activate(out[i], tanh_act);
    }

    residual = act[static_cast<std::size_t>(layers)] - spec.targets.col(col);
    sq = residual.array().square();
    const double example_loss = pairwise_sum(sq.data(), sq.size());
    loss_acc += spec.weights[col] * example_loss;

    // Unweighted per-example gradient into scratch, then scale-accumulate;
    // the two-step form keeps contributions exactly weights[col]/n times the
    // standalone gradient.
    delta = 2.0 * residual;
    for (int l = layers - 1; l >= 0; --l) {
      Mat& gw = scratch.array(static_cast<std::size_t>(2 * l)).value;
      Mat& gb = scratch.array(static_cast<std::size_t>(2 * l + 1)).value;
      gw.noalias() = delta * act[static_cast<std::size_t>(l)].transpose();
      gb.col(0) = delta;
      if (l > 0) {
        const Mat& w = params.array(static_cast<std::size_t>(2 * l)).value;
        back.noalias() = w.transpose() * delta;
        const Vec& h = act[static_cast<std::size_t>(l)];
        for (Index i = 0; i < back.size(); ++i) back[i] *= activate_grad(h[i], tanh_act);
        delta.swap(back);
      }
    }
    const double scale = spec.weights[col] / static_cast<double>(n);
    for (std::size_t a_i = 0; a_i < result.grads.count(); ++a_i)
      result.grads.array(a_i).value.array() += scale * scratch.array(a_i).value.array();
  }

  result.loss = loss_acc / static_cast<double>(n);
  return result;
}

AdamState AdamState::init(const ParamSet& params, AdamConfig cfg) {
  AdamState s;
  s.cfg = cfg;
  s.m = ParamSet::zeros_like(params);
  s.v = ParamSet::zeros_like(params);
  s.step = 0;
  return s;
}

void adam_step(AdamState& state, ParamSet& params, const ParamSet& grads) {
  if (!params.same_shape(grads) || !state.m.same_shape(params))
    throw std::invalid_argument("adam_step shape mismatch");
  if (!grads.all_finite()) throw DivergenceError("non-finite gradients in adam_step");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(state.cfg.beta2, t);
  for (std::size_t i = 0; i < params.count(); ++i) {
    auto& m = state.m.array(i).value;
    auto& v = state.v.array(i).value;
    const auto& g = grads.array(i).value;
    auto& p = params.array(i).value;
    m = state.cfg.beta1 * m + (1.0 - state.cfg.beta1) * g;
    v.array() = state.cfg.beta2 * v.array() + (1.0 - state.cfg.beta2) * g.array().square();
    p.array() -=
        state.cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.cfg.eps);
  }
}

GradCheckResult finite_diff_gradcheck(const MlpArch& arch, const ParamSet& params,
                                      const Mat& inputs, const LossSpec& spec, double h, Rng& rng,
                                      const ParamSet* analytic_override) {
  if (!(h > 0.0 && h <= 1e-2)) throw std::invalid_argument("step size must lie in (0, 1e-2]");

  const BackwardResult analytic = backward(arch, params, inputs, spec);
  const ParamSet& grads = analytic_override ? *analytic_override : analytic.grads;

  const Index total = params.total_count();
  const Index want = std::min<Index>(total, 200);
  std::set<Index> picked;
  while (static_cast<Index>(picked.size()) < want)
    picked.insert(static_cast<Index>(rng.uniform_index(static_cast<int>(total))));

  ParamSet perturbed = params;
  const auto loss_at = [&](Index flat, double delta) {
    perturbed.flat_add(flat, delta);
    const Mat y = forward(arch, perturbed, inputs);
    perturbed.flat_add(flat, -delta);
    double acc = 0.0;
    Vec sq;
    for (Index col = 0; col < inputs.cols(); ++col) {
      sq = (y.col(col) - spec.targets.col(col)).array().square();
      acc += spec.weights[col] * pairwise_sum(sq.data(), sq.size());
    }
    return acc / static_cast<double>(inputs.cols());
  };

  GradCheckResult result;
  result.sampled.assign(picked.begin(), picked.end());
  for (const Index flat : result.sampled) {
    const double numeric = (loss_at(flat, h) - loss_at(flat, -h)) / (2.0 * h);
    const double analytic_g = grads.flat_get(flat);
    const double denom = std::max({std::abs(analytic_g), std::abs(numeric), 1e-8});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic_g - numeric) / denom);
  }
  return result;
}

}  // namespace ipr::tensornet
