#pragma once

#include "ipr/rng.hpp"
#include "ipr/types.hpp"

#include <string>
#include <vector>

namespace ipr::tensornet {

struct NamedArray {
  std::string name;
  Mat value;
};

/// Named parameter arrays with fixed shapes. Flat indexing (column-major
/// within each array, arrays in declaration order) backs the gradient checker.
class ParamSet {
 public:
  ParamSet() = default;

  void add(std::string name, Mat value);
  std::size_t count() const { return arrays_.size(); }
  const NamedArray& array(std::size_t i) const { return arrays_[i]; }
  NamedArray& array(std::size_t i) { return arrays_[i]; }
  const Mat& at(const std::string& name) const;
  Mat& at(const std::string& name);

  Index total_count() const;
  double flat_get(Index flat) const;
  void flat_add(Index flat, double delta);

  bool same_shape(const ParamSet& other) const;
  bool all_finite() const;
  void set_zero();
  static ParamSet zeros_like(const ParamSet& other);

 private:
  std::vector<NamedArray> arrays_;
};

struct MlpArch {
  std::vector<int> widths;            // input, hidden..., output
  std::string activation = "tanh";    // tanh | identity, applied to hidden layers

  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  int layer_count() const { return static_cast<int>(widths.size()) - 1; }
  void validate() const;

  bool operator==(const MlpArch&) const = default;
};

struct Mlp {
  MlpArch arch;
  ParamSet params;
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] drawn row-major per
/// layer; biases zero.
ParamSet mlp_init(const MlpArch& arch, Rng& rng);

/// inputs: (input_width x n) columns are examples; returns (output_width x n).
/// Computed one column at a time, so column i of a batch is bit-identical to
/// a single-example call.
Mat forward(const MlpArch& arch, const ParamSet& params, const Mat& inputs);

/// Weighted MSE: loss = (1/n) * sum_i weights[i] * ||y_i - targets_i||^2.
struct LossSpec {
  Mat targets;   // (output_width x n)
  Vec weights;   // n
};

struct BackwardResult {
  double loss = 0.0;
  ParamSet grads;
};

/// Exact reverse-mode gradients of the weighted MSE. Per-example gradients
/// are formed unweighted and then scale-accumulated in ascending example
/// order, so each example's contribution is exactly weights[i]/n times its
/// standalone gradient.
BackwardResult backward(const MlpArch& arch, const ParamSet& params, const Mat& inputs,
                        const LossSpec& spec);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  ParamSet m;
  ParamSet v;
  long step = 0;

  static AdamState init(const ParamSet& params, AdamConfig cfg);
};

/// Standard bias-corrected Adam update, in place. Throws DivergenceError on
/// non-finite gradients.
void adam_step(AdamState& state, ParamSet& params, const ParamSet& grads);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<Index> sampled;
};

/// Central-difference check against backward() over a random subsample of at
/// least 200 parameters (all of them when fewer exist). Relative error uses
/// max(|analytic|, |numeric|, 1e-8) as the denominator. analytic_override
/// substitutes the gradients under test, for mutation checks.
GradCheckResult finite_diff_gradcheck(const MlpArch& arch, const ParamSet& params,
                                      const Mat& inputs, const LossSpec& spec, double h, Rng& rng,
                                      const ParamSet* analytic_override = nullptr);

}  // namespace ipr::tensornet
