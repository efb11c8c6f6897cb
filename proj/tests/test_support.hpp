#ifndef ARVSU_TESTS_TEST_SUPPORT_HPP
#define ARVSU_TESTS_TEST_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "arvsu/autodiff.hpp"
#include "arvsu/corpus.hpp"
#include "arvsu/layers.hpp"
#include "arvsu/model.hpp"

// Helpers shared by the unit and acceptance suites. Everything here is
// written against plain loops or the public API only, never against the
// internals it is used to check.
namespace arvsu::testing {

// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6). The floor keeps
// coordinates whose true gradient is zero from dividing rounding noise by
// rounding noise.
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

struct GradCheck {
  double max_relative_error = 0.0;
  std::string worst;  // parameter name and coordinate of the worst entry
  Index coordinates = 0;
};

// Compares backward() against central differences for every coordinate of
// every named parameter. `loss` must rebuild the graph from the parameters'
// current values on every call.
inline GradCheck check_gradients(const std::vector<std::pair<std::string, Var>>& params,
                                 const std::function<Var()>& loss, double eps = 1e-5) {
  for (auto [name, v] : params) v.clear_grad();
  backward(loss());
  GradCheck result;
  for (auto [name, v] : params) {
    const Tensor analytic = v.grad();
    const Tensor original = v.value();
    const Tensor numeric = finite_diff(
        [&](const Tensor& x) {
          v.assign(x);
          return loss().value().item();
        },
        original, eps);
    v.assign(original);
    for (Index i = 0; i < analytic.size(); ++i) {
      const double err = relative_error(analytic[i], numeric[i]);
      ++result.coordinates;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst = name + "[" + std::to_string(i) + "]";
      }
    }
    v.clear_grad();
  }
  return result;
}

inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  return rng.uniform_tensor(std::move(shape), -scale, scale);
}

// Scalar-loop LSTM step written directly from the gate equations, using
// plain nested loops and std::exp/std::tanh.
struct ScalarLstmState {
  std::vector<double> c;
  std::vector<double> h;
};

inline ScalarLstmState scalar_lstm_step(const LstmParams& p, const std::vector<double>& x,
                                        const ScalarLstmState& prev) {
  const Index hidden = p.hidden_size();
  const Index in = p.input_size();
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  auto pre = [&](const LstmGate& g, Index j) {
    double z = g.bias.value()[j];
    for (Index k = 0; k < in; ++k) z += g.input_weight.value()[j * in + k] * x[static_cast<std::size_t>(k)];
    for (Index k = 0; k < hidden; ++k)
      z += g.hidden_weight.value()[j * hidden + k] * prev.h[static_cast<std::size_t>(k)];
    return z;
  };
  ScalarLstmState next{std::vector<double>(static_cast<std::size_t>(hidden)),
                       std::vector<double>(static_cast<std::size_t>(hidden))};
  for (Index j = 0; j < hidden; ++j) {
    const double i_t = sig(pre(p.input, j));
    const double f_t = sig(pre(p.forget, j));
    const double o_t = sig(pre(p.output, j));
    const double g_t = std::tanh(pre(p.modulation, j));
    const auto u = static_cast<std::size_t>(j);
    next.c[u] = f_t * prev.c[u] + i_t * g_t;
    next.h[u] = o_t * std::tanh(next.c[u]);
  }
  return next;
}

inline LstmParams random_lstm(Rng& rng, Index in, Index hidden, double scale = 0.5) {
  auto gate = [&] {
    return LstmGate{Var::parameter(random_tensor(rng, {hidden, in}, scale)),
                    Var::parameter(random_tensor(rng, {hidden, hidden}, scale)),
                    Var::parameter(random_tensor(rng, {hidden}, scale))};
  };
  LstmParams p;
  p.input = gate();
  p.forget = gate();
  p.output = gate();
  p.modulation = gate();
  return p;
}

// Every dimension at most 8.
inline ModelConfig tiny_config(Variant variant) {
  ModelConfig cfg;
  cfg.d_saliency = 5;
  cfg.d_speaker_feat = 4;
  cfg.d_visual_hidden = 3;
  cfg.d_embed = 4;
  cfg.d_lstm_hidden = 3;
  cfg.vocab_size = 7;
  cfg.variant = variant;
  return cfg;
}

inline SampleInput random_sample(Rng& rng, const ModelConfig& cfg, Index length = 3) {
  SampleInput s;
  s.saliency = random_tensor(rng, {cfg.d_saliency});
  s.speaker = random_tensor(rng, {cfg.d_speaker_feat});
  s.head_loc = Tensor::vector({rng.uniform(), rng.uniform()});
  for (Index t = 0; t < length; ++t) s.tokens.push_back(static_cast<Index>(rng.below(cfg.vocab_size)));
  return s;
}

// Random parameters with a larger spread than Glorot so ReLU units are not
// all dead and the gradient check exercises every path.
inline ModelParams random_params(Rng& rng, const ModelConfig& cfg, double scale = 0.8) {
  ModelParams p = zero_params(cfg);
  for (auto [name, v] : p.named()) v.assign(random_tensor(rng, v.shape(), scale));
  return p;
}

inline std::vector<Variant> all_variants() {
  return {Variant::visual_only, Variant::text_only, Variant::multimodal};
}

}  // namespace arvsu::testing

#endif  // ARVSU_TESTS_TEST_SUPPORT_HPP
