#include "arvsu/layers.hpp"

#include <cmath>

namespace arvsu {

double glorot_limit(Index fan_in, Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

DenseLayer DenseLayer::zeros(Index in, Index out, Activation act) {
  return {Var::parameter(Tensor::zeros({out, in})), Var::parameter(Tensor::zeros({out})), act};
}

DenseLayer DenseLayer::glorot(Index in, Index out, Activation act, Rng& rng) {
  const double a = glorot_limit(in, out);
  return {Var::parameter(rng.uniform_tensor({out, in}, -a, a)), Var::parameter(Tensor::zeros({out})), act};
}

Var dense_forward(const DenseLayer& layer, const Var& x) {
  if (x.value().rank() != 1 || x.value().size() != layer.in_features())
    throw DimensionError("dense_forward: input " + shape_string(x.shape()) + " for layer " +
                         shape_string(layer.weight.shape()));
  Var y = matmul(layer.weight, x) + layer.bias;
  return layer.activation == Activation::relu ? relu(y) : y;
}

Var embed(const EmbeddingLayer& layer, Index token_index) {
  if (token_index < 0 || token_index >= layer.vocab_size())
    throw DomainError("embed: token index " + std::to_string(token_index) + " outside vocabulary of size " +
                      std::to_string(layer.vocab_size()));
  return row(layer.table, token_index);
}

namespace {

LstmGate zero_gate(Index in, Index hidden) {
  return {Var::parameter(Tensor::zeros({hidden, in})), Var::parameter(Tensor::zeros({hidden, hidden})),
          Var::parameter(Tensor::zeros({hidden}))};
}

LstmGate glorot_gate(Index in, Index hidden, Rng& rng, double bias) {
  const double ax = glorot_limit(in, hidden);
  const double ah = glorot_limit(hidden, hidden);
  Var wx = Var::parameter(rng.uniform_tensor({hidden, in}, -ax, ax));
  Var wh = Var::parameter(rng.uniform_tensor({hidden, hidden}, -ah, ah));
  return {wx, wh, Var::parameter(Tensor::constant({hidden}, bias))};
}

Var gate_preactivation(const LstmGate& g, const Var& x, const Var& h) {
  return matmul(g.input_weight, x) + matmul(g.hidden_weight, h) + g.bias;
}

}  // namespace

Index LstmParams::parameter_count() const {
  const Index in = input_size();
  const Index h = hidden_size();
  return 4 * (h * in + h * h + h);
}

LstmParams LstmParams::zeros(Index input_size, Index hidden_size) {
  return {zero_gate(input_size, hidden_size), zero_gate(input_size, hidden_size),
          zero_gate(input_size, hidden_size), zero_gate(input_size, hidden_size)};
}

LstmParams LstmParams::glorot(Index input_size, Index hidden_size, Rng& rng, double forget_bias) {
  LstmParams p;
  p.input = glorot_gate(input_size, hidden_size, rng, 0.0);
  p.forget = glorot_gate(input_size, hidden_size, rng, forget_bias);
  p.output = glorot_gate(input_size, hidden_size, rng, 0.0);
  p.modulation = glorot_gate(input_size, hidden_size, rng, 0.0);
  return p;
}

std::vector<std::pair<std::string, Var>> LstmParams::named() const {
  std::vector<std::pair<std::string, Var>> out;
  const std::pair<const char*, const LstmGate*> gates[] = {
      {"input", &input}, {"forget", &forget}, {"output", &output}, {"modulation", &modulation}};
  for (const auto& [tag, g] : gates) {
    const std::string prefix = std::string("lstm.") + tag;
    out.emplace_back(prefix + ".input_weight", g->input_weight);
    out.emplace_back(prefix + ".hidden_weight", g->hidden_weight);
    out.emplace_back(prefix + ".bias", g->bias);
  }
  return out;
}

LstmState LstmState::zeros(Index hidden_size) {
  return {Var::constant(Tensor::zeros({hidden_size})), Var::constant(Tensor::zeros({hidden_size}))};
}

LstmState lstm_step(const LstmParams& p, const Var& x, const LstmState& prev) {
  if (x.value().rank() != 1 || x.value().size() != p.input_size())
    throw DimensionError("lstm_step: input " + shape_string(x.shape()) + " for input size " +
                         std::to_string(p.input_size()));
  if (prev.hidden.value().size() != p.hidden_size() || prev.cell.value().size() != p.hidden_size())
    throw DimensionError("lstm_step: state size does not match hidden size " + std::to_string(p.hidden_size()));

  const Var i = sigmoid(gate_preactivation(p.input, x, prev.hidden));
  const Var f = sigmoid(gate_preactivation(p.forget, x, prev.hidden));
  const Var o = sigmoid(gate_preactivation(p.output, x, prev.hidden));
  const Var g = tanh_(gate_preactivation(p.modulation, x, prev.hidden));
  Var c = f * prev.cell + i * g;
  Var h = o * tanh_(c);
  return {std::move(c), std::move(h)};
}

LstmState lstm_run(const LstmParams& p, std::span<const Var> sequence, const LstmState& initial) {
  LstmState state = initial;
  for (const Var& x : sequence) state = lstm_step(p, x, state);
  return state;
}

Var lstm_encode(const LstmParams& p, std::span<const Var> sequence) {
  if (sequence.empty()) throw DomainError("lstm_encode: empty sequence");
  return lstm_run(p, sequence, LstmState::zeros(p.hidden_size())).hidden;
}

}  // namespace arvsu
