#ifndef ARVSU_LAYERS_HPP
#define ARVSU_LAYERS_HPP

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "arvsu/autodiff.hpp"

namespace arvsu {

enum class Activation { none, relu };

// Fully connected layer: activation(W x + b), W is [out x in].
struct DenseLayer {
  Var weight;
  Var bias;
  Activation activation = Activation::none;

  Index in_features() const { return weight.value().cols(); }
  Index out_features() const { return weight.value().rows(); }

  static DenseLayer zeros(Index in, Index out, Activation act);
  // Glorot-uniform weights, zero bias.
  static DenseLayer glorot(Index in, Index out, Activation act, Rng& rng);
};

Var dense_forward(const DenseLayer& layer, const Var& x);

// Token-index lookup table of shape [vocab x d_embed].
struct EmbeddingLayer {
  Var table;

  Index vocab_size() const { return table.value().rows(); }
  Index dim() const { return table.value().cols(); }
};

// Row lookup; equal to one-hot(index) * table without materializing the one-hot.
Var embed(const EmbeddingLayer& layer, Index token_index);

// The four gate blocks of a single-layer LSTM. Each gate owns an input
// matrix [hidden x input], a recurrent matrix [hidden x hidden] and a bias.
struct LstmGate {
  Var input_weight;
  Var hidden_weight;
  Var bias;
};

struct LstmParams {
  LstmGate input;
  LstmGate forget;
  LstmGate output;
  LstmGate modulation;

  Index input_size() const { return input.input_weight.value().cols(); }
  Index hidden_size() const { return input.input_weight.value().rows(); }
  Index parameter_count() const;

  static LstmParams zeros(Index input_size, Index hidden_size);
  // Glorot-uniform weights, zero biases except the forget bias.
  static LstmParams glorot(Index input_size, Index hidden_size, Rng& rng, double forget_bias = 1.0);

  // Fixed traversal order used for serialization and gradient checks.
  std::vector<std::pair<std::string, Var>> named() const;
};

struct LstmState {
  Var cell;
  Var hidden;

  static LstmState zeros(Index hidden_size);
};

LstmState lstm_step(const LstmParams& p, const Var& x, const LstmState& prev);

// Runs the sequence from `initial` and returns the final state.
LstmState lstm_run(const LstmParams& p, std::span<const Var> sequence, const LstmState& initial);

// Final hidden state h_T from a zero initial state. Throws DomainError on an
// empty sequence.
Var lstm_encode(const LstmParams& p, std::span<const Var> sequence);

// Half-width of the Glorot-uniform range for a [fan_out x fan_in] matrix.
double glorot_limit(Index fan_in, Index fan_out);

}  // namespace arvsu

#endif  // ARVSU_LAYERS_HPP
