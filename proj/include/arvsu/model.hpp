#ifndef ARVSU_MODEL_HPP
#define ARVSU_MODEL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "arvsu/layers.hpp"

namespace arvsu {

enum class Variant { visual_only, text_only, multimodal };

std::string_view variant_name(Variant v);
// Throws DomainError listing the three accepted names.
Variant parse_variant(std::string_view name);

inline bool uses_visual(Variant v) { return v != Variant::text_only; }
inline bool uses_text(Variant v) { return v != Variant::visual_only; }

inline constexpr Index kNumClasses = 3;
inline constexpr Index kHeadLocDim = 2;

struct ModelConfig {
  Index d_saliency = 4096;
  Index d_speaker_feat = 4096;
  Index d_head_loc = kHeadLocDim;
  Index d_visual_hidden = 256;
  Index d_embed = 100;
  Index d_lstm_hidden = 128;
  Index n_classes = kNumClasses;
  // Rows of the embedding table, including the reserved OOV and PAD indices.
  Index vocab_size = 2;
  Variant variant = Variant::multimodal;

  void validate() const;
  // Width of the fused vector fed to the head for this variant.
  Index head_input_dim() const;
  // Closed-form count of every learnable scalar for this variant.
  Index parameter_count() const;

  // Canonical "key=value;..." text, stable across versions of this format.
  std::string canonical() const;
  static ModelConfig from_canonical(const std::string& text);
  std::uint64_t digest() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Every learnable tensor of the classifier. Streams absent from the variant
// are empty optionals.
struct ModelParams {
  std::optional<DenseLayer> saliency;
  std::optional<DenseLayer> speaker;   // input is speaker features + head location
  std::optional<EmbeddingLayer> embedding;
  std::optional<LstmParams> lstm;
  DenseLayer head;

  // Name/tensor pairs in fixed order: saliency, speaker, embedding, lstm, head.
  std::vector<std::pair<std::string, Var>> named() const;
  std::vector<Var> all() const;
  Index parameter_count() const;
  void clear_grads() const;

  // Deep copy; the result shares no nodes with *this.
  ModelParams clone() const;
  // Verifies every tensor shape against cfg.
  void check_against(const ModelConfig& cfg) const;
};

// Seeded initialization: Glorot-uniform weights, zero biases, forget bias 1,
// embedding rows uniform(-0.05, 0.05) except the zero OOV and PAD rows.
ModelParams init_params(const ModelConfig& cfg, Rng& rng);
ModelParams zero_params(const ModelConfig& cfg);

struct SampleInput {
  Tensor saliency;
  Tensor speaker;              // speaker-appearance features (without head location)
  Tensor head_loc;             // normalized (x, y) of the speaker's head
  std::vector<Index> tokens;   // vocabulary indices
};

// Pre-softmax class scores for whichever variant cfg names.
Var logits(const ModelParams& params, const ModelConfig& cfg, const SampleInput& s);
// softmax(logits) for whichever variant cfg names.
Var class_probabilities(const ModelParams& params, const ModelConfig& cfg, const SampleInput& s);

// Variant-specific entry points; each throws DomainError if cfg names a
// different variant.
Var forward(const ModelParams& params, const ModelConfig& cfg, const SampleInput& s);
Var forward_visual_only(const ModelParams& params, const ModelConfig& cfg, const SampleInput& s);
Var forward_text_only(const ModelParams& params, const ModelConfig& cfg, const SampleInput& s);

// argmax of the class probabilities, ties to the lowest index.
Index predict(const ModelParams& params, const ModelConfig& cfg, const SampleInput& s);

}  // namespace arvsu

#endif  // ARVSU_MODEL_HPP
