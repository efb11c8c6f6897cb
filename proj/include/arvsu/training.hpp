#ifndef ARVSU_TRAINING_HPP
#define ARVSU_TRAINING_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arvsu/corpus.hpp"
#include "arvsu/model.hpp"
#include "arvsu/text.hpp"

namespace arvsu {

inline constexpr double kLogClamp = 1e-12;

// -w[label] * log(max(probs[label], 1e-12)) as a scalar Var.
Var weighted_ce_loss(const Var& probs, Index label, const ClassWeights& weights);

// Mean of the per-sample weighted losses over `batch`.
Var batch_loss(const ModelParams& params, const ModelConfig& cfg, std::span<const Example> batch,
               const ClassWeights& weights);

// theta <- theta - lr * grad for every parameter, then clears gradients.
// Throws DomainError naming the first parameter without a gradient.
void sgd_step(const ModelParams& params, double learning_rate);

struct TrainConfig {
  double learning_rate = 0.001;
  Index batch_size = 64;
  Index max_epochs = 100;
  // Stop after this many consecutive epochs without a new best validation
  // accuracy; 0 disables early stopping.
  Index patience = 10;
  std::uint64_t seed = 0;
  ClassWeights class_weights;

  void validate() const;
};

struct EpochLog {
  Index epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct CheckpointMeta {
  Index epoch = 0;
  double val_accuracy = 0.0;
  std::uint64_t seed = 0;
};

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  Vocabulary vocab;
  CheckpointMeta meta;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
};

// Accuracy of argmax predictions over `data`.
double accuracy(const ModelParams& params, const ModelConfig& cfg, std::span<const Example> data);

// Seeded per-epoch shuffle, minibatch SGD on the class-weighted mean loss,
// and retention of the parameters from the epoch with the best validation
// accuracy (earliest epoch on ties). `initial` overrides the seeded
// initialization (for example with pretrained embeddings); it is copied.
TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set, const ModelConfig& model_cfg,
                  const TrainConfig& cfg, const Vocabulary& vocab, const std::optional<ModelParams>& initial = {});

// One JSON object per line: {"epoch":..,"train_loss":..,"val_accuracy":..}.
std::string format_epoch_log(std::span<const EpochLog> log);

inline constexpr char kCheckpointMagic[8] = {'A', 'R', 'V', 'S', 'U', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (all integers little-endian):
//   magic "ARVSUCKP" | u32 version | u64 payload length | payload | u64 checksum
// payload:
//   u64 config digest | u32+bytes canonical config | u32 epoch | f64 val accuracy
//   | u64 seed | u32 vocab count, then u16+bytes per token
//   | u32 tensor count, then per tensor: u16+bytes name, u8 rank, u64 dims, f64 values
// The checksum is 64-bit FNV-1a over every preceding byte.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Also rejects checkpoints whose config digest differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace arvsu

#endif  // ARVSU_TRAINING_HPP
