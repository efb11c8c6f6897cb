#include "arvsu/training.hpp"

#include <fstream>
#include <iterator>
#include <map>

#include <nlohmann/json.hpp>

#include "arvsu/kernels.hpp"
#include "binary_io.hpp"

namespace arvsu {

Var weighted_ce_loss(const Var& probs, Index label, const ClassWeights& weights) {
  if (label < 0 || label >= kNumClasses) throw DomainError("weighted_ce_loss: invalid label " + std::to_string(label));
  if (probs.value().rank() != 1 || probs.value().size() != kNumClasses)
    throw DimensionError("weighted_ce_loss: expected 3 class probabilities, got " + shape_string(probs.shape()));
  return scale(pick(log_clamped(probs, kLogClamp), label), -weights[label]);
}

Var batch_loss(const ModelParams& params, const ModelConfig& cfg, std::span<const Example> batch,
               const ClassWeights& weights) {
  if (batch.empty()) throw DomainError("batch_loss: empty batch");
  Var total;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Var loss = weighted_ce_loss(class_probabilities(params, cfg, batch[i].input), batch[i].label, weights);
    total = i == 0 ? loss : add(total, loss);
  }
  return scale(total, 1.0 / static_cast<double>(batch.size()));
}

void sgd_step(const ModelParams& params, double learning_rate) {
  const auto named = params.named();
  for (const auto& [name, v] : named)
    if (!v.has_grad()) throw DomainError("sgd_step: no gradient for parameter " + name);
  for (auto [name, v] : named) {
    v.apply_update(learning_rate);
    v.clear_grad();
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw DomainError("learning rate must be non-negative");
  if (batch_size < 1) throw DomainError("batch size must be at least 1");
  if (max_epochs < 1) throw DomainError("max epochs must be at least 1");
  if (patience < 0) throw DomainError("patience must be non-negative");
  for (double w : class_weights.w)
    if (!(w > 0.0)) throw DomainError("class weights must be positive");
}

double accuracy(const ModelParams& params, const ModelConfig& cfg, std::span<const Example> data) {
  if (data.empty()) throw DomainError("accuracy: empty dataset");
  std::size_t correct = 0;
  for (const auto& ex : data) correct += predict(params, cfg, ex.input) == ex.label;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set, const ModelConfig& model_cfg,
                  const TrainConfig& cfg, const Vocabulary& vocab, const std::optional<ModelParams>& initial) {
  if (train_set.empty() || val_set.empty()) throw DomainError("train: training and validation splits must be non-empty");
  cfg.validate();
  model_cfg.validate();

  Rng init_rng(cfg.seed);
  ModelParams params = initial ? initial->clone() : init_params(model_cfg, init_rng);
  params.check_against(model_cfg);
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  TrainResult result;
  result.best = Checkpoint{model_cfg, params.clone(), vocab, {0, -1.0, cfg.seed}};
  Index stale = 0;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const Example& ex = train_set[order[k]];
        const Var loss = weighted_ce_loss(class_probabilities(params, model_cfg, ex.input), ex.label,
                                          cfg.class_weights);
        loss_sum += loss.value().item();
        backward(scale(loss, inv));
      }
      sgd_step(params, cfg.learning_rate);
    }

    const EpochLog entry{epoch, loss_sum / static_cast<double>(train_set.size()),
                         accuracy(params, model_cfg, val_set)};
    result.log.push_back(entry);
    if (entry.val_accuracy > result.best.meta.val_accuracy) {
      result.best.params = params.clone();
      result.best.meta.epoch = epoch;
      result.best.meta.val_accuracy = entry.val_accuracy;
      stale = 0;
    } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

std::string format_epoch_log(std::span<const EpochLog> log) {
  std::string out;
  for (const auto& e : log) {
    nlohmann::json j = {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_accuracy", e.val_accuracy}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  ckpt.params.check_against(ckpt.config);
  if (ckpt.vocab.size() != ckpt.config.vocab_size && uses_text(ckpt.config.variant))
    throw ConfigMismatchError("checkpoint vocabulary size differs from the model config");

  binary::Writer payload;
  payload.u64(ckpt.config.digest());
  payload.str32(ckpt.config.canonical());
  payload.u32(static_cast<std::uint32_t>(ckpt.meta.epoch));
  payload.f64(ckpt.meta.val_accuracy);
  payload.u64(ckpt.meta.seed);
  const auto entries = ckpt.vocab.entries();
  payload.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& t : entries) payload.str16(t);
  const auto named = ckpt.params.named();
  payload.u32(static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, v] : named) {
    const Tensor& t = v.value();
    payload.str16(name);
    payload.u8(static_cast<std::uint8_t>(t.rank()));
    for (Index d : t.shape()) payload.u64(static_cast<std::uint64_t>(d));
    for (Index i = 0; i < t.size(); ++i) payload.f64(t[i]);
  }

  binary::Writer out;
  out.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  out.u32(kCheckpointVersion);
  out.u64(payload.buffer().size());
  out.bytes(payload.buffer().data(), payload.buffer().size());
  out.u64(fnv1a64(out.buffer().data(), out.buffer().size()));
  return std::move(out.buffer());
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  binary::Reader header(bytes.data(), bytes.size(), "checkpoint");
  char magic[8];
  header.bytes(magic, sizeof magic);
  if (!std::equal(std::begin(magic), std::end(magic), std::begin(kCheckpointMagic)))
    throw FormatError("not a checkpoint file (bad magic)");
  const std::uint32_t version = header.u32();
  if (version != kCheckpointVersion)
    throw VersionError("checkpoint format version " + std::to_string(version) + ", expected " +
                       std::to_string(kCheckpointVersion));
  const std::uint64_t payload_len = header.u64();
  const std::size_t body_end = header.position() + payload_len;
  if (payload_len > bytes.size() || bytes.size() - header.position() < payload_len + 8)
    throw TruncatedError("checkpoint is truncated: payload announces " + std::to_string(payload_len) + " bytes");
  binary::Reader tail(bytes.data() + body_end, bytes.size() - body_end, "checkpoint checksum");
  const std::uint64_t stored = tail.u64();
  if (stored != fnv1a64(bytes.data(), body_end)) throw ChecksumError("checkpoint checksum mismatch");
  if (tail.remaining() != 0) throw FormatError("trailing bytes after checkpoint checksum");

  binary::Reader r(bytes.data() + header.position(), payload_len, "checkpoint payload");
  Checkpoint ckpt;
  const std::uint64_t digest = r.u64();
  ckpt.config = ModelConfig::from_canonical(r.str32());
  if (ckpt.config.digest() != digest) throw ConfigMismatchError("checkpoint config digest does not match its config");
  ckpt.meta.epoch = r.u32();
  ckpt.meta.val_accuracy = r.f64();
  ckpt.meta.seed = r.u64();
  std::vector<std::string> tokens(r.u32());
  for (auto& t : tokens) t = r.str16();
  ckpt.vocab = Vocabulary::from_tokens(tokens);

  std::map<std::string, Tensor> tensors;
  const std::uint32_t count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.str16();
    const std::uint8_t rank = r.u8();
    if (rank > 2) throw FormatError("tensor " + name + " has rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<Index>(r.u64());
    Tensor t = Tensor::zeros(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = r.f64();
    if (!tensors.emplace(std::move(name), std::move(t)).second) throw FormatError("duplicate tensor in checkpoint");
  }
  if (r.remaining() != 0) throw FormatError("unexpected bytes at the end of the checkpoint payload");

  ckpt.params = zero_params(ckpt.config);
  for (auto [name, v] : ckpt.params.named()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint lacks tensor " + name);
    if (it->second.shape() != v.shape())
      throw ConfigMismatchError("tensor " + name + " has shape " + shape_string(it->second.shape()));
    v.assign(it->second);
    tensors.erase(it);
  }
  if (!tensors.empty()) throw FormatError("checkpoint has unexpected tensor " + tensors.begin()->first);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_checkpoint(bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.config.digest() != expected.digest())
    throw ConfigMismatchError("checkpoint config {" + ckpt.config.canonical() + "} differs from expected {" +
                              expected.canonical() + "}");
  return ckpt;
}

}  // namespace arvsu
