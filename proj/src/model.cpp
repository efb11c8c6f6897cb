#include "arvsu/model.hpp"

#include <map>
#include <sstream>

#include "arvsu/kernels.hpp"

namespace arvsu {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::visual_only: return "visual_only";
    case Variant::text_only: return "text_only";
    case Variant::multimodal: return "multimodal";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "visual_only") return Variant::visual_only;
  if (name == "text_only") return Variant::text_only;
  if (name == "multimodal") return Variant::multimodal;
  throw DomainError("unknown variant '" + std::string(name) +
                    "' (expected one of: visual_only, text_only, multimodal)");
}

void ModelConfig::validate() const {
  const std::pair<const char*, Index> dims[] = {
      {"d_saliency", d_saliency},   {"d_speaker_feat", d_speaker_feat}, {"d_visual_hidden", d_visual_hidden},
      {"d_embed", d_embed},         {"d_lstm_hidden", d_lstm_hidden},   {"vocab_size", vocab_size}};
  for (const auto& [name, d] : dims)
    if (d <= 0) throw DomainError(std::string("model config: ") + name + " must be positive");
  if (d_head_loc != kHeadLocDim) throw DomainError("model config: d_head_loc must be 2");
  if (n_classes != kNumClasses) throw DomainError("model config: n_classes must be 3");
}

Index ModelConfig::head_input_dim() const {
  switch (variant) {
    case Variant::visual_only: return 2 * d_visual_hidden;
    case Variant::text_only: return d_lstm_hidden;
    case Variant::multimodal: return 2 * d_visual_hidden + d_lstm_hidden;
  }
  return 0;
}

Index ModelConfig::parameter_count() const {
  Index n = n_classes * head_input_dim() + n_classes;
  if (uses_visual(variant)) {
    n += d_visual_hidden * d_saliency + d_visual_hidden;
    n += d_visual_hidden * (d_speaker_feat + d_head_loc) + d_visual_hidden;
  }
  if (uses_text(variant)) {
    n += vocab_size * d_embed;
    n += 4 * (d_lstm_hidden * d_embed + d_lstm_hidden * d_lstm_hidden + d_lstm_hidden);
  }
  return n;
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "d_saliency=" << d_saliency << ";d_speaker_feat=" << d_speaker_feat << ";d_head_loc=" << d_head_loc
     << ";d_visual_hidden=" << d_visual_hidden << ";d_embed=" << d_embed << ";d_lstm_hidden=" << d_lstm_hidden
     << ";n_classes=" << n_classes << ";vocab_size=" << vocab_size << ";variant=" << variant_name(variant);
  return os.str();
}

ModelConfig ModelConfig::from_canonical(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ';')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw FormatError("model config: malformed entry '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("model config: missing key ") + key);
    return it->second;
  };
  auto get_int = [&](const char* key) -> Index {
    try {
      return static_cast<Index>(std::stoll(get(key)));
    } catch (const std::logic_error&) {
      throw FormatError(std::string("model config: bad integer for ") + key);
    }
  };
  ModelConfig c;
  c.d_saliency = get_int("d_saliency");
  c.d_speaker_feat = get_int("d_speaker_feat");
  c.d_head_loc = get_int("d_head_loc");
  c.d_visual_hidden = get_int("d_visual_hidden");
  c.d_embed = get_int("d_embed");
  c.d_lstm_hidden = get_int("d_lstm_hidden");
  c.n_classes = get_int("n_classes");
  c.vocab_size = get_int("vocab_size");
  c.variant = parse_variant(get("variant"));
  c.validate();
  return c;
}

std::uint64_t ModelConfig::digest() const { return fnv1a64(canonical()); }

std::vector<std::pair<std::string, Var>> ModelParams::named() const {
  std::vector<std::pair<std::string, Var>> out;
  if (saliency) {
    out.emplace_back("saliency.weight", saliency->weight);
    out.emplace_back("saliency.bias", saliency->bias);
  }
  if (speaker) {
    out.emplace_back("speaker.weight", speaker->weight);
    out.emplace_back("speaker.bias", speaker->bias);
  }
  if (embedding) out.emplace_back("embedding.table", embedding->table);
  if (lstm)
    for (auto& entry : lstm->named()) out.push_back(std::move(entry));
  out.emplace_back("head.weight", head.weight);
  out.emplace_back("head.bias", head.bias);
  return out;
}

std::vector<Var> ModelParams::all() const {
  std::vector<Var> out;
  for (auto& [name, v] : named()) out.push_back(v);
  return out;
}

Index ModelParams::parameter_count() const {
  Index n = 0;
  for (const Var& v : all()) n += v.value().size();
  return n;
}

void ModelParams::clear_grads() const {
  for (Var v : all()) v.clear_grad();
}

namespace {

Var copy_param(const Var& v) { return Var::parameter(v.value()); }

DenseLayer copy_dense(const DenseLayer& d) { return {copy_param(d.weight), copy_param(d.bias), d.activation}; }

LstmGate copy_gate(const LstmGate& g) {
  return {copy_param(g.input_weight), copy_param(g.hidden_weight), copy_param(g.bias)};
}

void expect_shape(const Var& v, const Shape& shape, const std::string& name) {
  if (v.shape() != shape)
    throw ConfigMismatchError("parameter " + name + " has shape " + shape_string(v.shape()) + ", config expects " +
                              shape_string(shape));
}

}  // namespace

ModelParams ModelParams::clone() const {
  ModelParams p;
  if (saliency) p.saliency = copy_dense(*saliency);
  if (speaker) p.speaker = copy_dense(*speaker);
  if (embedding) p.embedding = EmbeddingLayer{copy_param(embedding->table)};
  if (lstm)
    p.lstm = LstmParams{copy_gate(lstm->input), copy_gate(lstm->forget), copy_gate(lstm->output),
                        copy_gate(lstm->modulation)};
  p.head = copy_dense(head);
  return p;
}

void ModelParams::check_against(const ModelConfig& cfg) const {
  cfg.validate();
  const Index vh = cfg.d_visual_hidden;
  if (uses_visual(cfg.variant) != (saliency.has_value() && speaker.has_value()))
    throw ConfigMismatchError("visual streams do not match variant " + std::string(variant_name(cfg.variant)));
  if (uses_text(cfg.variant) != (embedding.has_value() && lstm.has_value()))
    throw ConfigMismatchError("utterance stream does not match variant " + std::string(variant_name(cfg.variant)));
  if (saliency) {
    expect_shape(saliency->weight, {vh, cfg.d_saliency}, "saliency.weight");
    expect_shape(saliency->bias, {vh}, "saliency.bias");
    expect_shape(speaker->weight, {vh, cfg.d_speaker_feat + cfg.d_head_loc}, "speaker.weight");
    expect_shape(speaker->bias, {vh}, "speaker.bias");
  }
  if (embedding) {
    expect_shape(embedding->table, {cfg.vocab_size, cfg.d_embed}, "embedding.table");
    const Index h = cfg.d_lstm_hidden;
    for (const auto& [name, v] : lstm->named()) {
      const bool recurrent = name.ends_with(".hidden_weight");
      const bool is_bias = name.ends_with(".bias");
      expect_shape(v, is_bias ? Shape{h} : recurrent ? Shape{h, h} : Shape{h, cfg.d_embed}, name);
    }
  }
  expect_shape(head.weight, {cfg.n_classes, cfg.head_input_dim()}, "head.weight");
  expect_shape(head.bias, {cfg.n_classes}, "head.bias");
}

ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams p;
  if (uses_visual(cfg.variant)) {
    p.saliency = DenseLayer::glorot(cfg.d_saliency, cfg.d_visual_hidden, Activation::relu, rng);
    p.speaker = DenseLayer::glorot(cfg.d_speaker_feat + cfg.d_head_loc, cfg.d_visual_hidden, Activation::relu, rng);
  }
  if (uses_text(cfg.variant)) {
    Tensor table = Tensor::zeros({cfg.vocab_size, cfg.d_embed});
    for (Index i = 2 * cfg.d_embed; i < table.size(); ++i) table[i] = rng.uniform(-0.05, 0.05);
    p.embedding = EmbeddingLayer{Var::parameter(std::move(table))};
    p.lstm = LstmParams::glorot(cfg.d_embed, cfg.d_lstm_hidden, rng);
  }
  p.head = DenseLayer::glorot(cfg.head_input_dim(), cfg.n_classes, Activation::none, rng);
  return p;
}

ModelParams zero_params(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  if (uses_visual(cfg.variant)) {
    p.saliency = DenseLayer::zeros(cfg.d_saliency, cfg.d_visual_hidden, Activation::relu);
    p.speaker = DenseLayer::zeros(cfg.d_speaker_feat + cfg.d_head_loc, cfg.d_visual_hidden, Activation::relu);
  }
  if (uses_text(cfg.variant)) {
    p.embedding = EmbeddingLayer{Var::parameter(Tensor::zeros({cfg.vocab_size, cfg.d_embed}))};
    p.lstm = LstmParams::zeros(cfg.d_embed, cfg.d_lstm_hidden);
  }
  p.head = DenseLayer::zeros(cfg.head_input_dim(), cfg.n_classes, Activation::none);
  return p;
}

namespace {

void check_input(const Tensor& t, Index dim, const char* what) {
  if (t.rank() != 1 || t.size() != dim)
    throw DimensionError(std::string("sample ") + what + " has shape " + shape_string(t.shape()) +
                         ", expected [" + std::to_string(dim) + "]");
}

Var visual_stream(const ModelParams& p, const ModelConfig& cfg, const SampleInput& s) {
  check_input(s.saliency, cfg.d_saliency, "saliency features");
  check_input(s.speaker, cfg.d_speaker_feat, "speaker features");
  check_input(s.head_loc, cfg.d_head_loc, "head location");
  const Var x1 = dense_forward(*p.saliency, Var::constant(s.saliency));
  const Var i2 = concat(Var::constant(s.speaker), Var::constant(s.head_loc));
  const Var x2 = dense_forward(*p.speaker, i2);
  return concat(x1, x2);
}

Var utterance_stream(const ModelParams& p, const SampleInput& s) {
  std::vector<Var> embedded;
  embedded.reserve(s.tokens.size());
  for (Index t : s.tokens) embedded.push_back(embed(*p.embedding, t));
  return lstm_encode(*p.lstm, embedded);
}

void require_variant(const ModelConfig& cfg, Variant expected) {
  if (cfg.variant != expected)
    throw DomainError("model configured as " + std::string(variant_name(cfg.variant)) + ", called as " +
                      std::string(variant_name(expected)));
}

}  // namespace

Var logits(const ModelParams& params, const ModelConfig& cfg, const SampleInput& s) {
  Var fused;
  switch (cfg.variant) {
    case Variant::visual_only: fused = visual_stream(params, cfg, s); break;
    case Variant::text_only: fused = utterance_stream(params, s); break;
    case Variant::multimodal: fused = concat(visual_stream(params, cfg, s), utterance_stream(params, s)); break;
  }
  return dense_forward(params.head, fused);
}

Var class_probabilities(const ModelParams& params, const ModelConfig& cfg, const SampleInput& s) {
  return softmax(logits(params, cfg, s));
}

Var forward(const ModelParams& params, const ModelConfig& cfg, const SampleInput& s) {
  require_variant(cfg, Variant::multimodal);
  return class_probabilities(params, cfg, s);
}

Var forward_visual_only(const ModelParams& params, const ModelConfig& cfg, const SampleInput& s) {
  require_variant(cfg, Variant::visual_only);
  return class_probabilities(params, cfg, s);
}

Var forward_text_only(const ModelParams& params, const ModelConfig& cfg, const SampleInput& s) {
  require_variant(cfg, Variant::text_only);
  return class_probabilities(params, cfg, s);
}

Index predict(const ModelParams& params, const ModelConfig& cfg, const SampleInput& s) {
  return kernels::argmax(class_probabilities(params, cfg, s).value().data());
}

}  // namespace arvsu
