#include <cmath>
#include <cstdio>

#include "arvsu/corpus.hpp"

namespace arvsu {

std::string_view signal_name(SyntheticSignal s) {
  switch (s) {
    case SyntheticSignal::visual: return "visual";
    case SyntheticSignal::text: return "text";
    case SyntheticSignal::both: return "both";
  }
  return "unknown";
}

SyntheticSignal parse_signal(std::string_view name) {
  if (name == "visual") return SyntheticSignal::visual;
  if (name == "text") return SyntheticSignal::text;
  if (name == "both") return SyntheticSignal::both;
  throw DomainError("unknown signal '" + std::string(name) + "' (expected visual, text or both)");
}

namespace {

const std::vector<std::string> kFillers = {
    "look", "at",    "the",   "this",  "is",   "so",    "really", "what",  "a",     "nice",  "day",   "here",
    "now",  "think", "maybe", "we",    "can",  "go",    "just",   "some",  "very",  "right", "today", "again"};

// Cue groups; each group is a set of interchangeable words.
const std::vector<std::vector<std::string>> kClassCues = {
    {"tree", "statue", "painting"}, {"camera", "photo", "smile"}, {"everyone", "alone", "wonder"}};
const std::vector<std::vector<std::string>> kBitCues = {{"north", "red", "morning"}, {"south", "blue", "evening"}};

Eigen::MatrixXd random_directions(Index count, Index dim, Rng& rng) {
  Eigen::MatrixXd m(count, dim);
  for (Index r = 0; r < count; ++r) {
    for (Index c = 0; c < dim; ++c) m(r, c) = rng.normal();
    m.row(r) /= m.row(r).norm();
  }
  return m;
}

// Largest-remainder apportionment of n over the proportions.
std::array<Index, 3> apportion(Index n, const std::array<double, 3>& proportions) {
  double total = 0.0;
  for (double p : proportions) {
    if (!(p > 0.0)) throw DomainError("synthetic: class proportions must be positive");
    total += p;
  }
  std::array<Index, 3> counts{};
  std::array<double, 3> remainder{};
  Index assigned = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double exact = static_cast<double>(n) * proportions[c] / total;
    counts[c] = static_cast<Index>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(counts[c]);
    assigned += counts[c];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 3; ++c)
      if (remainder[c] > remainder[best]) best = c;
    ++counts[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return counts;
}

}  // namespace

SyntheticLayout synthetic_layout(const ModelConfig& cfg, std::uint64_t seed, const SyntheticOptions& opts) {
  Rng rng(seed ^ 0x5a17e11a9e5eedULL);
  SyntheticLayout layout;
  layout.fillers = kFillers;
  switch (opts.signal) {
    case SyntheticSignal::visual:
      layout.saliency_prototypes = random_directions(3, cfg.d_saliency, rng);
      layout.speaker_prototypes = random_directions(3, cfg.d_speaker_feat, rng);
      break;
    case SyntheticSignal::text:
      layout.cues = kClassCues;
      break;
    case SyntheticSignal::both:
      layout.saliency_prototypes = random_directions(2, cfg.d_saliency, rng);
      layout.speaker_prototypes = random_directions(2, cfg.d_speaker_feat, rng);
      layout.cues = kBitCues;
      break;
  }
  return layout;
}

std::vector<CorpusRecord> generate_synthetic(Index n, const ModelConfig& cfg, std::uint64_t seed,
                                             const SyntheticOptions& opts) {
  if (n < 30) throw DomainError("generate_synthetic: n must be at least 30, got " + std::to_string(n));
  if (opts.min_filler < 0 || opts.max_filler < opts.min_filler)
    throw DomainError("generate_synthetic: invalid filler length range");
  const SyntheticLayout layout = synthetic_layout(cfg, seed, opts);
  Rng rng(seed);

  const auto counts = apportion(n, opts.proportions);
  std::vector<Index> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (Index c = 0; c < 3; ++c) labels.insert(labels.end(), static_cast<std::size_t>(counts[c]), c);
  rng.shuffle(labels);

  std::vector<CorpusRecord> records;
  records.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    CorpusRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "synth-%06lld", static_cast<long long>(i));
    r.record_id = id;
    r.label = labels[static_cast<std::size_t>(i)];

    // Which visual prototype and cue group this sample carries (-1: none).
    Index visual_key = -1;
    Index cue_key = -1;
    switch (opts.signal) {
      case SyntheticSignal::visual: visual_key = r.label; break;
      case SyntheticSignal::text: cue_key = r.label; break;
      case SyntheticSignal::both:
        if (r.label == 0) {
          visual_key = static_cast<Index>(rng.below(2));
          cue_key = visual_key;
        } else {
          visual_key = r.label == 1 ? 0 : 1;
          cue_key = r.label == 1 ? 1 : 0;
        }
        break;
    }

    r.saliency = Eigen::VectorXd(cfg.d_saliency);
    for (Index k = 0; k < cfg.d_saliency; ++k) r.saliency[k] = opts.noise * rng.normal();
    r.speaker = Eigen::VectorXd(cfg.d_speaker_feat);
    for (Index k = 0; k < cfg.d_speaker_feat; ++k) r.speaker[k] = opts.noise * rng.normal();
    if (visual_key >= 0) {
      r.saliency += opts.amplitude * layout.saliency_prototypes.row(visual_key).transpose();
      r.speaker += opts.amplitude * layout.speaker_prototypes.row(visual_key).transpose();
    }
    r.head_loc = {rng.uniform(), rng.uniform()};

    const Index length =
        opts.min_filler + static_cast<Index>(rng.below(static_cast<std::uint64_t>(opts.max_filler - opts.min_filler + 1)));
    for (Index k = 0; k < length; ++k) r.tokens.push_back(layout.fillers[rng.below(layout.fillers.size())]);
    if (cue_key >= 0) {
      const auto& group = layout.cues[static_cast<std::size_t>(cue_key)];
      const std::string& cue = group[rng.below(group.size())];
      const auto pos = static_cast<std::ptrdiff_t>(rng.below(r.tokens.size() + 1));
      r.tokens.insert(r.tokens.begin() + pos, cue);
    }
    for (const auto& t : r.tokens) r.utterance += (r.utterance.empty() ? "" : " ") + t;

    switch (r.label) {
      case 0: r.flags = {AddresseeFlag::line_of_sight}; break;
      case 1: r.flags = {AddresseeFlag::photographer}; break;
      default:
        r.flags = {rng.below(2) ? AddresseeFlag::monologue : AddresseeFlag::others};
        break;
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace arvsu
