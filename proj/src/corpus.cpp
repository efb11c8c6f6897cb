#include "arvsu/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace arvsu {

std::vector<AddresseeFlag> FlagSet::members() const {
  std::vector<AddresseeFlag> out;
  for (std::size_t i = 0; i < kNumFlags; ++i)
    if (contains(static_cast<AddresseeFlag>(i))) out.push_back(static_cast<AddresseeFlag>(i));
  return out;
}

namespace {

constexpr std::string_view kFlagNames[kNumFlags] = {"LineOfSight", "Photographer", "Monologue", "Others",
                                                    "NotApplicable"};
constexpr std::string_view kClassDisplay[3] = {"Line-of-Sight Entities", "Photographer", "Others"};
constexpr std::string_view kClassKeys[3] = {"line_of_sight", "photographer", "others"};

void check_label(Index label) {
  if (label < 0 || label >= kNumClasses) throw DomainError("class label " + std::to_string(label) + " not in {0,1,2}");
}

}  // namespace

std::string_view flag_name(AddresseeFlag f) { return kFlagNames[static_cast<std::size_t>(f)]; }

AddresseeFlag parse_flag(std::string_view name) {
  for (std::size_t i = 0; i < kNumFlags; ++i)
    if (kFlagNames[i] == name) return static_cast<AddresseeFlag>(i);
  throw FormatError("unknown addressee flag '" + std::string(name) + "'");
}

std::string_view class_display_name(Index label) {
  check_label(label);
  return kClassDisplay[label];
}

std::string_view class_key(Index label) {
  check_label(label);
  return kClassKeys[label];
}

Index parse_class_key(std::string_view key) {
  for (Index c = 0; c < kNumClasses; ++c)
    if (kClassKeys[c] == key) return c;
  throw FormatError("unknown class '" + std::string(key) + "' (expected line_of_sight, photographer or others)");
}

ClassPriority parse_priority(std::string_view text) {
  ClassPriority p{};
  std::array<bool, 3> seen{};
  std::size_t n = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const Index c = parse_class_key(text.substr(start, comma - start));
    if (n >= 3 || seen[static_cast<std::size_t>(c)])
      throw FormatError("priority '" + std::string(text) + "' is not a permutation of the three classes");
    seen[static_cast<std::size_t>(c)] = true;
    p[n++] = static_cast<AddresseeClass>(c);
    start = comma + 1;
  }
  if (n != 3) throw FormatError("priority '" + std::string(text) + "' must name all three classes");
  return p;
}

std::string priority_string(const ClassPriority& priority) {
  std::string s;
  for (auto c : priority) {
    if (!s.empty()) s += ",";
    s += class_key(static_cast<Index>(c));
  }
  return s;
}

std::optional<Index> reorganize_label(FlagSet flags, const ClassPriority& priority) {
  if (flags.empty()) throw DomainError("reorganize_label: empty flag set");
  if (flags.contains(AddresseeFlag::not_applicable)) return std::nullopt;
  std::array<bool, 3> present{};
  present[0] = flags.contains(AddresseeFlag::line_of_sight);
  present[1] = flags.contains(AddresseeFlag::photographer);
  present[2] = flags.contains(AddresseeFlag::monologue) || flags.contains(AddresseeFlag::others);
  for (auto c : priority)
    if (present[static_cast<std::size_t>(c)]) return static_cast<Index>(c);
  return std::nullopt;
}

ClassWeights compute_class_weights(std::span<const Index> counts) {
  if (counts.size() != static_cast<std::size_t>(kNumClasses))
    throw DimensionError("compute_class_weights: expected 3 counts, got " + std::to_string(counts.size()));
  double total = 0.0;
  for (Index c : counts) {
    if (c <= 0) throw DomainError("compute_class_weights: every class count must be positive");
    total += static_cast<double>(c);
  }
  ClassWeights w;
  for (std::size_t c = 0; c < 3; ++c) w.w[c] = total / (3.0 * static_cast<double>(counts[c]));
  return w;
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  if (n < 5) throw DomainError("split: need at least 5 records, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);
  const std::size_t cut1 = 3 * n / 5;
  const std::size_t cut2 = 4 * n / 5;
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut1));
  out.val.assign(order.begin() + static_cast<std::ptrdiff_t>(cut1), order.begin() + static_cast<std::ptrdiff_t>(cut2));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(cut2), order.end());
  return out;
}

void CorpusRecord::validate() const {
  check_label(label);
  if (!saliency.allFinite() || !speaker.allFinite())
    throw DomainError("record " + record_id + " has non-finite features");
  for (double v : head_loc)
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("record " + record_id + " head location outside [0,1]");
}

std::array<double, 3> ClassStats::percent() const {
  std::array<double, 3> p{};
  for (std::size_t c = 0; c < 3; ++c)
    p[c] = total ? 100.0 * static_cast<double>(counts[c]) / static_cast<double>(total) : 0.0;
  return p;
}

std::array<double, kNumFlags> FlagStats::percent() const {
  std::array<double, kNumFlags> p{};
  for (std::size_t f = 0; f < kNumFlags; ++f)
    p[f] = total ? 100.0 * static_cast<double>(counts[f]) / static_cast<double>(total) : 0.0;
  return p;
}

ClassStats class_stats(std::span<const Index> labels) {
  ClassStats s;
  for (Index l : labels) {
    check_label(l);
    ++s.counts[static_cast<std::size_t>(l)];
    ++s.total;
  }
  return s;
}

ClassStats class_stats(std::span<const CorpusRecord> records) {
  std::vector<Index> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.label);
  return class_stats(labels);
}

FlagStats flag_stats(std::span<const RawAnnotation> annotations) {
  FlagStats s;
  for (const auto& a : annotations)
    for (auto f : a.flags.members()) {
      ++s.counts[static_cast<std::size_t>(f)];
      ++s.total;
    }
  return s;
}

namespace {

std::string stats_line(std::string_view name, Index count, double percent) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-24s %12lld %8.2f\n", std::string(name).c_str(), static_cast<long long>(count),
                percent);
  return buf;
}

std::string stats_header() {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-24s %12s %8s\n", "Class", "Utterances", "Percent");
  return buf;
}

}  // namespace

std::string render_class_stats(const ClassStats& stats) {
  std::string out = stats_header();
  const auto pct = stats.percent();
  for (Index c = 0; c < kNumClasses; ++c)
    out += stats_line(class_display_name(c), stats.counts[static_cast<std::size_t>(c)], pct[static_cast<std::size_t>(c)]);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-24s %12lld\n", "Total", static_cast<long long>(stats.total));
  return out + buf;
}

std::string render_flag_stats(const FlagStats& stats) {
  constexpr std::string_view names[kNumFlags] = {"Line-of-Sight Entities", "Photographer", "Monologue/Pondering",
                                                 "Others", "Not Applicable"};
  std::string out = stats_header();
  const auto pct = stats.percent();
  for (std::size_t f = 0; f < kNumFlags; ++f) out += stats_line(names[f], stats.counts[f], pct[f]);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-24s %12lld\n", "Total", static_cast<long long>(stats.total));
  return out + buf;
}

Eigen::VectorXd stub_features(std::string_view record_id, Index dim) {
  if (dim <= 0) throw DomainError("stub_features: dim must be positive");
  std::uint64_t seed = fnv1a64(record_id.data(), record_id.size());
  std::uint8_t dim_bytes[8];
  for (int i = 0; i < 8; ++i) dim_bytes[i] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(dim) >> (8 * i));
  seed = fnv1a64(dim_bytes, sizeof dim_bytes, seed);
  Rng rng(seed);
  Eigen::VectorXd v(dim);
  for (;;) {
    for (Index i = 0; i < dim; ++i) v[i] = rng.uniform(-1.0, 1.0);
    const double norm = v.norm();
    if (norm > 0.0) return v / norm;
  }
}

Example make_example(const CorpusRecord& record, const Vocabulary& vocab, Index max_tokens) {
  Example ex;
  ex.label = record.label;
  ex.input.saliency = Tensor::from_vector(record.saliency);
  ex.input.speaker = Tensor::from_vector(record.speaker);
  ex.input.head_loc = Tensor::vector({record.head_loc[0], record.head_loc[1]});
  ex.input.tokens = vocab.encode_all(record.tokens);
  if (max_tokens > 0 && static_cast<Index>(ex.input.tokens.size()) > max_tokens)
    ex.input.tokens.resize(static_cast<std::size_t>(max_tokens));
  if (ex.input.tokens.empty()) ex.input.tokens.push_back(Vocabulary::kOov);
  return ex;
}

std::vector<Example> make_examples(std::span<const CorpusRecord> records, const Vocabulary& vocab, Index max_tokens) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(make_example(r, vocab, max_tokens));
  return out;
}

PrepareResult prepare_corpus(std::span<const RawAnnotation> annotations, const ClassPriority& priority,
                             Index d_saliency, Index d_speaker_feat) {
  PrepareResult result;
  result.raw_stats = flag_stats(annotations);
  for (const auto& a : annotations) {
    const auto label = reorganize_label(a.flags, priority);
    if (!label) {
      ++result.dropped;
      continue;
    }
    CorpusRecord r;
    r.record_id = a.record_id;
    r.utterance = a.utterance;
    r.tokens = tokenize(a.utterance);
    r.flags = a.flags;
    r.head_loc = a.head_loc;
    r.label = *label;
    r.saliency = a.saliency.size() ? a.saliency : stub_features(a.record_id + "#saliency", d_saliency);
    r.speaker = a.speaker.size() ? a.speaker : stub_features(a.record_id + "#speaker", d_speaker_feat);
    if (r.saliency.size() != d_saliency || r.speaker.size() != d_speaker_feat)
      throw DimensionError("record " + a.record_id + " supplies features of the wrong dimension");
    r.validate();
    result.records.push_back(std::move(r));
  }
  result.class_stats = class_stats(std::span<const CorpusRecord>(result.records));
  return result;
}

}  // namespace arvsu
