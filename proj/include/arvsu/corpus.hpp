#ifndef ARVSU_CORPUS_HPP
#define ARVSU_CORPUS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arvsu/model.hpp"
#include "arvsu/text.hpp"

namespace arvsu {

// Addressee options offered to annotators.
enum class AddresseeFlag : std::uint8_t { line_of_sight, photographer, monologue, others, not_applicable };
inline constexpr std::size_t kNumFlags = 5;

// Bit set over AddresseeFlag.
class FlagSet {
 public:
  FlagSet() = default;
  FlagSet(std::initializer_list<AddresseeFlag> flags) {
    for (auto f : flags) insert(f);
  }
  void insert(AddresseeFlag f) { bits_ |= bit(f); }
  bool contains(AddresseeFlag f) const { return (bits_ & bit(f)) != 0; }
  bool empty() const { return bits_ == 0; }
  std::uint8_t bits() const { return bits_; }
  std::vector<AddresseeFlag> members() const;
  friend bool operator==(FlagSet, FlagSet) = default;

 private:
  static std::uint8_t bit(AddresseeFlag f) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(f)); }
  std::uint8_t bits_ = 0;
};

std::string_view flag_name(AddresseeFlag f);      // "LineOfSight", ...
AddresseeFlag parse_flag(std::string_view name);  // FormatError on unknown names

// Target classes after reorganization.
enum class AddresseeClass : Index { line_of_sight = 0, photographer = 1, others = 2 };

std::string_view class_display_name(Index label);  // "Line-of-Sight Entities", "Photographer", "Others"
std::string_view class_key(Index label);           // "line_of_sight", "photographer", "others"
Index parse_class_key(std::string_view key);

using ClassPriority = std::array<AddresseeClass, 3>;
inline constexpr ClassPriority kDefaultPriority = {AddresseeClass::photographer, AddresseeClass::line_of_sight,
                                                   AddresseeClass::others};
// Comma-separated class keys naming a permutation of the three classes.
ClassPriority parse_priority(std::string_view text);
std::string priority_string(const ClassPriority& priority);

// Drops NotApplicable, folds Monologue into Others, and resolves a remaining
// conflict by `priority`. Throws DomainError on an empty flag set.
std::optional<Index> reorganize_label(FlagSet flags, const ClassPriority& priority = kDefaultPriority);

struct ClassWeights {
  std::array<double, 3> w{1.0, 1.0, 1.0};
  double operator[](Index c) const { return w.at(static_cast<std::size_t>(c)); }
};

// Balanced inverse frequency w_c = N / (K N_c).
ClassWeights compute_class_weights(std::span<const Index> counts);

struct SplitSpec {
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Seeded shuffle of 0..n-1 cut at floor(3n/5) and floor(4n/5).
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);

template <typename T>
struct Splits {
  std::vector<T> train;
  std::vector<T> val;
  std::vector<T> test;
};

template <typename T>
Splits<T> split(const std::vector<T>& records, const SplitSpec& spec) {
  const SplitIndices idx = split_indices(records.size(), spec);
  Splits<T> out;
  for (auto i : idx.train) out.train.push_back(records[i]);
  for (auto i : idx.val) out.val.push_back(records[i]);
  for (auto i : idx.test) out.test.push_back(records[i]);
  return out;
}

struct RawAnnotation {
  std::string record_id;
  std::string utterance;
  FlagSet flags;
  std::string image_ref;
  std::array<double, 2> head_loc{0.5, 0.5};
  // Optional precomputed features; empty when the feature provider must stub.
  Eigen::VectorXd saliency;
  Eigen::VectorXd speaker;
};

struct CorpusRecord {
  std::string record_id;
  std::string utterance;
  std::vector<std::string> tokens;
  FlagSet flags;
  Eigen::VectorXd saliency;
  Eigen::VectorXd speaker;
  std::array<double, 2> head_loc{0.5, 0.5};
  Index label = 0;

  void validate() const;
  friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

struct ClassStats {
  std::array<Index, 3> counts{};
  Index total = 0;
  // 100 N_c / N; rendering rounds to 2 decimals.
  std::array<double, 3> percent() const;
};

struct FlagStats {
  std::array<Index, kNumFlags> counts{};
  Index total = 0;  // sum over flags (one utterance may carry several)
  std::array<double, kNumFlags> percent() const;
};

ClassStats class_stats(std::span<const Index> labels);
ClassStats class_stats(std::span<const CorpusRecord> records);
FlagStats flag_stats(std::span<const RawAnnotation> annotations);
std::string render_class_stats(const ClassStats& stats);
std::string render_flag_stats(const FlagStats& stats);

// Deterministic unit-norm stand-in for a convnet feature vector, seeded by a
// 64-bit FNV-1a hash of the id and the dimension.
Eigen::VectorXd stub_features(std::string_view record_id, Index dim);

enum class SyntheticSignal { visual, text, both };
std::string_view signal_name(SyntheticSignal s);
SyntheticSignal parse_signal(std::string_view name);

struct SyntheticOptions {
  SyntheticSignal signal = SyntheticSignal::both;
  // Class proportions; defaults to the reference corpus distribution.
  std::array<double, 3> proportions{0.5086, 0.1416, 0.3494};
  // Standard deviation of per-coordinate feature noise.
  double noise = 0.3;
  // Scale of the class/bit prototype added to the features.
  double amplitude = 2.0;
  Index min_filler = 3;
  Index max_filler = 7;
};

// Everything the generator derives from its seed before drawing records.
// Tests use it to build oracle classifiers independent of the model.
struct SyntheticLayout {
  // Rows are prototypes: one per class (visual signal) or one per visual
  // bit value (both signal).
  Eigen::MatrixXd saliency_prototypes;
  Eigen::MatrixXd speaker_prototypes;
  std::vector<std::string> fillers;
  // Cue words per class (text signal) or per text bit value (both signal).
  std::vector<std::vector<std::string>> cues;
};

SyntheticLayout synthetic_layout(const ModelConfig& cfg, std::uint64_t seed, const SyntheticOptions& opts);

// Three-class corpus in which the label is carried by the visual features
// (visual), by cue words (text), or only by the combination (both). In the
// combined regime each sample has a visual bit v and a text bit t; class 0
// occupies (0,0) and (1,1), class 1 occupies (0,1), class 2 occupies (1,0).
std::vector<CorpusRecord> generate_synthetic(Index n, const ModelConfig& cfg, std::uint64_t seed,
                                             const SyntheticOptions& opts = {});

// Records and their vocabulary-encoded model inputs.
struct Example {
  SampleInput input;
  Index label = 0;
};

// Empty token lists become a single OOV token; max_tokens = 0 keeps all.
Example make_example(const CorpusRecord& record, const Vocabulary& vocab, Index max_tokens = 0);
std::vector<Example> make_examples(std::span<const CorpusRecord> records, const Vocabulary& vocab,
                                   Index max_tokens = 0);

// --- files ------------------------------------------------------------------

inline constexpr std::string_view kCorpusSchema = "arvsu-corpus/1";
inline constexpr std::string_view kRawSchema = "arvsu-raw/1";
inline constexpr char kSidecarMagic[8] = {'A', 'R', 'V', 'S', 'U', 'F', '6', '4'};

struct FeatureMatrix {
  Index dim = 0;
  std::vector<Eigen::VectorXd> rows;
};

// Layout: 8-byte magic "ARVSUF64", u64 dim, u64 count, then count*dim
// little-endian IEEE-754 doubles, row after row.
void write_feature_sidecar(const std::filesystem::path& path, const FeatureMatrix& features);
FeatureMatrix read_feature_sidecar(const std::filesystem::path& path);

struct CorpusWriteOptions {
  // When set, features go to "<stem>.saliency.f64" / "<stem>.speaker.f64"
  // next to the corpus file and records carry a row index.
  bool sidecar = false;
};

void write_corpus(const std::filesystem::path& path, std::span<const CorpusRecord> records,
                  const CorpusWriteOptions& opts = {});
std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path);

void write_raw_annotations(const std::filesystem::path& path, std::span<const RawAnnotation> annotations);
// Throws FormatError naming the 1-based line number of the first bad line.
std::vector<RawAnnotation> read_raw_annotations(const std::filesystem::path& path);

struct PrepareResult {
  std::vector<CorpusRecord> records;
  FlagStats raw_stats;
  ClassStats class_stats;
  Index dropped = 0;
};

// Reorganizes labels, tokenizes, and attaches supplied or stubbed features.
PrepareResult prepare_corpus(std::span<const RawAnnotation> annotations, const ClassPriority& priority,
                             Index d_saliency, Index d_speaker_feat);

}  // namespace arvsu

#endif  // ARVSU_CORPUS_HPP
