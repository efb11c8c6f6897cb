#ifndef ARVSU_TEXT_HPP
#define ARVSU_TEXT_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "arvsu/tensor.hpp"

namespace arvsu {

// Lowercases, splits on whitespace and strips leading/trailing punctuation
// from each token. Apostrophes inside a word survive ("isn't").
std::vector<std::string> tokenize(std::string_view utterance);

class Vocabulary {
 public:
  static constexpr Index kOov = 0;
  static constexpr Index kPad = 1;
  static constexpr std::string_view kOovToken = "<oov>";
  static constexpr std::string_view kPadToken = "<pad>";

  Vocabulary();
  // Reserved entries are implied; `tokens` lists indices 2, 3, ...
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  Index size() const { return static_cast<Index>(tokens_.size()); }
  // Unknown tokens map to kOov.
  Index encode(std::string_view token) const;
  const std::string& decode(Index index) const;
  bool contains(std::string_view token) const;

  std::vector<Index> encode_all(const std::vector<std::string>& tokens) const;
  // Non-reserved tokens in index order.
  std::vector<std::string> entries() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Index> index_;
};

// Tokens seen at least min_count times, ordered by (count desc, token asc).
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus_tokens, Index min_count = 1);

struct PretrainedEmbeddings {
  Tensor table;           // [vocab x d_embed]
  Index matched = 0;      // vocabulary rows copied from the file
  Index skipped_lines = 0;
};

// Reads "token v1 ... vd" lines. Rows for tokens in the file are copied;
// the OOV and PAD rows are zero; other rows draw uniform(-0.05, 0.05) from a
// generator seeded with `seed`. Lines whose float count differs from d_embed
// or that fail to parse are skipped and counted. A file in which no line has
// exactly d_embed values, but some line parses, is a DimensionError.
PretrainedEmbeddings load_pretrained(const std::filesystem::path& path, const Vocabulary& vocab, Index d_embed,
                                     std::uint64_t seed);

}  // namespace arvsu

#endif  // ARVSU_TEXT_HPP
