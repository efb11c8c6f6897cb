#include "arvsu/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace arvsu {

namespace {

bool is_strippable(unsigned char c) { return std::ispunct(c) != 0; }

}  // namespace

std::vector<std::string> tokenize(std::string_view utterance) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < utterance.size()) {
    while (i < utterance.size() && std::isspace(static_cast<unsigned char>(utterance[i]))) ++i;
    std::size_t j = i;
    while (j < utterance.size() && !std::isspace(static_cast<unsigned char>(utterance[j]))) ++j;
    std::size_t lo = i;
    std::size_t hi = j;
    while (lo < hi && is_strippable(static_cast<unsigned char>(utterance[lo]))) ++lo;
    while (hi > lo && is_strippable(static_cast<unsigned char>(utterance[hi - 1]))) --hi;
    if (lo < hi) {
      std::string token(utterance.substr(lo, hi - lo));
      for (char& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      out.push_back(std::move(token));
    }
    i = j;
  }
  return out;
}

Vocabulary::Vocabulary() {
  tokens_ = {std::string(kOovToken), std::string(kPadToken)};
  index_.emplace(tokens_[0], kOov);
  index_.emplace(tokens_[1], kPad);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const std::string& t : tokens) {
    if (!v.index_.emplace(t, v.size()).second) throw FormatError("duplicate vocabulary token '" + t + "'");
    v.tokens_.push_back(t);
  }
  return v;
}

Index Vocabulary::encode(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kOov : it->second;
}

const std::string& Vocabulary::decode(Index index) const {
  if (index < 0 || index >= size())
    throw DomainError("vocabulary index " + std::to_string(index) + " out of range");
  return tokens_[static_cast<std::size_t>(index)];
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

std::vector<Index> Vocabulary::encode_all(const std::vector<std::string>& tokens) const {
  std::vector<Index> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(encode(t));
  return out;
}

std::vector<std::string> Vocabulary::entries() const { return {tokens_.begin() + 2, tokens_.end()}; }

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus_tokens, Index min_count) {
  if (min_count < 1) throw DomainError("build_vocab: min_count must be at least 1");
  std::map<std::string, Index> counts;
  for (const auto& utterance : corpus_tokens)
    for (const auto& t : utterance) ++counts[t];
  std::vector<std::pair<std::string, Index>> kept;
  for (auto& [token, n] : counts)
    if (n >= min_count && token != Vocabulary::kOovToken && token != Vocabulary::kPadToken)
      kept.emplace_back(token, n);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> ordered;
  ordered.reserve(kept.size());
  for (auto& [token, n] : kept) ordered.push_back(token);
  return Vocabulary::from_tokens(ordered);
}

PretrainedEmbeddings load_pretrained(const std::filesystem::path& path, const Vocabulary& vocab, Index d_embed,
                                     std::uint64_t seed) {
  if (d_embed <= 0) throw DomainError("load_pretrained: d_embed must be positive");
  std::ifstream in(path);
  if (!in) throw IoError("cannot read word vectors from " + path.string());

  PretrainedEmbeddings result;
  result.table = Tensor::zeros({vocab.size(), d_embed});
  std::vector<bool> filled(static_cast<std::size_t>(vocab.size()), false);
  bool any_parsed = false;
  bool any_matching_dim = false;

  std::string line;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    values.clear();
    bool ok = true;
    std::string field;
    while (fields >> field) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
        ok = false;
        break;
      }
      values.push_back(v);
    }
    if (!ok || values.empty()) {
      ++result.skipped_lines;
      continue;
    }
    any_parsed = true;
    if (static_cast<Index>(values.size()) != d_embed) {
      ++result.skipped_lines;
      continue;
    }
    any_matching_dim = true;
    const Index idx = vocab.encode(token);
    if (idx == Vocabulary::kOov || idx == Vocabulary::kPad || !vocab.contains(token)) continue;
    if (filled[static_cast<std::size_t>(idx)]) continue;
    for (Index k = 0; k < d_embed; ++k) result.table[idx * d_embed + k] = values[static_cast<std::size_t>(k)];
    filled[static_cast<std::size_t>(idx)] = true;
    ++result.matched;
  }
  if (any_parsed && !any_matching_dim)
    throw DimensionError("word vectors in " + path.string() + " do not have dimension " + std::to_string(d_embed));

  Rng rng(seed);
  for (Index r = 2; r < vocab.size(); ++r) {
    if (filled[static_cast<std::size_t>(r)]) continue;
    for (Index k = 0; k < d_embed; ++k) result.table[r * d_embed + k] = rng.uniform(-0.05, 0.05);
  }
  return result;
}

}  // namespace arvsu
