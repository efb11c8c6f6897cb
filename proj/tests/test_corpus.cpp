#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "arvsu/corpus.hpp"
#include "test_support.hpp"

using namespace arvsu;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::path(ARVSU_TEST_TMP) / "corpus" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Nearest prototype by dot product over both visual blocks.
Index nearest_visual(const SyntheticLayout& layout, const CorpusRecord& r) {
  Index best = 0;
  double best_score = -1e300;
  for (Index k = 0; k < layout.saliency_prototypes.rows(); ++k) {
    const double score =
        layout.saliency_prototypes.row(k).dot(r.saliency) + layout.speaker_prototypes.row(k).dot(r.speaker);
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

// Index of the cue group present in the tokens, or -1.
Index cue_group(const SyntheticLayout& layout, const CorpusRecord& r) {
  for (std::size_t g = 0; g < layout.cues.size(); ++g)
    for (const auto& t : r.tokens)
      for (const auto& cue : layout.cues[g])
        if (t == cue) return static_cast<Index>(g);
  return -1;
}

ModelConfig small_dims() {
  ModelConfig cfg;
  cfg.d_saliency = 16;
  cfg.d_speaker_feat = 16;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("corpus");

TEST_CASE("reorganize_label") {
  using F = AddresseeFlag;
  CHECK(reorganize_label({F::line_of_sight}) == 0);
  CHECK(reorganize_label({F::photographer}) == 1);
  CHECK(reorganize_label({F::monologue}) == 2);
  CHECK(reorganize_label({F::others}) == 2);
  CHECK(reorganize_label({F::monologue, F::others}) == 2);
  CHECK_FALSE(reorganize_label({F::not_applicable}).has_value());
  CHECK_FALSE(reorganize_label({F::not_applicable, F::photographer}).has_value());
  CHECK(reorganize_label({F::photographer, F::line_of_sight}) == 1);
  CHECK(reorganize_label({F::line_of_sight, F::others}) == 0);
  CHECK_THROWS_AS(reorganize_label(FlagSet{}), DomainError);

  const ClassPriority others_first = parse_priority("others,line_of_sight,photographer");
  CHECK(reorganize_label({F::photographer, F::monologue}, others_first) == 2);
  CHECK(priority_string(others_first) == "others,line_of_sight,photographer");
  CHECK_THROWS_AS(parse_priority("others,others,photographer"), FormatError);
  CHECK_THROWS_AS(parse_priority("others,photographer"), FormatError);
  CHECK_THROWS_AS(parse_flag("Bystander"), FormatError);
}

TEST_CASE("class weights") {
  const std::vector<Index> reference{313079, 87373, 215058};
  const ClassWeights w = compute_class_weights(reference);
  CHECK(w[0] == doctest::Approx(0.6553).epsilon(1e-3));
  CHECK(w[1] == doctest::Approx(2.3483).epsilon(1e-3));
  CHECK(w[2] == doctest::Approx(0.9540).epsilon(1e-3));

  const std::vector<Index> balanced{7, 7, 7};
  for (Index c = 0; c < 3; ++c) CHECK(compute_class_weights(balanced)[c] == doctest::Approx(1.0));

  const std::vector<Index> scaled{313079 * 4, 87373 * 4, 215058 * 4};
  for (Index c = 0; c < 3; ++c) CHECK(compute_class_weights(scaled)[c] == doctest::Approx(w[c]).epsilon(1e-12));

  // Weighted class mass is equal across classes.
  for (Index c = 0; c < 3; ++c)
    CHECK(w[c] * static_cast<double>(reference[static_cast<std::size_t>(c)]) ==
          doctest::Approx(615510.0 / 3.0).epsilon(1e-12));

  const std::vector<Index> with_zero{5, 0, 3};
  CHECK_THROWS_AS(compute_class_weights(with_zero), DomainError);
  const std::vector<Index> two{5, 3};
  CHECK_THROWS_AS(compute_class_weights(two), DimensionError);
}

TEST_CASE("split sizes and properties") {
  const SplitIndices big = split_indices(615510, {7});
  CHECK(big.train.size() == 369306);
  CHECK(big.val.size() == 123102);
  CHECK(big.test.size() == 123102);

  const SplitIndices ten = split_indices(10, {1});
  CHECK(ten.train.size() == 6);
  CHECK(ten.val.size() == 2);
  CHECK(ten.test.size() == 2);

  std::set<std::size_t> seen;
  for (const auto* part : {&ten.train, &ten.val, &ten.test}) seen.insert(part->begin(), part->end());
  CHECK(seen.size() == 10);
  CHECK(*seen.rbegin() == 9);

  CHECK(split_indices(97, {3}).train == split_indices(97, {3}).train);
  CHECK(split_indices(97, {3}).train != split_indices(97, {4}).train);
  CHECK_THROWS_AS(split_indices(4, {0}), DomainError);
}

TEST_CASE("class statistics") {
  std::vector<Index> labels;
  labels.insert(labels.end(), 5086, 0);
  labels.insert(labels.end(), 1416, 1);
  labels.insert(labels.end(), 3494, 2);
  const ClassStats s = class_stats(labels);
  CHECK(s.total == 9996);
  const std::string text = render_class_stats(class_stats(std::vector<Index>{0, 0, 1, 2}));
  CHECK(text.find("50.00") != std::string::npos);
  CHECK(text.find("25.00") != std::string::npos);

  const std::vector<Index> table_counts{313079, 87373, 215058};
  std::vector<Index> big;
  for (Index c = 0; c < 3; ++c) big.insert(big.end(), static_cast<std::size_t>(table_counts[static_cast<std::size_t>(c)]), c);
  const std::string rendered = render_class_stats(class_stats(big));
  CHECK(rendered.find("50.86") != std::string::npos);
  CHECK(rendered.find("14.20") != std::string::npos);
  CHECK(rendered.find("34.94") != std::string::npos);
  CHECK_THROWS_AS(class_stats(std::vector<Index>{3}), DomainError);
}

TEST_CASE("stub features") {
  const Eigen::VectorXd a = stub_features("img-001", 64);
  CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(stub_features("img-001", 64) == a);
  CHECK(stub_features("img-002", 64) != a);

  double worst = 0.0;
  std::vector<Eigen::VectorXd> vs;
  for (int i = 0; i < 100; ++i) vs.push_back(stub_features("rec-" + std::to_string(i), 4096));
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = i + 1; j < vs.size(); ++j) worst = std::max(worst, std::abs(vs[i].dot(vs[j])));
  CHECK(worst < 0.5);
  CHECK_THROWS_AS(stub_features("x", 0), DomainError);
}

TEST_CASE("synthetic generator") {
  const ModelConfig cfg = small_dims();

  SUBCASE("class proportions and determinism") {
    const auto records = generate_synthetic(1000, cfg, 5);
    const ClassStats s = class_stats(std::span<const CorpusRecord>(records));
    CHECK(s.counts[0] == 509);
    CHECK(s.counts[1] == 142);
    CHECK(s.counts[2] == 349);
    CHECK(generate_synthetic(1000, cfg, 5) == records);
    CHECK_FALSE(generate_synthetic(1000, cfg, 6) == records);
    for (const auto& r : records) {
      CHECK_NOTHROW(r.validate());
      CHECK(reorganize_label(r.flags) == r.label);
    }
    CHECK_THROWS_AS(generate_synthetic(10, cfg, 5), DomainError);
  }

  SUBCASE("visual signal is linearly recoverable") {
    SyntheticOptions opts;
    opts.signal = SyntheticSignal::visual;
    const auto records = generate_synthetic(600, cfg, 9, opts);
    const SyntheticLayout layout = synthetic_layout(cfg, 9, opts);
    Index correct = 0;
    for (const auto& r : records) correct += nearest_visual(layout, r) == r.label;
    CHECK(static_cast<double>(correct) / 600.0 >= 0.95);
  }

  SUBCASE("text signal is carried by cue groups") {
    SyntheticOptions opts;
    opts.signal = SyntheticSignal::text;
    const auto records = generate_synthetic(300, cfg, 9, opts);
    const SyntheticLayout layout = synthetic_layout(cfg, 9, opts);
    for (const auto& r : records) CHECK(cue_group(layout, r) == r.label);
  }

  SUBCASE("both signal needs the two modalities together") {
    const SyntheticOptions opts;
    const auto records = generate_synthetic(3000, cfg, 21, opts);
    const SyntheticLayout layout = synthetic_layout(cfg, 21, opts);
    // Empirical Bayes-optimal rules on each single modality, and on the pair.
    std::array<std::array<Index, 3>, 2> by_visual{}, by_text{};
    std::array<std::array<std::array<Index, 3>, 2>, 2> by_pair{};
    std::vector<std::pair<Index, Index>> keys;
    for (const auto& r : records) {
      const Index v = nearest_visual(layout, r), t = cue_group(layout, r);
      REQUIRE(t >= 0);
      ++by_visual[v][r.label];
      ++by_text[t][r.label];
      ++by_pair[v][t][r.label];
    }
    auto best_mass = [](const std::array<Index, 3>& counts) { return *std::max_element(counts.begin(), counts.end()); };
    double visual = 0, text = 0, both = 0;
    for (int v = 0; v < 2; ++v) {
      visual += static_cast<double>(best_mass(by_visual[v]));
      text += static_cast<double>(best_mass(by_text[v]));
      for (int t = 0; t < 2; ++t) both += static_cast<double>(best_mass(by_pair[v][t]));
    }
    CHECK(visual / 3000.0 <= 0.70);
    CHECK(text / 3000.0 <= 0.70);
    CHECK(both / 3000.0 >= 0.99);
  }
}

TEST_CASE("examples from records") {
  CorpusRecord r;
  r.record_id = "a";
  r.saliency = Eigen::VectorXd::Zero(3);
  r.speaker = Eigen::VectorXd::Zero(2);
  const Vocabulary v = Vocabulary::from_tokens({"hi", "there"});
  CHECK(make_example(r, v).input.tokens == std::vector<Index>{Vocabulary::kOov});
  r.tokens = {"hi", "you", "there", "hi"};
  r.label = 2;
  const Example ex = make_example(r, v, 2);
  CHECK(ex.input.tokens == std::vector<Index>{2, 0});
  CHECK(ex.label == 2);
  CHECK(ex.input.head_loc == Tensor::vector({0.5, 0.5}));
}

TEST_CASE("corpus files") {
  const ModelConfig cfg = small_dims();
  const auto records = generate_synthetic(40, cfg, 3);

  SUBCASE("inline round trip") {
    const fs::path dir = temp_dir("inline");
    write_corpus(dir / "c.jsonl", records);
    CHECK(read_corpus(dir / "c.jsonl") == records);
  }
  SUBCASE("sidecar round trip") {
    const fs::path dir = temp_dir("sidecar");
    write_corpus(dir / "c.jsonl", records, {true});
    CHECK(fs::exists(dir / "c.saliency.f64"));
    CHECK(fs::exists(dir / "c.speaker.f64"));
    CHECK(read_corpus(dir / "c.jsonl") == records);
    const FeatureMatrix m = read_feature_sidecar(dir / "c.saliency.f64");
    CHECK(m.dim == 16);
    CHECK(m.rows.size() == 40);
    fs::resize_file(dir / "c.saliency.f64", fs::file_size(dir / "c.saliency.f64") - 3);
    CHECK_THROWS_AS(read_feature_sidecar(dir / "c.saliency.f64"), TruncatedError);
  }
  SUBCASE("malformed lines name their line number") {
    const fs::path dir = temp_dir("bad");
    write_corpus(dir / "c.jsonl", records);
    std::ifstream in(dir / "c.jsonl");
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    std::ofstream(dir / "bad.jsonl") << header << "\n" << first << "\n{not json\n";
    try {
      read_corpus(dir / "bad.jsonl");
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
    std::ofstream(dir / "ver.jsonl") << R"({"schema":"arvsu-corpus/9"})" << "\n";
    CHECK_THROWS_AS(read_corpus(dir / "ver.jsonl"), VersionError);
    CHECK_THROWS_AS(read_corpus(dir / "missing.jsonl"), IoError);
  }
  SUBCASE("raw annotations and prepare") {
    const fs::path dir = temp_dir("raw");
    std::vector<RawAnnotation> raw(3);
    raw[0] = {"r0", "Look at the tree!", {AddresseeFlag::line_of_sight}, "img0.jpg", {0.2, 0.4}, {}, {}};
    raw[1] = {"r1", "Say cheese", {AddresseeFlag::photographer, AddresseeFlag::others}, "img1.jpg", {0.5, 0.5}, {}, {}};
    raw[2] = {"r2", "hmm", {AddresseeFlag::not_applicable}, "img2.jpg", {0.1, 0.9}, {}, {}};
    write_raw_annotations(dir / "raw.jsonl", raw);
    const auto back = read_raw_annotations(dir / "raw.jsonl");
    REQUIRE(back.size() == 3);
    CHECK(back[1].flags == raw[1].flags);
    CHECK(back[0].head_loc == raw[0].head_loc);

    const PrepareResult prepared = prepare_corpus(back, kDefaultPriority, 8, 6);
    REQUIRE(prepared.records.size() == 2);
    CHECK(prepared.dropped == 1);
    CHECK(prepared.records[0].tokens == std::vector<std::string>{"look", "at", "the", "tree"});
    CHECK(prepared.records[1].label == 1);
    CHECK(prepared.records[0].saliency == stub_features("r0#saliency", 8));
    CHECK(prepared.records[0].speaker.size() == 6);
    CHECK(prepared.raw_stats.total == 4);
    CHECK(prepared.class_stats.counts == std::array<Index, 3>{1, 1, 0});
  }
}

TEST_CASE("percentages") {
  const std::vector<Index> one_class(17, 2);
  CHECK(render_class_stats(class_stats(one_class)).find("100.00") != std::string::npos);
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Index> labels;
    for (std::uint64_t i = 0, n = 1 + rng.below(500); i < n; ++i) labels.push_back(static_cast<Index>(rng.below(3)));
    const auto pct = class_stats(labels).percent();
    double rounded = 0.0;
    for (double p : pct) rounded += std::round(p * 100.0) / 100.0;
    CHECK(std::abs(rounded - 100.0) <= 0.02);
  }
}

TEST_CASE("weighted class mass equals the total for random counts") {
  Rng rng(62);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Index> counts{1 + static_cast<Index>(rng.below(1000)), 1 + static_cast<Index>(rng.below(1000)),
                                    1 + static_cast<Index>(rng.below(1000))};
    const ClassWeights w = compute_class_weights(counts);
    double mass = 0.0;
    for (Index c = 0; c < 3; ++c) mass += w[c] * static_cast<double>(counts[static_cast<std::size_t>(c)]);
    CHECK(mass == doctest::Approx(static_cast<double>(counts[0] + counts[1] + counts[2])).epsilon(1e-12));
  }
}

TEST_SUITE_END();
