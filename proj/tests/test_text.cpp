#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "arvsu/errors.hpp"
#include "arvsu/text.hpp"

using namespace arvsu;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
  const std::filesystem::path dir = std::filesystem::path(ARVSU_TEST_TMP) / "text";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST_SUITE_BEGIN("text-pipeline");

TEST_CASE("tokenize") {
  using V = std::vector<std::string>;
  CHECK(tokenize("Look at THIS, everyone!") == V{"look", "at", "this", "everyone"});
  CHECK(tokenize("  isn't   it?  ") == V{"isn't", "it"});
  CHECK(tokenize("...").empty());
  CHECK(tokenize("").empty());
  CHECK(tokenize("\"hello\"\tworld\n") == V{"hello", "world"});

  SUBCASE("idempotent on its own output") {
    for (const char* text : {"Hey you, over there!", "(quoted) 'words' -- dashes", "MiXeD CaSe..."}) {
      const auto once = tokenize(text);
      std::string joined;
      for (const auto& t : once) joined += t + " ";
      CHECK(tokenize(joined) == once);
    }
  }
}

TEST_CASE("vocabulary") {
  const Vocabulary v = Vocabulary::from_tokens({"look", "here"});
  CHECK(v.size() == 4);
  CHECK(v.encode("<oov>") == Vocabulary::kOov);
  CHECK(v.encode("<pad>") == Vocabulary::kPad);
  CHECK(v.encode("look") == 2);
  CHECK(v.encode("elsewhere") == Vocabulary::kOov);
  CHECK(v.decode(3) == "here");
  CHECK_THROWS_AS(v.decode(4), DomainError);
  CHECK(v.contains("here"));
  CHECK_FALSE(v.contains("there"));
  CHECK(v.encode_all({"here", "nope", "look"}) == std::vector<Index>{3, 0, 2});
  CHECK(v.entries() == std::vector<std::string>{"look", "here"});
  CHECK_THROWS_AS(Vocabulary::from_tokens({"a", "a"}), FormatError);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"<oov>"}), FormatError);
}

TEST_CASE("build_vocab orders by frequency then token") {
  const std::vector<std::vector<std::string>> corpus{{"b", "a", "c"}, {"a", "c"}, {"c", "d"}};
  const Vocabulary v = build_vocab(corpus);
  CHECK(v.entries() == std::vector<std::string>{"c", "a", "b", "d"});
  CHECK(build_vocab(corpus, 2).entries() == std::vector<std::string>{"c", "a"});
  CHECK(build_vocab(corpus) == build_vocab(corpus));
}

TEST_CASE("load_pretrained") {
  const Vocabulary v = Vocabulary::from_tokens({"look", "here", "unseen"});

  SUBCASE("rows copied, reserved rows zero, others seeded") {
    const auto path = write_temp("emb3.txt",
                                 "look 0.1 0.2 0.3\n"
                                 "here -1 0 1\n"
                                 "extra 9 9 9\n"
                                 "broken 1 2\n"
                                 "bad x y z\n");
    const PretrainedEmbeddings e = load_pretrained(path, v, 3, 42);
    CHECK(e.table.shape() == Shape{5, 3});
    CHECK(e.matched == 2);
    CHECK(e.skipped_lines == 2);
    for (Index k = 0; k < 6; ++k) CHECK(e.table[k] == 0.0);
    CHECK(e.table[2 * 3 + 1] == 0.2);
    CHECK(e.table[3 * 3 + 0] == -1.0);
    for (Index k = 0; k < 3; ++k) {
      CHECK(std::abs(e.table[4 * 3 + k]) <= 0.05);
      CHECK(e.table[4 * 3 + k] != 0.0);
    }
    CHECK(load_pretrained(path, v, 3, 42).table == e.table);
    CHECK_FALSE(load_pretrained(path, v, 3, 43).table == e.table);
  }

  SUBCASE("wrong dimension throughout") {
    const auto path = write_temp("emb2.txt", "look 0.1 0.2\nhere 1 2\n");
    CHECK_THROWS_AS(load_pretrained(path, v, 3, 1), DimensionError);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_pretrained(std::filesystem::path(ARVSU_TEST_TMP) / "nope.txt", v, 3, 1), IoError);
  }
}

TEST_CASE("tokenize reference sentences") {
  using V = std::vector<std::string>;
  CHECK(tokenize("Look at that bird!") == V{"look", "at", "that", "bird"});
  CHECK(tokenize("It's great, isn't it?") == V{"it's", "great", "isn't", "it"});
}

TEST_CASE("vocabulary size and frequency cut") {
  const std::vector<std::vector<std::string>> corpus{{"a", "a", "b"}, {"a", "c"}};
  CHECK(build_vocab(corpus).size() == 3 + 2);
  const Vocabulary cut = build_vocab(corpus, 2);
  CHECK(cut.contains("a"));
  CHECK_FALSE(cut.contains("b"));
}

TEST_SUITE_END();
