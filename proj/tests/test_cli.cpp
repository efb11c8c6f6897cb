#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "arvsu/corpus.hpp"
#include "arvsu/training.hpp"
#include "cli.hpp"

using namespace arvsu;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::vector<std::string>& args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::path(ARVSU_TEST_TMP) / "cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path toy_raw(const fs::path& dir) {
  using F = AddresseeFlag;
  std::vector<RawAnnotation> raw{
      {"t0", "Look at that tower!", {F::line_of_sight}, "t0.jpg", {0.3, 0.4}, {}, {}},
      {"t1", "Smile for the camera", {F::photographer}, "t1.jpg", {0.5, 0.2}, {}, {}},
      {"t2", "I wonder why", {F::monologue}, "t2.jpg", {0.6, 0.6}, {}, {}},
      {"t3", "...", {F::not_applicable}, "t3.jpg", {0.5, 0.5}, {}, {}},
      {"t4", "Hey, you two", {F::others, F::photographer}, "t4.jpg", {0.1, 0.8}, {}, {}}};
  write_raw_annotations(dir / "raw.jsonl", raw);
  return dir / "raw.jsonl";
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("prepare drops NotApplicable and is reproducible") {
  const fs::path dir = temp_dir("prepare");
  const fs::path raw = toy_raw(dir);
  const auto args = [&](const char* out) {
    return std::vector<std::string>{"prepare", "--raw", raw.string(), "--out", (dir / out).string(),
                                    "--d-saliency", "8", "--d-speaker", "8"};
  };
  const RunResult first = run_cli(args("a"));
  REQUIRE_MESSAGE(first.code == 0, first.err);
  const auto records = read_corpus(dir / "a" / "corpus.jsonl");
  CHECK(records.size() == 4);
  CHECK(records[3].label == 1);
  CHECK(fs::exists(dir / "a" / "stats.txt"));
  CHECK(fs::exists(dir / "a" / "manifest.json"));
  REQUIRE(run_cli(args("b")).code == 0);
  CHECK(slurp(dir / "a" / "corpus.jsonl") == slurp(dir / "b" / "corpus.jsonl"));
  CHECK(slurp(dir / "a" / "stats.txt") == slurp(dir / "b" / "stats.txt"));

  SUBCASE("priority changes the conflict resolution") {
    auto a = args("c");
    a.insert(a.end(), {"--priority", "others,photographer,line_of_sight"});
    REQUIRE(run_cli(a).code == 0);
    CHECK(read_corpus(dir / "c" / "corpus.jsonl")[3].label == 2);
  }
}

TEST_CASE("errors are reported with a kind") {
  const fs::path dir = temp_dir("errors");
  RunResult r = run_cli({"prepare", "--raw", (dir / "missing.jsonl").string(), "--out", (dir / "o").string()});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error[io]:", 0) == 0);
  CHECK(r.err.find("missing.jsonl") != std::string::npos);

  r = run_cli({"synth", "--n", "10", "--out", (dir / "s").string()});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error[domain]:", 0) == 0);

  r = run_cli({"train", "--corpus", "x", "--variant", "audio", "--out", "y"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error[usage]:", 0) == 0);

  r = run_cli({"frobnicate"});
  CHECK(r.code == 2);
}

TEST_CASE("synth, train, eval and predict") {
  const fs::path dir = temp_dir("pipeline");
  REQUIRE(run_cli({"synth", "--n", "60", "--signal", "text", "--seed", "3", "--out", (dir / "data").string()}).code ==
          0);
  const std::string corpus = (dir / "data" / "corpus.jsonl").string();

  const RunResult trained = run_cli({"train", "--corpus", corpus, "--variant", "text_only", "--lr", "0.1",
                                     "--batch-size", "8", "--max-epochs", "3", "--seed", "3", "--embed-dim", "4",
                                     "--lstm-hidden", "4", "--out", (dir / "model").string()});
  REQUIRE_MESSAGE(trained.code == 0, trained.err);
  const Checkpoint ckpt = load_checkpoint(dir / "model" / "checkpoint.bin");
  CHECK(ckpt.config.variant == Variant::text_only);
  for (const auto& [name, v] : ckpt.params.named()) CHECK(name.rfind("saliency", 0) != 0);
  CHECK_FALSE(ckpt.params.saliency.has_value());
  std::ifstream log(dir / "model" / "train_log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) ++lines;
  CHECK(lines == 3);

  const RunResult evaluated = run_cli({"eval", "--checkpoint", (dir / "model" / "checkpoint.bin").string(),
                                       "--corpus", corpus, "--out", (dir / "eval").string()});
  REQUIRE_MESSAGE(evaluated.code == 0, evaluated.err);
  CHECK(evaluated.out.find("Photographer") != std::string::npos);
  const json report = json::parse(slurp(dir / "eval" / "report.json"));
  CHECK(report.at("n").get<int>() == 12);

  SUBCASE("predict emits one line per input record") {
    std::string input;
    for (int i = 0; i < 5; ++i) input += json{{"id", "q" + std::to_string(i)}, {"utterance", "smile camera"}}.dump() + "\n";
    const RunResult r =
        run_cli({"predict", "--checkpoint", (dir / "model" / "checkpoint.bin").string()}, input);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    std::istringstream lines_in(r.out);
    int count = 0;
    while (std::getline(lines_in, line)) {
      const json j = json::parse(line);
      CHECK(j.at("id").get<std::string>() == "q" + std::to_string(count));
      double total = 0.0;
      for (double p : j.at("probabilities")) total += p;
      CHECK(total == doctest::Approx(1.0));
      ++count;
    }
    CHECK(count == 5);
  }

  SUBCASE("evaluating against a corpus of another shape is a config mismatch") {
    REQUIRE(run_cli({"synth", "--n", "40", "--d-saliency", "5", "--out", (dir / "other").string()}).code == 0);
    const RunResult r = run_cli({"eval", "--checkpoint", (dir / "model" / "checkpoint.bin").string(), "--corpus",
                                 (dir / "other" / "corpus.jsonl").string()});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error[config-mismatch]:", 0) == 0);
  }
}

TEST_CASE("a zero checkpoint predicts uniformly") {
  const fs::path dir = temp_dir("zero");
  ModelConfig cfg;
  cfg.d_saliency = 4;
  cfg.d_speaker_feat = 4;
  cfg.d_visual_hidden = 3;
  cfg.d_embed = 3;
  cfg.d_lstm_hidden = 3;
  const Vocabulary vocab;
  cfg.vocab_size = vocab.size();
  save_checkpoint({cfg, zero_params(cfg), vocab, {}}, dir / "zero.bin");
  const RunResult r = run_cli({"predict", "--checkpoint", (dir / "zero.bin").string()},
                              R"({"id":"z","utterance":"hello there","saliency":[1,2,3,4]})"
                              "\n");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json j = json::parse(r.out);
  CHECK(j.at("label").get<std::string>() == "Line-of-Sight Entities");
  for (double p : j.at("probabilities")) CHECK(p == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("replay reproduces a run from its manifest") {
  const fs::path dir = temp_dir("replay");
  REQUIRE(run_cli({"synth", "--n", "50", "--seed", "12", "--out", (dir / "a").string()}).code == 0);
  const json manifest = json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest.at("subcommand") == "synth");
  CHECK(manifest.at("tool") == "arvsu");
  const std::string before = slurp(dir / "a" / "corpus.jsonl");
  fs::remove(dir / "a" / "corpus.jsonl");
  const RunResult r = run_cli({"replay", "--manifest", (dir / "a" / "manifest.json").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(dir / "a" / "corpus.jsonl") == before);
}

TEST_CASE("stats") {
  const fs::path dir = temp_dir("stats");
  const fs::path raw = toy_raw(dir);
  const RunResult r = run_cli({"stats", "--raw", raw.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("Not Applicable") != std::string::npos);
  CHECK(r.out.find("Total") != std::string::npos);
  CHECK(run_cli({"stats"}).code == 1);
}

TEST_CASE("train defaults and missing paths") {
  const fs::path dir = temp_dir("defaults");
  REQUIRE(run_cli({"synth", "--n", "40", "--seed", "2", "--out", (dir / "d").string()}).code == 0);
  const RunResult r = run_cli({"train", "--corpus", (dir / "d" / "corpus.jsonl").string(), "--max-epochs", "1",
                               "--visual-hidden", "2", "--embed-dim", "2", "--lstm-hidden", "2", "--out",
                               (dir / "m").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json cfg = json::parse(slurp(dir / "m" / "manifest.json")).at("config");
  CHECK(cfg.at("learning_rate").get<double>() == 0.001);
  CHECK(cfg.at("batch_size").get<int>() == 64);
  CHECK(cfg.at("split_sizes") == json::array({24, 8, 8}));

  const RunResult missing =
      run_cli({"train", "--corpus", (dir / "nowhere.jsonl").string(), "--out", (dir / "x").string()});
  CHECK(missing.code != 0);
  CHECK(missing.err.find("nowhere.jsonl") != std::string::npos);
}

TEST_CASE("eval of a model fitted to its training split") {
  const fs::path dir = temp_dir("fitted");
  REQUIRE(run_cli({"synth", "--n", "120", "--signal", "visual", "--seed", "4", "--out", (dir / "d").string()}).code ==
          0);
  const std::string corpus = (dir / "d" / "corpus.jsonl").string();
  REQUIRE(run_cli({"train", "--corpus", corpus, "--variant", "visual_only", "--lr", "0.1", "--batch-size", "4",
                   "--max-epochs", "20", "--patience", "0", "--visual-hidden", "8", "--seed", "4", "--out",
                   (dir / "m").string()})
              .code == 0);
  const RunResult r = run_cli({"eval", "--checkpoint", (dir / "m" / "checkpoint.bin").string(), "--corpus", corpus,
                               "--split", "train", "--out", (dir / "e").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const json report = json::parse(slurp(dir / "e" / "report.json"));
  CHECK(report.at("accuracy").get<double>() >= 0.99);
}

TEST_CASE("synth reruns are byte-identical") {
  const fs::path dir = temp_dir("synth");
  for (const char* out : {"a", "b"})
    REQUIRE(run_cli({"synth", "--n", "600", "--signal", "both", "--seed", "9", "--out", (dir / out).string()}).code ==
            0);
  CHECK(slurp(dir / "a" / "corpus.jsonl") == slurp(dir / "b" / "corpus.jsonl"));
}

TEST_SUITE_END();
