#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <nlohmann/json.hpp>

#include "arvsu/corpus.hpp"
#include "arvsu/evaluation.hpp"
#include "arvsu/kernels.hpp"
#include "arvsu/training.hpp"

namespace arvsu::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Options whose values are filesystem paths; the manifest stores them absolute.
const std::set<std::string> kPathOptions = {"--raw",        "--out",   "--corpus", "--checkpoint",
                                            "--embeddings", "--input", "--manifest"};

struct PrepareArgs {
  std::string raw;
  std::string out;
  std::string priority = priority_string(kDefaultPriority);
  Index d_saliency = 4096;
  Index d_speaker = 4096;
  bool sidecar = false;
};

struct SynthArgs {
  Index n = 0;
  std::string signal = "both";
  std::uint64_t seed = 1;
  std::string out;
  Index d_saliency = 16;
  Index d_speaker = 16;
  double noise = 0.3;
  std::string format = "corpus";
};

struct TrainArgs {
  std::string corpus;
  std::string variant = "multimodal";
  double lr = 0.001;
  Index batch_size = 64;
  Index max_epochs = 100;
  Index patience = 10;
  std::uint64_t seed = 1;
  std::string embeddings;
  std::string out;
  Index min_count = 1;
  Index max_tokens = 0;
  Index visual_hidden = 256;
  Index embed_dim = 100;
  Index lstm_hidden = 128;
  bool no_class_weights = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string corpus;
  std::string split = "test";
  std::optional<std::uint64_t> seed;
  std::string out;
  Index max_tokens = 0;
};

struct PredictArgs {
  std::string checkpoint;
  std::string input;
  Index max_tokens = 0;
};

struct StatsArgs {
  std::string corpus;
  std::string raw;
  std::string priority = priority_string(kDefaultPriority);
};

struct ReplayArgs {
  std::string manifest;
};

std::string env_name(const std::string& long_name) {
  std::string s = "ARVSU_";
  for (char c : long_name.substr(2)) s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// Every long option may also come from ARVSU_<NAME> (dashes become underscores).
void attach_env_names(CLI::App& sub) {
  for (CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name.rfind("--", 0) == 0 && name != "--help") opt->envname(env_name(name));
  }
}

std::vector<std::string> resolved_args(const CLI::App& sub) {
  std::vector<std::string> args;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name == "--help" || opt->count() == 0) continue;
    args.push_back(name);
    if (opt->get_type_size() == 0) continue;
    for (const std::string& v : opt->results())
      args.push_back(kPathOptions.count(name) ? fs::absolute(v).lexically_normal().string() : v);
  }
  return args;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

fs::path prepare_out_dir(const std::string& out) {
  if (out.empty()) throw DomainError("--out is required");
  fs::create_directories(out);
  return fs::path(out);
}

void write_manifest(const fs::path& dir, const std::string& subcommand, const CLI::App& sub, json config,
                    json outputs) {
  json m = {{"tool", "arvsu"},
            {"version", kToolVersion},
            {"subcommand", subcommand},
            {"args", resolved_args(sub)},
            {"config", std::move(config)},
            {"outputs", std::move(outputs)}};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

int cmd_prepare(const PrepareArgs& a, const CLI::App& sub, std::ostream& out) {
  const ClassPriority priority = parse_priority(a.priority);
  const auto annotations = read_raw_annotations(a.raw);
  PrepareResult result = prepare_corpus(annotations, priority, a.d_saliency, a.d_speaker);
  if (result.records.empty()) throw DomainError("no records survive label reorganization in " + a.raw);
  const fs::path dir = prepare_out_dir(a.out);
  write_corpus(dir / "corpus.jsonl", result.records, {a.sidecar});
  const std::string stats = "Annotation flags\n" + render_flag_stats(result.raw_stats) +
                            "\nAddressee classes\n" + render_class_stats(result.class_stats) +
                            "\nDropped (Not Applicable): " + std::to_string(result.dropped) + "\n";
  write_text(dir / "stats.txt", stats);
  write_manifest(dir, "prepare", sub,
                 {{"priority", priority_string(priority)}, {"d_saliency", a.d_saliency}, {"d_speaker_feat", a.d_speaker},
                  {"sidecar", a.sidecar}},
                 {{"corpus", "corpus.jsonl"}, {"stats", "stats.txt"}});
  out << stats;
  return 0;
}

int cmd_synth(const SynthArgs& a, const CLI::App& sub, std::ostream& out) {
  ModelConfig cfg;
  cfg.d_saliency = a.d_saliency;
  cfg.d_speaker_feat = a.d_speaker;
  SyntheticOptions opts;
  opts.signal = parse_signal(a.signal);
  opts.noise = a.noise;
  const auto records = generate_synthetic(a.n, cfg, a.seed, opts);
  const fs::path dir = prepare_out_dir(a.out);
  std::string file;
  if (a.format == "raw") {
    std::vector<RawAnnotation> raw;
    raw.reserve(records.size());
    for (const auto& r : records)
      raw.push_back({r.record_id, r.utterance, r.flags, r.record_id + ".jpg", r.head_loc, r.saliency, r.speaker});
    file = "raw.jsonl";
    write_raw_annotations(dir / file, raw);
  } else {
    file = "corpus.jsonl";
    write_corpus(dir / file, records);
  }
  write_manifest(dir, "synth", sub,
                 {{"n", a.n}, {"signal", a.signal}, {"seed", a.seed}, {"noise", a.noise}, {"format", a.format}},
                 {{"corpus", file}});
  out << "wrote " << records.size() << " records to " << (dir / file).string() << "\n";
  return 0;
}

int cmd_train(const TrainArgs& a, const CLI::App& sub, std::ostream& out) {
  const auto records = read_corpus(a.corpus);
  if (records.empty()) throw DomainError("corpus " + a.corpus + " has no records");
  const auto splits = split(records, SplitSpec{a.seed});

  std::vector<std::vector<std::string>> train_tokens;
  for (const auto& r : splits.train) train_tokens.push_back(r.tokens);
  const Vocabulary vocab = build_vocab(train_tokens, a.min_count);

  ModelConfig model;
  model.d_saliency = records.front().saliency.size();
  model.d_speaker_feat = records.front().speaker.size();
  model.d_visual_hidden = a.visual_hidden;
  model.d_embed = a.embed_dim;
  model.d_lstm_hidden = a.lstm_hidden;
  model.vocab_size = vocab.size();
  model.variant = parse_variant(a.variant);
  model.validate();

  TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.batch_size = a.batch_size;
  cfg.max_epochs = a.max_epochs;
  cfg.patience = a.patience;
  cfg.seed = a.seed;
  const ClassStats train_stats = class_stats(std::span<const CorpusRecord>(splits.train));
  if (!a.no_class_weights) cfg.class_weights = compute_class_weights(train_stats.counts);

  std::optional<ModelParams> initial;
  std::int64_t matched = -1;
  if (!a.embeddings.empty() && uses_text(model.variant)) {
    Rng rng(a.seed);
    initial = init_params(model, rng);
    const auto pretrained = load_pretrained(a.embeddings, vocab, model.d_embed, a.seed);
    initial->embedding->table.assign(pretrained.table);
    matched = pretrained.matched;
  }

  const auto train_ex = make_examples(splits.train, vocab, a.max_tokens);
  const auto val_ex = make_examples(splits.val, vocab, a.max_tokens);
  const TrainResult result = train(train_ex, val_ex, model, cfg, vocab, initial);

  const fs::path dir = prepare_out_dir(a.out);
  save_checkpoint(result.best, dir / "checkpoint.bin");
  write_text(dir / "train_log.jsonl", format_epoch_log(result.log));
  json config = {{"model", model.canonical()},
                 {"learning_rate", cfg.learning_rate},
                 {"batch_size", cfg.batch_size},
                 {"max_epochs", cfg.max_epochs},
                 {"patience", cfg.patience},
                 {"seed", cfg.seed},
                 {"class_weights", cfg.class_weights.w},
                 {"split_sizes", {splits.train.size(), splits.val.size(), splits.test.size()}},
                 {"max_tokens", a.max_tokens},
                 {"min_count", a.min_count}};
  if (matched >= 0) config["pretrained_rows_matched"] = matched;
  write_manifest(dir, "train", sub, std::move(config),
                 {{"checkpoint", "checkpoint.bin"}, {"log", "train_log.jsonl"}});
  out << "variant " << variant_name(model.variant) << ": best epoch " << result.best.meta.epoch
      << ", validation accuracy " << result.best.meta.val_accuracy << " (" << result.log.size() << " epochs run)\n";
  return 0;
}

int cmd_eval(const EvalArgs& a, const CLI::App& sub, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const auto records = read_corpus(a.corpus);
  if (records.empty()) throw DomainError("corpus " + a.corpus + " has no records");
  if (records.front().saliency.size() != ckpt.config.d_saliency ||
      records.front().speaker.size() != ckpt.config.d_speaker_feat)
    throw ConfigMismatchError("corpus feature dimensions do not match checkpoint config {" + ckpt.config.canonical() +
                              "}");
  const std::uint64_t seed = a.seed.value_or(ckpt.meta.seed);
  std::vector<CorpusRecord> selection;
  if (a.split == "all") {
    selection = records;
  } else {
    auto splits = split(records, SplitSpec{seed});
    selection = a.split == "train" ? splits.train : a.split == "val" ? splits.val : splits.test;
  }
  const auto examples = make_examples(selection, ckpt.vocab, a.max_tokens);
  const EvalReport report = evaluate(ckpt.params, ckpt.config, examples);
  const std::string text = emit_report(report, ReportFormat::text_table);
  if (!a.out.empty()) {
    const fs::path dir = prepare_out_dir(a.out);
    write_text(dir / "report.txt", text);
    write_text(dir / "report.json", emit_report(report, ReportFormat::structured));
    write_manifest(dir, "eval", sub, {{"split", a.split}, {"seed", seed}, {"max_tokens", a.max_tokens}},
                   {{"text_report", "report.txt"}, {"structured_report", "report.json"}});
  }
  out << text;
  return 0;
}

int cmd_predict(const PredictArgs& a, std::istream& in, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  std::ifstream file;
  if (!a.input.empty()) {
    file.open(a.input);
    if (!file) throw IoError("cannot read " + a.input);
  }
  std::istream& src = a.input.empty() ? in : file;
  std::string line;
  std::size_t number = 0;
  while (std::getline(src, line)) {
    ++number;
    if (line.empty() || line == "\r") continue;
    CorpusRecord r;
    try {
      const json j = json::parse(line);
      if (j.contains("schema")) continue;
      r.record_id = j.at("id").get<std::string>();
      r.utterance = j.value("utterance", std::string());
      const auto loc = j.value("head_loc", std::vector<double>{0.5, 0.5});
      if (loc.size() != 2) throw FormatError("head_loc must have two components");
      r.head_loc = {loc[0], loc[1]};
      auto features = [&](const char* key, const std::string& suffix, Index dim) -> Eigen::VectorXd {
        if (!j.contains(key)) return stub_features(r.record_id + suffix, dim);
        const auto v = j[key].get<std::vector<double>>();
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
      };
      r.saliency = features("saliency", "#saliency", ckpt.config.d_saliency);
      r.speaker = features("speaker", "#speaker", ckpt.config.d_speaker_feat);
    } catch (const json::exception& e) {
      throw FormatError("input line " + std::to_string(number) + ": " + e.what());
    }
    r.tokens = tokenize(r.utterance);
    const Example ex = make_example(r, ckpt.vocab, a.max_tokens);
    const Var probs = class_probabilities(ckpt.params, ckpt.config, ex.input);
    const Index label = kernels::argmax(probs.value().data());
    const auto& p = probs.value().data();
    json result = {{"id", r.record_id},
                   {"label", std::string(class_display_name(label))},
                   {"class", label},
                   {"probabilities", {p[0], p[1], p[2]}}};
    out << result.dump() << "\n" << std::flush;
  }
  return 0;
}

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  if (a.corpus.empty() == a.raw.empty()) throw DomainError("stats needs exactly one of --corpus or --raw");
  if (!a.corpus.empty()) {
    const auto records = read_corpus(a.corpus);
    out << render_class_stats(class_stats(std::span<const CorpusRecord>(records)));
    return 0;
  }
  const auto annotations = read_raw_annotations(a.raw);
  const ClassPriority priority = parse_priority(a.priority);
  std::vector<Index> labels;
  for (const auto& ann : annotations)
    if (auto l = reorganize_label(ann.flags, priority)) labels.push_back(*l);
  out << "Annotation flags\n" << render_flag_stats(flag_stats(annotations)) << "\nAddressee classes\n"
      << render_class_stats(class_stats(labels));
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-modal addressee recognition: corpus preparation, training, evaluation and prediction", "arvsu"};
  app.set_version_flag("--version", std::string("arvsu ") + kToolVersion);
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Reorganize raw annotations into a three-class corpus");
  prepare->add_option("--raw", prep.raw, "Raw annotation file (arvsu-raw/1)")->required();
  prepare->add_option("--out", prep.out, "Output directory")->required();
  prepare->add_option("--priority", prep.priority, "Conflict priority, e.g. photographer,line_of_sight,others");
  prepare->add_option("--d-saliency", prep.d_saliency, "Saliency feature dimension for stubbed features");
  prepare->add_option("--d-speaker", prep.d_speaker, "Speaker feature dimension for stubbed features");
  prepare->add_flag("--sidecar", prep.sidecar, "Store features in binary sidecar files");

  SynthArgs syn;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--n", syn.n, "Number of records (at least 30)")->required();
  synth->add_option("--signal", syn.signal, "Where the label lives")->check(CLI::IsMember({"visual", "text", "both"}));
  synth->add_option("--seed", syn.seed, "Generator seed");
  synth->add_option("--out", syn.out, "Output directory")->required();
  synth->add_option("--d-saliency", syn.d_saliency, "Saliency feature dimension");
  synth->add_option("--d-speaker", syn.d_speaker, "Speaker feature dimension");
  synth->add_option("--noise", syn.noise, "Per-coordinate feature noise");
  synth->add_option("--format", syn.format, "corpus (labelled) or raw (annotations)")
      ->check(CLI::IsMember({"corpus", "raw"}));

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model variant with best-validation selection");
  train_cmd->add_option("--corpus", tr.corpus, "Corpus file (arvsu-corpus/1)")->required();
  train_cmd->add_option("--variant", tr.variant, "Model variant")
      ->check(CLI::IsMember({"visual_only", "text_only", "multimodal"}));
  train_cmd->add_option("--lr", tr.lr, "SGD learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--batch-size", tr.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--max-epochs", tr.max_epochs, "Epoch budget")->check(CLI::PositiveNumber);
  train_cmd->add_option("--patience", tr.patience, "Early stop after this many epochs without improvement (0: off)");
  train_cmd->add_option("--seed", tr.seed, "Seed for split, initialization and shuffling");
  train_cmd->add_option("--embeddings", tr.embeddings, "Pretrained word vectors (token v1 ... vd per line)");
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--min-count", tr.min_count, "Minimum token frequency for the vocabulary");
  train_cmd->add_option("--max-tokens", tr.max_tokens, "Truncate utterances to this many tokens (0: no limit)");
  train_cmd->add_option("--visual-hidden", tr.visual_hidden, "Width of each visual stream");
  train_cmd->add_option("--embed-dim", tr.embed_dim, "Word embedding dimension");
  train_cmd->add_option("--lstm-hidden", tr.lstm_hidden, "LSTM hidden units");
  train_cmd->add_flag("--no-class-weights", tr.no_class_weights, "Train with uniform class weights");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus split");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--corpus", ev.corpus, "Corpus file")->required();
  eval_cmd->add_option("--split", ev.split, "Which split to evaluate")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  eval_cmd->add_option("--seed", ev.seed, "Split seed (defaults to the checkpoint's training seed)");
  eval_cmd->add_option("--out", ev.out, "Directory for report.txt and report.json");
  eval_cmd->add_option("--max-tokens", ev.max_tokens, "Truncate utterances to this many tokens (0: no limit)");

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Classify records streamed as JSON lines");
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("--input", pr.input, "Record file (default: standard input)");
  predict_cmd->add_option("--max-tokens", pr.max_tokens, "Truncate utterances to this many tokens (0: no limit)");

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "Class and flag statistics");
  stats->add_option("--corpus", st.corpus, "Corpus file");
  stats->add_option("--raw", st.raw, "Raw annotation file");
  stats->add_option("--priority", st.priority, "Conflict priority for --raw");

  ReplayArgs rp;
  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay->add_option("--manifest", rp.manifest, "manifest.json written by a previous run")->required();

  for (CLI::App* sub : app.get_subcommands({})) attach_env_names(*sub);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error[usage]: " << msg << "\n";
    return 2;
  }

  try {
    if (*prepare) return cmd_prepare(prep, *prepare, out);
    if (*synth) return cmd_synth(syn, *synth, out);
    if (*train_cmd) return cmd_train(tr, *train_cmd, out);
    if (*eval_cmd) return cmd_eval(ev, *eval_cmd, out);
    if (*predict_cmd) return cmd_predict(pr, in, out);
    if (*stats) return cmd_stats(st, out);
    if (*replay) {
      std::ifstream f(rp.manifest);
      if (!f) throw IoError("cannot read manifest " + rp.manifest);
      json m;
      try {
        m = json::parse(f);
      } catch (const json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
      }
      std::vector<std::string> again{m.at("subcommand").get<std::string>()};
      for (const auto& a : m.at("args")) again.push_back(a.get<std::string>());
      return run(again, in, out, err);
    }
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error[" << e.kind() << "]: " << msg << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace arvsu::cli
