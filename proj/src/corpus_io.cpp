#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "arvsu/corpus.hpp"
#include "binary_io.hpp"

namespace arvsu {

using nlohmann::json;

namespace {

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("write failed for " + path.string());
}

json vector_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd json_vector(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

json flags_json(FlagSet flags) {
  json arr = json::array();
  for (auto f : flags.members()) arr.push_back(std::string(flag_name(f)));
  return arr;
}

FlagSet json_flags(const json& j) {
  FlagSet flags;
  for (const auto& f : j) flags.insert(parse_flag(f.get<std::string>()));
  return flags;
}

std::array<double, 2> json_head_loc(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw FormatError("head_loc must have two components");
  return {v[0], v[1]};
}

std::filesystem::path sidecar_path(const std::filesystem::path& corpus, const char* kind) {
  std::filesystem::path p = corpus;
  p.replace_filename(corpus.stem().string() + "." + kind + ".f64");
  return p;
}

// Reads a JSON-lines file, invoking fn(line_number, object) per non-empty line.
template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line == "\r") continue;
    try {
      fn(number, json::parse(line));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    } catch (const VersionError&) {
      throw;
    } catch (const IoError&) {
      throw;
    } catch (const TruncatedError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void check_schema(const json& header, std::string_view expected, const std::filesystem::path& path) {
  if (!header.contains("schema") || header["schema"].get<std::string>() != expected)
    throw VersionError(path.string() + ": expected schema " + std::string(expected));
}

}  // namespace

void write_feature_sidecar(const std::filesystem::path& path, const FeatureMatrix& features) {
  binary::Writer w;
  w.bytes(kSidecarMagic, sizeof kSidecarMagic);
  w.u64(static_cast<std::uint64_t>(features.dim));
  w.u64(features.rows.size());
  for (const auto& row : features.rows) {
    if (row.size() != features.dim) throw DimensionError("feature sidecar rows must all have dimension " +
                                                         std::to_string(features.dim));
    for (Index i = 0; i < row.size(); ++i) w.f64(row[i]);
  }
  write_all(path, w.buffer().data(), w.buffer().size());
}

FeatureMatrix read_feature_sidecar(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  binary::Reader r(bytes.data(), bytes.size(), path.string());
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (!std::equal(std::begin(magic), std::end(magic), std::begin(kSidecarMagic)))
    throw FormatError(path.string() + " is not a feature sidecar");
  FeatureMatrix m;
  m.dim = static_cast<Index>(r.u64());
  const std::uint64_t count = r.u64();
  if (m.dim <= 0) throw FormatError(path.string() + ": feature dimension must be positive");
  if (r.remaining() / 8 / static_cast<std::uint64_t>(m.dim) < count)
    throw TruncatedError(path.string() + ": expected " + std::to_string(count) + " rows");
  m.rows.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    Eigen::VectorXd row(m.dim);
    for (Index i = 0; i < m.dim; ++i) row[i] = r.f64();
    m.rows.push_back(std::move(row));
  }
  return m;
}

void write_corpus(const std::filesystem::path& path, std::span<const CorpusRecord> records,
                  const CorpusWriteOptions& opts) {
  const Index d_sal = records.empty() ? 0 : records.front().saliency.size();
  const Index d_spk = records.empty() ? 0 : records.front().speaker.size();
  json header = {{"schema", std::string(kCorpusSchema)},
                 {"count", records.size()},
                 {"d_saliency", d_sal},
                 {"d_speaker_feat", d_spk},
                 {"features", opts.sidecar ? "sidecar" : "inline"}};
  FeatureMatrix sal{d_sal, {}};
  FeatureMatrix spk{d_spk, {}};
  if (opts.sidecar) {
    header["saliency_sidecar"] = sidecar_path(path, "saliency").filename().string();
    header["speaker_sidecar"] = sidecar_path(path, "speaker").filename().string();
  }

  std::string text = header.dump() + "\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const CorpusRecord& r = records[i];
    if (r.saliency.size() != d_sal || r.speaker.size() != d_spk)
      throw DimensionError("record " + r.record_id + " feature dimensions differ from the first record");
    json j = {{"id", r.record_id},
              {"utterance", r.utterance},
              {"flags", flags_json(r.flags)},
              {"head_loc", {r.head_loc[0], r.head_loc[1]}},
              {"label", std::string(class_key(r.label))}};
    if (opts.sidecar) {
      j["feature_row"] = i;
      sal.rows.push_back(r.saliency);
      spk.rows.push_back(r.speaker);
    } else {
      j["saliency"] = vector_json(r.saliency);
      j["speaker"] = vector_json(r.speaker);
    }
    text += j.dump() + "\n";
  }
  write_all(path, text.data(), text.size());
  if (opts.sidecar) {
    write_feature_sidecar(sidecar_path(path, "saliency"), sal);
    write_feature_sidecar(sidecar_path(path, "speaker"), spk);
  }
}

std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path) {
  std::vector<CorpusRecord> records;
  bool have_header = false;
  bool sidecar = false;
  std::size_t expected_count = 0;
  Index d_sal = 0;
  Index d_spk = 0;
  FeatureMatrix sal;
  FeatureMatrix spk;
  for_each_json_line(path, [&](std::size_t, const json& j) {
    if (!have_header) {
      check_schema(j, kCorpusSchema, path);
      have_header = true;
      expected_count = j.at("count").get<std::size_t>();
      d_sal = j.at("d_saliency").get<Index>();
      d_spk = j.at("d_speaker_feat").get<Index>();
      sidecar = j.at("features").get<std::string>() == "sidecar";
      if (sidecar) {
        const auto dir = path.parent_path();
        sal = read_feature_sidecar(dir / j.at("saliency_sidecar").get<std::string>());
        spk = read_feature_sidecar(dir / j.at("speaker_sidecar").get<std::string>());
      }
      return;
    }
    CorpusRecord r;
    r.record_id = j.at("id").get<std::string>();
    r.utterance = j.at("utterance").get<std::string>();
    r.tokens = tokenize(r.utterance);
    r.flags = json_flags(j.at("flags"));
    r.head_loc = json_head_loc(j.at("head_loc"));
    r.label = parse_class_key(j.at("label").get<std::string>());
    if (sidecar) {
      const auto row = j.at("feature_row").get<std::size_t>();
      if (row >= sal.rows.size() || row >= spk.rows.size())
        throw FormatError("feature_row " + std::to_string(row) + " outside sidecar");
      r.saliency = sal.rows[row];
      r.speaker = spk.rows[row];
    } else {
      r.saliency = json_vector(j.at("saliency"));
      r.speaker = json_vector(j.at("speaker"));
    }
    if (r.saliency.size() != d_sal || r.speaker.size() != d_spk)
      throw DimensionError("record " + r.record_id + " feature dimensions differ from the header");
    r.validate();
    records.push_back(std::move(r));
  });
  if (!have_header) throw FormatError(path.string() + ": empty corpus file");
  if (records.size() != expected_count)
    throw TruncatedError(path.string() + ": header announces " + std::to_string(expected_count) + " records, found " +
                         std::to_string(records.size()));
  return records;
}

void write_raw_annotations(const std::filesystem::path& path, std::span<const RawAnnotation> annotations) {
  std::string text = json{{"schema", std::string(kRawSchema)}}.dump() + "\n";
  for (const auto& a : annotations) {
    json j = {{"id", a.record_id},
              {"utterance", a.utterance},
              {"flags", flags_json(a.flags)},
              {"image", a.image_ref},
              {"head_loc", {a.head_loc[0], a.head_loc[1]}}};
    if (a.saliency.size()) j["saliency"] = vector_json(a.saliency);
    if (a.speaker.size()) j["speaker"] = vector_json(a.speaker);
    text += j.dump() + "\n";
  }
  write_all(path, text.data(), text.size());
}

std::vector<RawAnnotation> read_raw_annotations(const std::filesystem::path& path) {
  std::vector<RawAnnotation> out;
  bool have_header = false;
  for_each_json_line(path, [&](std::size_t, const json& j) {
    if (!have_header) {
      check_schema(j, kRawSchema, path);
      have_header = true;
      return;
    }
    RawAnnotation a;
    a.record_id = j.at("id").get<std::string>();
    a.utterance = j.at("utterance").get<std::string>();
    a.flags = json_flags(j.at("flags"));
    if (a.flags.empty()) throw FormatError("annotation " + a.record_id + " has no addressee flags");
    a.image_ref = j.value("image", std::string());
    a.head_loc = json_head_loc(j.at("head_loc"));
    for (double v : a.head_loc)
      if (!(v >= 0.0 && v <= 1.0)) throw FormatError("annotation " + a.record_id + " head_loc outside [0,1]");
    if (j.contains("saliency")) a.saliency = json_vector(j["saliency"]);
    if (j.contains("speaker")) a.speaker = json_vector(j["speaker"]);
    out.push_back(std::move(a));
  });
  if (!have_header) throw FormatError(path.string() + ": empty annotation file");
  return out;
}

}  // namespace arvsu
