#include "arvsu/evaluation.hpp"

#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

namespace arvsu {

namespace {

double ratio(Index num, Index den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

std::string class_label(Index c, Index num_classes) {
  return num_classes == kNumClasses ? std::string(class_display_name(c)) : "class " + std::to_string(c);
}

}  // namespace

ConfusionMatrix ConfusionMatrix::from_predictions(std::span<const Index> truth, std::span<const Index> predicted,
                                                  Index num_classes) {
  if (truth.size() != predicted.size())
    throw DimensionError("confusion matrix: " + std::to_string(truth.size()) + " labels vs " +
                         std::to_string(predicted.size()) + " predictions");
  if (num_classes < 1) throw DomainError("confusion matrix: need at least one class");
  ConfusionMatrix m{CountMatrix::Zero(num_classes, num_classes)};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 || predicted[i] >= num_classes)
      throw DomainError("confusion matrix: class index out of range");
    ++m.counts(truth[i], predicted[i]);
  }
  return m;
}

EvalReport report_from_confusion(const ConfusionMatrix& confusion, std::string name) {
  EvalReport r;
  r.name = std::move(name);
  r.confusion = confusion;
  r.n = confusion.total();
  const Index k = confusion.num_classes();
  r.accuracy = ratio(confusion.counts.trace(), r.n);
  r.per_class.resize(static_cast<std::size_t>(k));
  for (Index c = 0; c < k; ++c) {
    ClassMetrics& m = r.per_class[static_cast<std::size_t>(c)];
    const Index tp = confusion.counts(c, c);
    m.support = confusion.counts.row(c).sum();
    m.precision = ratio(tp, confusion.counts.col(c).sum());
    m.recall = ratio(tp, m.support);
    const double denom = m.precision + m.recall;
    m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
    r.macro_precision += m.precision / static_cast<double>(k);
    r.macro_recall += m.recall / static_cast<double>(k);
    r.macro_f1 += m.f1 / static_cast<double>(k);
  }
  return r;
}

EvalReport evaluate_predictions(std::span<const Index> truth, std::span<const Index> predicted, Index num_classes,
                                std::string name) {
  return report_from_confusion(ConfusionMatrix::from_predictions(truth, predicted, num_classes), std::move(name));
}

EvalReport evaluate(const ModelParams& params, const ModelConfig& cfg, std::span<const Example> dataset) {
  if (dataset.empty()) throw DomainError("evaluate: empty dataset");
  std::vector<Index> truth;
  std::vector<Index> predicted;
  truth.reserve(dataset.size());
  predicted.reserve(dataset.size());
  for (const auto& ex : dataset) {
    truth.push_back(ex.label);
    predicted.push_back(predict(params, cfg, ex.input));
  }
  return evaluate_predictions(truth, predicted, cfg.n_classes, std::string(variant_name(cfg.variant)));
}

double cohen_kappa(std::span<const Index> labels_a, std::span<const Index> labels_b) {
  if (labels_a.size() != labels_b.size())
    throw DimensionError("cohen_kappa: label lists have lengths " + std::to_string(labels_a.size()) + " and " +
                         std::to_string(labels_b.size()));
  if (labels_a.empty()) throw DomainError("cohen_kappa: empty label lists");
  const double n = static_cast<double>(labels_a.size());
  std::map<Index, std::pair<Index, Index>> marginals;
  Index agree = 0;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    ++marginals[labels_a[i]].first;
    ++marginals[labels_b[i]].second;
    agree += labels_a[i] == labels_b[i];
  }
  const double p_o = static_cast<double>(agree) / n;
  double p_e = 0.0;
  for (const auto& [label, m] : marginals)
    p_e += (static_cast<double>(m.first) / n) * (static_cast<double>(m.second) / n);
  if (p_e >= 1.0) return agree == static_cast<Index>(labels_a.size()) ? 1.0 : 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

double binary_kappa_per_label(std::span<const FlagSet> ann_a, std::span<const FlagSet> ann_b, AddresseeFlag label) {
  if (ann_a.size() != ann_b.size())
    throw DimensionError("binary_kappa_per_label: annotation lists differ in length");
  std::vector<Index> a;
  std::vector<Index> b;
  a.reserve(ann_a.size());
  b.reserve(ann_b.size());
  for (std::size_t i = 0; i < ann_a.size(); ++i) {
    a.push_back(ann_a[i].contains(label) ? 1 : 0);
    b.push_back(ann_b[i].contains(label) ? 1 : 0);
  }
  return cohen_kappa(a, b);
}

namespace {

std::string pct(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

std::string text_table(const EvalReport& r) {
  const Index k = static_cast<Index>(r.per_class.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "Accuracy (%%): %s  (n = %lld)\n\n", pct(r.accuracy).c_str(),
                static_cast<long long>(r.n));
  out += buf;

  std::snprintf(buf, sizeof buf, "%-14s", "Experiment");
  out += buf;
  for (Index c = 0; c < k; ++c) {
    std::snprintf(buf, sizeof buf, " | %-22s", class_label(c, k).c_str());
    out += buf;
  }
  out += "\n";
  std::snprintf(buf, sizeof buf, "%-14s", "");
  out += buf;
  for (Index c = 0; c < k; ++c) {
    std::snprintf(buf, sizeof buf, " | %6s %6s %8s", "Pre.", "Rec.", "F1");
    out += buf;
  }
  out += "\n";
  std::snprintf(buf, sizeof buf, "%-14s", r.name.c_str());
  out += buf;
  for (const auto& m : r.per_class) {
    std::snprintf(buf, sizeof buf, " | %6s %6s %8s", pct(m.precision).c_str(), pct(m.recall).c_str(),
                  pct(m.f1).c_str());
    out += buf;
  }
  out += "\n\nConfusion matrix (rows: true class, columns: predicted class)\n";
  std::snprintf(buf, sizeof buf, "%-24s", "");
  out += buf;
  for (Index c = 0; c < k; ++c) {
    std::snprintf(buf, sizeof buf, " %24s", class_label(c, k).c_str());
    out += buf;
  }
  out += "\n";
  for (Index t = 0; t < k; ++t) {
    std::snprintf(buf, sizeof buf, "%-24s", class_label(t, k).c_str());
    out += buf;
    for (Index p = 0; p < k; ++p) {
      std::snprintf(buf, sizeof buf, " %24lld", static_cast<long long>(r.confusion.counts(t, p)));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace

std::string emit_report(const EvalReport& r, ReportFormat format) {
  if (format == ReportFormat::text_table) return text_table(r);
  using nlohmann::json;
  const Index k = static_cast<Index>(r.per_class.size());
  json classes = json::array();
  for (Index c = 0; c < k; ++c) {
    const auto& m = r.per_class[static_cast<std::size_t>(c)];
    classes.push_back({{"name", class_label(c, k)},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support}});
  }
  json confusion = json::array();
  for (Index t = 0; t < r.confusion.num_classes(); ++t) {
    json row = json::array();
    for (Index p = 0; p < r.confusion.num_classes(); ++p) row.push_back(r.confusion.counts(t, p));
    confusion.push_back(row);
  }
  json j = {{"schema", std::string(kEvalSchema)},
            {"name", r.name},
            {"n", r.n},
            {"accuracy", r.accuracy},
            {"classes", classes},
            {"macro", {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}}},
            {"confusion", confusion}};
  return j.dump(2) + "\n";
}

EvalReport parse_structured_report(const std::string& text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("evaluation report: ") + e.what());
  }
  if (j.value("schema", std::string()) != kEvalSchema) throw VersionError("evaluation report: unexpected schema");
  try {
    EvalReport r;
    r.name = j.at("name").get<std::string>();
    r.n = j.at("n").get<Index>();
    r.accuracy = j.at("accuracy").get<double>();
    for (const auto& c : j.at("classes"))
      r.per_class.push_back({c.at("precision").get<double>(), c.at("recall").get<double>(), c.at("f1").get<double>(),
                             c.at("support").get<Index>()});
    r.macro_precision = j.at("macro").at("precision").get<double>();
    r.macro_recall = j.at("macro").at("recall").get<double>();
    r.macro_f1 = j.at("macro").at("f1").get<double>();
    const auto& rows = j.at("confusion");
    const Index k = static_cast<Index>(rows.size());
    r.confusion.counts = CountMatrix::Zero(k, k);
    for (Index t = 0; t < k; ++t) {
      if (static_cast<Index>(rows[t].size()) != k) throw FormatError("evaluation report: confusion matrix not square");
      for (Index p = 0; p < k; ++p) r.confusion.counts(t, p) = rows[t][p].get<Index>();
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("evaluation report: ") + e.what());
  }
}

}  // namespace arvsu
