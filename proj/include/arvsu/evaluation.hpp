#ifndef ARVSU_EVALUATION_HPP
#define ARVSU_EVALUATION_HPP

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arvsu/corpus.hpp"
#include "arvsu/model.hpp"

namespace arvsu {

using CountMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  CountMatrix counts;

  Index num_classes() const { return counts.rows(); }
  Index total() const { return counts.sum(); }

  static ConfusionMatrix from_predictions(std::span<const Index> truth, std::span<const Index> predicted,
                                          Index num_classes);
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Index support = 0;  // true instances of the class
};

struct EvalReport {
  std::string name = "model";
  Index n = 0;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  ConfusionMatrix confusion;
};

// Metrics from a confusion matrix. A ratio with a zero denominator is 0.
EvalReport report_from_confusion(const ConfusionMatrix& confusion, std::string name = "model");
EvalReport evaluate_predictions(std::span<const Index> truth, std::span<const Index> predicted, Index num_classes,
                                std::string name = "model");

// Runs predict() on every example. Throws DomainError on an empty dataset.
EvalReport evaluate(const ModelParams& params, const ModelConfig& cfg, std::span<const Example> dataset);

// kappa = (p_o - p_e) / (1 - p_e) over the categories seen in either list.
// When p_e == 1 the result is 1 if the lists agree everywhere, else 0.
double cohen_kappa(std::span<const Index> labels_a, std::span<const Index> labels_b);

// Kappa on presence/absence of `label` in each annotator's flag set.
double binary_kappa_per_label(std::span<const FlagSet> ann_a, std::span<const FlagSet> ann_b, AddresseeFlag label);

enum class ReportFormat { text_table, structured };

inline constexpr std::string_view kEvalSchema = "arvsu-eval/1";

// text_table: per-class Pre./Rec./F1 in percent with one decimal, in the
// order Line-of-Sight Entities, Photographer, Others, followed by the
// confusion matrix. structured: one JSON document at full precision.
std::string emit_report(const EvalReport& report, ReportFormat format);
EvalReport parse_structured_report(const std::string& text);

}  // namespace arvsu

#endif  // ARVSU_EVALUATION_HPP
