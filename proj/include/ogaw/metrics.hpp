#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ogaw/tensor.hpp"

namespace ogaw {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::vector<std::uint64_t>> counts;
  std::vector<std::string> class_names;

  std::size_t num_classes() const { return counts.size(); }
  std::uint64_t total() const;
};

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions, std::size_t num_classes,
                          std::vector<std::string> class_names = {});

struct ClassMetrics {
  std::string name;
  std::uint64_t support = 0;
  double precision = 0, recall = 0, specificity = 0, f1 = 0;
};

/// Scalars in [0,1]. A per-class metric with a zero denominator is 0.
struct MetricsReport {
  std::optional<double> mean_auc;
  double balanced_accuracy = 0;
  double accuracy = 0;
  double f1_weighted = 0, f1_macro = 0;
  double precision_weighted = 0, precision_macro = 0;
  double recall_weighted = 0, recall_macro = 0;
  double specificity_macro = 0;
  std::uint64_t num_samples = 0;
  std::vector<ClassMetrics> per_class;
};

/// Everything except mean_auc.
MetricsReport classification_metrics(const ConfusionMatrix& cm);

/// Macro one-vs-rest ROC AUC by the Mann-Whitney statistic, ties counted 0.5.
/// Classes lacking positives or negatives are skipped.
double mean_auc(const Tensor& scores, std::span<const int> labels);

/// Fixed key order, values rounded to 4 decimals.
nlohmann::ordered_json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::ordered_json& json);
void emit_report(const MetricsReport& report, const std::string& path);
MetricsReport parse_report(const std::string& path);

/// Reference results in percent; nullopt where a value was not reported.
struct BaselineRow {
  std::string model;
  std::optional<double> mean_auc, balanced_accuracy, accuracy, f1, precision, recall, specificity;
};

const std::vector<BaselineRow>& baseline_rows();

/// Converts a report to a row in percent, using the weighted averages.
BaselineRow as_row(const MetricsReport& report, const std::string& model = "This run");

/// Table with the candidate row, each baseline row verbatim, and the
/// candidate's delta to every baseline ("-" where undefined).
std::string compare_to_baselines(const BaselineRow& candidate);

struct Predictions {
  std::vector<std::string> sample_ids;
  std::vector<int> labels, predicted;
  std::optional<Tensor> scores;  // [N,C] when the CSV carries score columns
  std::size_t num_classes = 0;
};

/// `sample_id,true_label,predicted_label,score_0..score_{C-1}`; the score
/// columns are optional.
Predictions parse_predictions_csv(const std::string& text);
std::string format_predictions_csv(const Predictions& predictions);

/// classification_metrics plus mean_auc when scores allow it.
MetricsReport evaluate_predictions(const Predictions& predictions, std::vector<std::string> class_names = {});

}  // namespace ogaw
