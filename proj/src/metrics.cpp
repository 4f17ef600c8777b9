#include "ogaw/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ogaw/error.hpp"

namespace ogaw {

using Json = nlohmann::ordered_json;

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
  return t;
}

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions, std::size_t num_classes,
                          std::vector<std::string> class_names) {
  if (labels.size() != predictions.size()) {
    throw ValidationError("confusion: " + std::to_string(labels.size()) + " labels but " +
                          std::to_string(predictions.size()) + " predictions");
  }
  if (num_classes == 0) throw ValidationError("confusion: num_classes must be positive");
  if (!class_names.empty() && class_names.size() != num_classes) {
    throw ValidationError("confusion: class_names has the wrong length");
  }
  ConfusionMatrix cm;
  cm.counts.assign(num_classes, std::vector<std::uint64_t>(num_classes, 0));
  if (class_names.empty()) {
    for (std::size_t c = 0; c < num_classes; ++c) class_names.push_back(std::to_string(c));
  }
  cm.class_names = std::move(class_names);
  const int c_max = static_cast<int>(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= c_max) {
      throw ValidationError("confusion: label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                            " is outside [0," + std::to_string(num_classes) + ")");
    }
    if (predictions[i] < 0 || predictions[i] >= c_max) {
      throw ValidationError("confusion: prediction " + std::to_string(predictions[i]) + " at index " +
                            std::to_string(i) + " is outside [0," + std::to_string(num_classes) + ")");
    }
    ++cm.counts[labels[i]][predictions[i]];
  }
  return cm;
}

namespace {

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

}  // namespace

MetricsReport classification_metrics(const ConfusionMatrix& cm) {
  const std::size_t c = cm.num_classes();
  const std::uint64_t total = cm.total();
  if (c == 0 || total == 0) throw ValidationError("classification_metrics: empty confusion matrix");

  std::vector<std::uint64_t> row(c, 0), col(c, 0);
  std::uint64_t diag = 0;
  for (std::size_t t = 0; t < c; ++t)
    for (std::size_t p = 0; p < c; ++p) {
      row[t] += cm.counts[t][p];
      col[p] += cm.counts[t][p];
      if (t == p) diag += cm.counts[t][p];
    }

  MetricsReport r;
  r.num_samples = total;
  r.accuracy = static_cast<double>(diag) / static_cast<double>(total);
  for (std::size_t k = 0; k < c; ++k) {
    const double tp = static_cast<double>(cm.counts[k][k]);
    const double fn = static_cast<double>(row[k]) - tp;
    const double fp = static_cast<double>(col[k]) - tp;
    const double tn = static_cast<double>(total) - tp - fn - fp;
    ClassMetrics m;
    m.name = k < cm.class_names.size() ? cm.class_names[k] : std::to_string(k);
    m.support = row[k];
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    m.specificity = ratio(tn, tn + fp);
    m.f1 = ratio(2 * m.precision * m.recall, m.precision + m.recall);
    r.per_class.push_back(m);

    const double w = static_cast<double>(row[k]) / static_cast<double>(total);
    r.precision_weighted += w * m.precision;
    r.recall_weighted += w * m.recall;
    r.f1_weighted += w * m.f1;
    r.precision_macro += m.precision;
    r.recall_macro += m.recall;
    r.f1_macro += m.f1;
    r.specificity_macro += m.specificity;
  }
  const double cd = static_cast<double>(c);
  r.precision_macro /= cd;
  r.recall_macro /= cd;
  r.f1_macro /= cd;
  r.specificity_macro /= cd;
  r.balanced_accuracy = r.recall_macro;
  // Support-weighted recall is sum(TP)/N; use the exact value rather than the
  // rounded sum of products.
  r.recall_weighted = r.accuracy;
  return r;
}

double mean_auc(const Tensor& scores, std::span<const int> labels) {
  if (scores.rank() != 2) throw DimensionError("mean_auc: scores must be [N,C], got " + shape_string(scores.shape()));
  const std::size_t n = scores.dim(0), c = scores.dim(1);
  if (labels.size() != n) throw DimensionError("mean_auc: labels and scores disagree on N");
  if (n < 2) throw ValidationError("mean_auc: need at least two samples");
  if (!scores.all_finite()) throw NumericError("mean_auc: non-finite score");
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw ValidationError("mean_auc: label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                            " is out of range");
    }
  }
  auto d = scores.data();
  double sum = 0;
  std::size_t used = 0;
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < c; ++k) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a * c + k] < d[b * c + k]; });
    // Midranks in doubled units keep the tie arithmetic in integers.
    std::uint64_t pos = 0, rank2_sum = 0;
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j < n && d[order[j] * c + k] == d[order[i] * c + k]) ++j;
      const std::uint64_t midrank2 = i + 1 + j;  // 2 · (i+1 + j)/2
      for (std::size_t q = i; q < j; ++q) {
        if (static_cast<std::size_t>(labels[order[q]]) == k) {
          ++pos;
          rank2_sum += midrank2;
        }
      }
      i = j;
    }
    const std::uint64_t neg = n - pos;
    if (pos == 0 || neg == 0) continue;
    // 2U = rank2_sum - pos(pos+1)
    const std::uint64_t u2 = rank2_sum - pos * (pos + 1);
    sum += static_cast<double>(u2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
    ++used;
  }
  if (used == 0) throw ValidationError("mean_auc: undefined AUC (no class has both positives and negatives)");
  return sum / static_cast<double>(used);
}

namespace {

double round4(double v) { return std::round(v * 1e4) / 1e4; }

double get_number(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) throw ValidationError(std::string("report: missing field '") + key + "'");
  return j.at(key).get<double>();
}

}  // namespace

Json report_to_json(const MetricsReport& r) {
  Json j;
  j["mean_auc"] = r.mean_auc ? Json(round4(*r.mean_auc)) : Json(nullptr);
  j["balanced_accuracy"] = round4(r.balanced_accuracy);
  j["accuracy"] = round4(r.accuracy);
  j["f1_weighted"] = round4(r.f1_weighted);
  j["f1_macro"] = round4(r.f1_macro);
  j["precision_weighted"] = round4(r.precision_weighted);
  j["precision_macro"] = round4(r.precision_macro);
  j["recall_weighted"] = round4(r.recall_weighted);
  j["recall_macro"] = round4(r.recall_macro);
  j["specificity_macro"] = round4(r.specificity_macro);
  j["num_samples"] = r.num_samples;
  j["zero_denominator_policy"] = "per-class metrics with a zero denominator count as 0";
  Json per = Json::array();
  for (const auto& m : r.per_class) {
    Json e;
    e["name"] = m.name;
    e["support"] = m.support;
    e["precision"] = round4(m.precision);
    e["recall"] = round4(m.recall);
    e["specificity"] = round4(m.specificity);
    e["f1"] = round4(m.f1);
    per.push_back(std::move(e));
  }
  j["per_class"] = std::move(per);
  return j;
}

MetricsReport report_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("report: expected a JSON object");
  MetricsReport r;
  if (j.contains("mean_auc") && !j.at("mean_auc").is_null()) r.mean_auc = get_number(j, "mean_auc");
  r.balanced_accuracy = get_number(j, "balanced_accuracy");
  r.accuracy = get_number(j, "accuracy");
  r.f1_weighted = get_number(j, "f1_weighted");
  r.f1_macro = get_number(j, "f1_macro");
  r.precision_weighted = get_number(j, "precision_weighted");
  r.precision_macro = get_number(j, "precision_macro");
  r.recall_weighted = get_number(j, "recall_weighted");
  r.recall_macro = get_number(j, "recall_macro");
  r.specificity_macro = get_number(j, "specificity_macro");
  r.num_samples = static_cast<std::uint64_t>(get_number(j, "num_samples"));
  if (j.contains("per_class")) {
    for (const auto& e : j.at("per_class")) {
      ClassMetrics m;
      m.name = e.value("name", std::string{});
      m.support = static_cast<std::uint64_t>(get_number(e, "support"));
      m.precision = get_number(e, "precision");
      m.recall = get_number(e, "recall");
      m.specificity = get_number(e, "specificity");
      m.f1 = get_number(e, "f1");
      r.per_class.push_back(m);
    }
  }
  return r;
}

void emit_report(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write report '" + path + "'");
  out << report_to_json(report).dump(2) << "\n";
  if (!out) throw IoError("failed writing report '" + path + "'");
}

MetricsReport parse_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("report '" + path + "': " + e.what());
  }
  return report_from_json(j);
}

const std::vector<BaselineRow>& baseline_rows() {
  static const std::vector<BaselineRow> rows = {
      {"VGG16", 91.61, 56.84, 69.06, 48.44, 52.46, 54.30, 96.97},
      {"ResNet50", 87.10, std::nullopt, 76.02, 76.0, 78.0, 76.0, std::nullopt},
      {"Our Model", 87.49, 94.81, 91.19, 91.11, 91.17, 91.19, 98.44},
  };
  return rows;
}

BaselineRow as_row(const MetricsReport& r, const std::string& model) {
  BaselineRow row;
  row.model = model;
  if (r.mean_auc) row.mean_auc = 100.0 * *r.mean_auc;
  row.balanced_accuracy = 100.0 * r.balanced_accuracy;
  row.accuracy = 100.0 * r.accuracy;
  row.f1 = 100.0 * r.f1_weighted;
  row.precision = 100.0 * r.precision_weighted;
  row.recall = 100.0 * r.recall_weighted;
  row.specificity = 100.0 * r.specificity_macro;
  return row;
}

namespace {

using Field = std::optional<double> BaselineRow::*;
constexpr Field kFields[] = {&BaselineRow::mean_auc,  &BaselineRow::balanced_accuracy, &BaselineRow::accuracy,
                             &BaselineRow::f1,        &BaselineRow::precision,         &BaselineRow::recall,
                             &BaselineRow::specificity};

std::string cell(const std::optional<double>& v, bool signed_value = false) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, signed_value ? "%+.2f" : "%.2f", *v);
  return buf;
}

std::string format_line(const std::string& label, const std::vector<std::string>& cells) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-22s", label.c_str());
  std::string line = buf;
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "%10s", c.c_str());
    line += buf;
  }
  return line + "\n";
}

}  // namespace

std::string compare_to_baselines(const BaselineRow& candidate) {
  std::string out = format_line(
      "model", {"mean_auc", "bal_acc", "accuracy", "f1", "precision", "recall", "specific."});
  auto row_cells = [](const BaselineRow& r) {
    std::vector<std::string> cells;
    for (Field f : kFields) cells.push_back(cell(r.*f));
    return cells;
  };
  out += format_line(candidate.model, row_cells(candidate));
  for (const auto& b : baseline_rows()) out += format_line(b.model, row_cells(b));
  for (const auto& b : baseline_rows()) {
    std::vector<std::string> cells;
    for (Field f : kFields) {
      const auto& a = candidate.*f;
      const auto& r = b.*f;
      cells.push_back(a && r ? cell(*a - *r, true) : "-");
    }
    out += format_line("delta vs " + b.model, cells);
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line, const char* what) {
  try {
    std::size_t used = 0;
    T v;
    if constexpr (std::is_same_v<T, int>) {
      v = std::stoi(s, &used);
    } else {
      v = std::stod(s, &used);
    }
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("predictions line " + std::to_string(line) + ": invalid " + what + " '" + s + "'");
  }
}

}  // namespace

Predictions parse_predictions_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ValidationError("predictions: empty file");
  ++line_no;
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "sample_id" || header[1] != "true_label" || header[2] != "predicted_label") {
    throw ValidationError("predictions line 1: expected header 'sample_id,true_label,predicted_label[,score_0..]'");
  }
  const std::size_t num_scores = header.size() - 3;
  for (std::size_t k = 0; k < num_scores; ++k) {
    if (header[3 + k] != "score_" + std::to_string(k)) {
      throw ValidationError("predictions line 1: column " + std::to_string(4 + k) + " should be 'score_" +
                            std::to_string(k) + "'");
    }
  }
  Predictions p;
  std::vector<double> scores;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw ValidationError("predictions line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    }
    p.sample_ids.push_back(f[0]);
    p.labels.push_back(parse_number<int>(f[1], line_no, "true_label"));
    p.predicted.push_back(parse_number<int>(f[2], line_no, "predicted_label"));
    for (std::size_t k = 0; k < num_scores; ++k) scores.push_back(parse_number<double>(f[3 + k], line_no, "score"));
  }
  if (p.labels.empty()) throw ValidationError("predictions: no rows");
  int max_label = 0;
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    if (p.labels[i] < 0 || p.predicted[i] < 0) {
      throw ValidationError("predictions line " + std::to_string(i + 2) + ": negative class index");
    }
    max_label = std::max({max_label, p.labels[i], p.predicted[i]});
  }
  p.num_classes = num_scores > 0 ? num_scores : static_cast<std::size_t>(max_label) + 1;
  if (static_cast<std::size_t>(max_label) >= p.num_classes) {
    throw ValidationError("predictions: class index " + std::to_string(max_label) + " has no score column");
  }
  if (num_scores > 0) p.scores = Tensor(Shape{p.labels.size(), num_scores}, std::move(scores));
  return p;
}

std::string format_predictions_csv(const Predictions& p) {
  std::string out = "sample_id,true_label,predicted_label";
  const std::size_t c = p.scores ? p.scores->dim(1) : 0;
  for (std::size_t k = 0; k < c; ++k) out += ",score_" + std::to_string(k);
  out += "\n";
  char buf[40];
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    out += p.sample_ids[i] + "," + std::to_string(p.labels[i]) + "," + std::to_string(p.predicted[i]);
    for (std::size_t k = 0; k < c; ++k) {
      std::snprintf(buf, sizeof buf, ",%.17g", p.scores->at(i * c + k));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

MetricsReport evaluate_predictions(const Predictions& p, std::vector<std::string> class_names) {
  auto report = classification_metrics(confusion(p.labels, p.predicted, p.num_classes, std::move(class_names)));
  if (p.scores) {
    try {
      report.mean_auc = mean_auc(*p.scores, p.labels);
    } catch (const ValidationError&) {
      report.mean_auc.reset();
    }
  }
  return report;
}

}  // namespace ogaw
