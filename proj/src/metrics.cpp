#include "azarnet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace azarnet {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  if (truth >= classes_ || predicted >= classes_) {
    throw ValidationError("class index out of range: (" + std::to_string(truth) + ", " +
                          std::to_string(predicted) + ") with " + std::to_string(classes_) + " classes");
  }
  ++counts_[truth * classes_ + predicted];
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t(0)); }

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t p = 0; p < classes_; ++p) s += at(truth, p);
  return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::size_t s = 0;
  for (std::size_t t = 0; t < classes_; ++t) s += at(t, predicted);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels,
                                 std::size_t classes) {
  if (predictions.size() != labels.size()) {
    throw DimensionError("confusion_matrix: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || predictions[i] < 0) throw ValidationError("negative class index");
    cm.add(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(predictions[i]));
  }
  return cm;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

namespace {

std::vector<std::string> default_names(std::vector<std::string> names, std::size_t n) {
  if (!names.empty()) {
    if (names.size() != n) throw DimensionError("class name count does not match the report");
    return names;
  }
  if (n == kNumClasses) return ModelConfig{}.class_names();
  for (std::size_t i = 0; i < n; ++i) names.push_back("class_" + std::to_string(i));
  return names;
}

void finish(ClassReport& r) {
  double sum = 0.0;
  for (const auto& c : r.per_class) sum += c.f1;
  r.macro_f1 = r.per_class.empty() ? 0.0 : sum / static_cast<double>(r.per_class.size());
}

}  // namespace

ClassReport class_report(const ConfusionMatrix& cm, std::vector<std::string> class_names) {
  ClassReport r;
  r.class_names = default_names(std::move(class_names), cm.classes());
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const std::size_t tp = cm.at(c, c);
    const std::size_t col = cm.col_sum(c);
    const std::size_t row = cm.row_sum(c);
    ClassScores s;
    s.precision = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    s.recall = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    s.f1 = f1_score(s.precision, s.recall);
    r.per_class.push_back(s);
  }
  finish(r);
  return r;
}

ClassReport report_from_precision_recall(std::span<const double> precision, std::span<const double> recall,
                                         std::vector<std::string> class_names) {
  if (precision.size() != recall.size()) throw DimensionError("precision/recall length mismatch");
  ClassReport r;
  r.class_names = default_names(std::move(class_names), precision.size());
  for (std::size_t c = 0; c < precision.size(); ++c) {
    r.per_class.push_back({precision[c], recall[c], f1_score(precision[c], recall[c])});
  }
  finish(r);
  return r;
}

ClassReport report_from_f1(std::span<const double> f1, std::vector<std::string> class_names) {
  ClassReport r;
  r.class_names = default_names(std::move(class_names), f1.size());
  for (double v : f1) r.per_class.push_back({0.0, 0.0, v});
  finish(r);
  return r;
}

std::string format_percent(double fraction) {
  const double hundredths = std::floor(fraction * 10000.0 + 1e-9 * std::max(1.0, std::abs(fraction * 10000.0)));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", hundredths / 100.0);
  return buf;
}

std::string report_to_text(const ClassReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "Class" << std::right << std::setw(11) << "Precision" << std::setw(9)
     << "Recall" << std::setw(9) << "F1" << '\n';
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& s = report.per_class[c];
    os << std::left << std::setw(16) << report.class_names[c] << std::right << std::setw(11)
       << format_percent(s.precision) << std::setw(9) << format_percent(s.recall) << std::setw(9)
       << format_percent(s.f1) << '\n';
  }
  os << std::left << std::setw(36) << "Macro F1" << std::right << std::setw(9) << format_percent(report.macro_f1)
     << '\n';
  return os.str();
}

std::string report_to_csv(const ClassReport& report) {
  std::ostringstream os;
  os << "class,precision,recall,f1\n";
  os << std::setprecision(17);
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& s = report.per_class[c];
    os << report.class_names[c] << ',' << s.precision << ',' << s.recall << ',' << s.f1 << '\n';
  }
  os << "macro,,," << report.macro_f1 << '\n';
  return os.str();
}

}  // namespace azarnet
