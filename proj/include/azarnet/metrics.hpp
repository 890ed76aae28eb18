#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "azarnet/model.hpp"

namespace azarnet {

// counts[true][predicted].
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = kNumClasses);

  std::size_t classes() const noexcept { return classes_; }
  std::size_t& at(std::size_t truth, std::size_t predicted) { return counts_.at(truth * classes_ + predicted); }
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * classes_ + predicted); }

  void add(std::size_t truth, std::size_t predicted);
  std::size_t total() const;
  std::size_t row_sum(std::size_t truth) const;
  std::size_t col_sum(std::size_t predicted) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::vector<std::size_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels,
                                 std::size_t classes = kNumClasses);

// Harmonic mean; 0 when p + r == 0.
double f1_score(double precision, double recall);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClassReport {
  std::vector<std::string> class_names;
  std::vector<ClassScores> per_class;
  double macro_f1 = 0.0;  // unweighted mean of per-class f1
};

// Zero denominators give 0 precision / recall.
ClassReport class_report(const ConfusionMatrix& cm, std::vector<std::string> class_names = {});

// Report from already-known precision/recall pairs (f1 recomputed).
ClassReport report_from_precision_recall(std::span<const double> precision, std::span<const double> recall,
                                         std::vector<std::string> class_names = {});

// Report carrying given f1 values only (precision/recall left at 0).
ClassReport report_from_f1(std::span<const double> f1, std::vector<std::string> class_names = {});

// Percent with two decimals, truncated rather than rounded (82.3456 ->
// "82.34"); a 1e-9 guard absorbs binary representation error.
std::string format_percent(double fraction);

// Fixed-width table: class, precision, recall, f1 in percent, then a macro
// F1 line.
std::string report_to_text(const ClassReport& report);

// class,precision,recall,f1 rows (fractions) plus a "macro" row.
std::string report_to_csv(const ClassReport& report);

}  // namespace azarnet
