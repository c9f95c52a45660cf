#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cuneiform/nn/train.hpp"

namespace cuneiform::metrics {

struct ClassCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct ConfusionCounts {
  std::size_t num_classes = 0;
  std::uint64_t total = 0;
  std::vector<std::uint64_t> matrix;  // row = label, column = prediction
  std::vector<ClassCounts> per_class;

  std::uint64_t at(std::size_t label, std::size_t pred) const { return matrix[label * num_classes + pred]; }
  std::uint64_t correct() const;
  // Number of samples whose label is c.
  std::uint64_t support(std::size_t c) const { return per_class.at(c).tp + per_class.at(c).fn; }
};

ConfusionCounts confusion(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels,
                          std::size_t num_classes);

// Overall correct / total. Throws InputError on empty counts.
double accuracy(const ConfusionCounts& counts);

// One-vs-rest (TP+TN)/total for a single class.
double class_accuracy(const ConfusionCounts& counts, std::size_t c);

struct Ratio {
  double value = 0;
  bool degenerate = false;  // denominator was zero; value set to 0
};

Ratio precision(const ConfusionCounts& counts, std::size_t c);
Ratio recall(const ConfusionCounts& counts, std::size_t c);
Ratio f1(const ConfusionCounts& counts, std::size_t c);

struct ClassMetrics {
  std::size_t class_id = 0;
  std::uint64_t support = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double accuracy = 0;  // one-vs-rest
  bool degenerate = false;
  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct MetricsReport {
  double accuracy = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
  std::size_t averaged_classes = 0;  // classes present in the labels
  std::vector<ClassMetrics> per_class;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// Macro averages run over the classes that occur among the labels.
MetricsReport report(const ConfusionCounts& counts);

// Multi-line "key value" text with one row per class.
std::string to_text(const MetricsReport& r, const std::vector<std::string>& class_names = {});
std::string csv_header();
// model,accuracy,precision,recall,f1 with four decimals.
std::string csv_row(const std::string& model, const MetricsReport& r);

// One row per epoch, one column per run; runs that stopped early leave
// blanks. Values use shortest round-trip decimal formatting.
using NamedLog = std::pair<std::string, nn::TrainLog>;
std::string export_loss_comparison(const std::vector<NamedLog>& logs, bool validation = true);

struct LossTable {
  std::vector<std::string> runs;
  std::vector<std::vector<std::optional<double>>> rows;  // rows[epoch - 1][run]
};
LossTable parse_loss_comparison(const std::string& csv);

// Per-epoch training log as CSV.
std::string train_log_csv(const nn::TrainLog& log);

}  // namespace cuneiform::metrics
