#include "cuneiform/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <unordered_set>

#include "cuneiform/detail/text.hpp"

namespace cuneiform::metrics {

namespace {

Ratio ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void check_class(const ConfusionCounts& counts, std::size_t c) {
  if (c >= counts.num_classes) {
    throw InputError("class " + std::to_string(c) + " outside [0, " + std::to_string(counts.num_classes) + ")");
  }
}

}  // namespace

std::uint64_t ConfusionCounts::correct() const {
  std::uint64_t sum = 0;
  for (const auto& c : per_class) sum += c.tp;
  return sum;
}

ConfusionCounts confusion(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels,
                          std::size_t num_classes) {
  if (predictions.size() != labels.size()) {
    throw InputError(std::to_string(predictions.size()) + " predictions for " + std::to_string(labels.size()) +
                     " labels");
  }
  if (num_classes == 0) throw InputError("confusion needs at least one class");
  ConfusionCounts out;
  out.num_classes = num_classes;
  out.total = labels.size();
  out.matrix.assign(num_classes * num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes || predictions[i] >= num_classes) {
      throw InputError("class id at position " + std::to_string(i) + " is outside [0, " + std::to_string(num_classes) +
                       ")");
    }
    ++out.matrix[labels[i] * num_classes + predictions[i]];
  }
  std::vector<std::uint64_t> row(num_classes, 0), col(num_classes, 0);
  for (std::size_t l = 0; l < num_classes; ++l) {
    for (std::size_t p = 0; p < num_classes; ++p) {
      row[l] += out.at(l, p);
      col[p] += out.at(l, p);
    }
  }
  out.per_class.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& k = out.per_class[c];
    k.tp = out.at(c, c);
    k.fn = row[c] - k.tp;
    k.fp = col[c] - k.tp;
    k.tn = out.total - k.tp - k.fn - k.fp;
  }
  return out;
}

double accuracy(const ConfusionCounts& counts) {
  if (counts.total == 0) throw InputError("accuracy of an empty evaluation is undefined");
  return static_cast<double>(counts.correct()) / static_cast<double>(counts.total);
}

double class_accuracy(const ConfusionCounts& counts, std::size_t c) {
  check_class(counts, c);
  if (counts.total == 0) throw InputError("accuracy of an empty evaluation is undefined");
  const auto& k = counts.per_class[c];
  return static_cast<double>(k.tp + k.tn) / static_cast<double>(counts.total);
}

Ratio precision(const ConfusionCounts& counts, std::size_t c) {
  check_class(counts, c);
  const auto& k = counts.per_class[c];
  return ratio(k.tp, k.tp + k.fp);
}

Ratio recall(const ConfusionCounts& counts, std::size_t c) {
  check_class(counts, c);
  const auto& k = counts.per_class[c];
  return ratio(k.tp, k.tp + k.fn);
}

Ratio f1(const ConfusionCounts& counts, std::size_t c) {
  const auto p = precision(counts, c);
  const auto r = recall(counts, c);
  if (p.value + r.value == 0) return {0.0, true};
  return {2 * (p.value * r.value) / (p.value + r.value), p.degenerate || r.degenerate};
}

MetricsReport report(const ConfusionCounts& counts) {
  MetricsReport r;
  r.accuracy = accuracy(counts);
  for (std::size_t c = 0; c < counts.num_classes; ++c) {
    ClassMetrics m;
    m.class_id = c;
    m.support = counts.support(c);
    const auto p = precision(counts, c);
    const auto rc = recall(counts, c);
    const auto f = f1(counts, c);
    m.precision = p.value;
    m.recall = rc.value;
    m.f1 = f.value;
    m.accuracy = class_accuracy(counts, c);
    m.degenerate = p.degenerate || rc.degenerate || f.degenerate;
    if (m.support > 0) {
      r.macro_precision += m.precision;
      r.macro_recall += m.recall;
      r.macro_f1 += m.f1;
      ++r.averaged_classes;
    }
    r.per_class.push_back(m);
  }
  if (r.averaged_classes > 0) {
    const auto n = static_cast<double>(r.averaged_classes);
    r.macro_precision /= n;
    r.macro_recall /= n;
    r.macro_f1 /= n;
  }
  return r;
}

std::string to_text(const MetricsReport& r, const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os << "accuracy " << fixed4(r.accuracy) << "\n"
     << "macro_precision " << fixed4(r.macro_precision) << "\n"
     << "macro_recall " << fixed4(r.macro_recall) << "\n"
     << "macro_f1 " << fixed4(r.macro_f1) << "\n"
     << "averaged_classes " << r.averaged_classes << "\n"
     << "class\tname\tsupport\tprecision\trecall\tf1\tone_vs_rest_accuracy\tdegenerate\n";
  for (const auto& m : r.per_class) {
    const std::string name = m.class_id < class_names.size() ? class_names[m.class_id] : "";
    os << m.class_id << '\t' << name << '\t' << m.support << '\t' << fixed4(m.precision) << '\t' << fixed4(m.recall)
       << '\t' << fixed4(m.f1) << '\t' << fixed4(m.accuracy) << '\t' << (m.degenerate ? "yes" : "no") << "\n";
  }
  return os.str();
}

std::string csv_header() { return "model,accuracy,precision,recall,f1\n"; }

std::string csv_row(const std::string& model, const MetricsReport& r) {
  return model + "," + fixed4(r.accuracy) + "," + fixed4(r.macro_precision) + "," + fixed4(r.macro_recall) + "," +
         fixed4(r.macro_f1) + "\n";
}

std::string export_loss_comparison(const std::vector<NamedLog>& logs, bool validation) {
  if (logs.empty()) throw InputError("loss comparison needs at least one run");
  std::unordered_set<std::string> seen;
  std::size_t rows = 0;
  for (const auto& [name, log] : logs) {
    if (name.find_first_of(",\n\r") != std::string::npos) throw InputError("run name '" + name + "' contains a separator");
    if (!seen.insert(name).second) throw InputError("duplicate run name '" + name + "'");
    rows = std::max(rows, log.epochs.size());
  }
  std::string out = "epoch";
  for (const auto& [name, _] : logs) out += "," + name;
  out += "\n";
  for (std::size_t e = 0; e < rows; ++e) {
    out += std::to_string(e + 1);
    for (const auto& [_, log] : logs) {
      out += ",";
      if (e < log.epochs.size()) {
        out += detail::format_shortest(validation ? log.epochs[e].val_loss : log.epochs[e].train_loss);
      }
    }
    out += "\n";
  }
  return out;
}

LossTable parse_loss_comparison(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("loss comparison is empty");
  auto header = detail::split(detail::strip_cr(line), ',');
  if (header.empty() || header[0] != "epoch") throw FormatError("loss comparison must start with an 'epoch' column");
  LossTable t;
  t.runs.assign(header.begin() + 1, header.end());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = detail::split(detail::strip_cr(line), ',');
    if (fields.size() != header.size()) throw FormatError("line " + std::to_string(lineno) + ": wrong column count");
    const auto epoch = detail::parse_number<std::size_t>(fields[0]);
    if (!epoch || *epoch != t.rows.size() + 1) throw FormatError("line " + std::to_string(lineno) + ": bad epoch");
    std::vector<std::optional<double>> row;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (fields[i].empty()) {
        row.emplace_back();
        continue;
      }
      const auto v = detail::parse_number<double>(fields[i]);
      if (!v) throw FormatError("line " + std::to_string(lineno) + ": bad value '" + fields[i] + "'");
      row.emplace_back(*v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string train_log_csv(const nn::TrainLog& log) {
  std::string out = "epoch,train_loss,val_loss,val_accuracy,best\n";
  for (const auto& e : log.epochs) {
    out += std::to_string(e.epoch) + "," + detail::format_shortest(e.train_loss) + "," +
           detail::format_shortest(e.val_loss) + "," + detail::format_shortest(e.val_accuracy) + "," +
           (e.epoch == log.best_epoch ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace cuneiform::metrics
