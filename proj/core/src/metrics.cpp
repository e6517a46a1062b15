#include "direcnet/metrics.hpp"

#include <cstdio>

#include "json.hpp"

#include "direcnet/error.hpp"

namespace direcnet {

double f1_from_pr(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0 ? 2 * precision * recall / denom : 0.0;
}

template <typename P>
std::size_t argmax(std::span<const P> row) {
  if (row.empty()) throw ContractError("argmax of an empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

std::vector<std::int64_t> confusion_matrix(std::span<const std::int64_t> y_true,
                                           std::span<const std::int64_t> y_pred, std::size_t classes) {
  if (y_true.size() != y_pred.size()) throw ContractError("confusion_matrix: label counts differ");
  std::vector<std::int64_t> counts(classes * classes, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const auto t = y_true[i], p = y_pred[i];
    if (t < 0 || std::size_t(t) >= classes || p < 0 || std::size_t(p) >= classes) {
      throw ShapeError("confusion_matrix: class index out of range");
    }
    ++counts[std::size_t(t) * classes + std::size_t(p)];
  }
  return counts;
}

namespace {

std::vector<std::string> default_names(std::vector<std::string> names, std::size_t classes) {
  if (names.empty()) {
    for (std::size_t i = 0; i < classes; ++i) names.push_back("class" + std::to_string(i));
  }
  if (names.size() != classes) throw ContractError("metrics: class name count does not match class count");
  return names;
}

ClassMetrics binary_metrics(std::string name, std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  ClassMetrics m;
  m.name = std::move(name);
  m.precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
  m.f1 = f1_from_pr(m.precision, m.recall);
  m.support = tp + fn;
  return m;
}

void summarize(MetricsReport& r) {
  double total = 0, weighted = 0, sum = 0;
  for (const auto& c : r.classes) {
    total += double(c.support);
    weighted += double(c.support) * c.f1;
    sum += c.f1;
  }
  r.weighted_f1 = total > 0 ? weighted / total : 0.0;
  r.average_f1 = r.classes.empty() ? 0.0 : sum / double(r.classes.size());
}

}  // namespace

template <typename P>
MetricsReport single_label_metrics(std::span<const std::int64_t> y_true, std::span<const P> probs,
                                   std::size_t classes, std::vector<std::string> names) {
  if (y_true.empty()) throw ContractError("single_label_metrics: empty input");
  if (classes == 0 || probs.size() != y_true.size() * classes) {
    throw ContractError("single_label_metrics: probabilities must be [N, K]");
  }
  names = default_names(std::move(names), classes);
  std::vector<std::int64_t> pred(y_true.size());
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    pred[i] = static_cast<std::int64_t>(argmax(probs.subspan(i * classes, classes)));
  }
  const auto cm = confusion_matrix(y_true, pred, classes);
  MetricsReport r;
  r.mode = "single";
  r.samples = static_cast<std::int64_t>(y_true.size());
  std::int64_t correct = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    std::int64_t tp = cm[k * classes + k], fp = 0, fn = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      if (j == k) continue;
      fp += cm[j * classes + k];
      fn += cm[k * classes + j];
    }
    correct += tp;
    r.classes.push_back(binary_metrics(names[k], tp, fp, fn));
  }
  r.accuracy = double(correct) / double(y_true.size());
  summarize(r);
  return r;
}

template <typename P>
MetricsReport multilabel_metrics(std::span<const std::uint8_t> y_true, std::span<const P> probs,
                                 std::size_t classes, double threshold,
                                 const std::vector<std::size_t>& subset, std::vector<std::string> names) {
  if (!(threshold > 0 && threshold < 1)) throw ConfigError("multilabel_metrics: threshold must be in (0, 1)");
  if (classes == 0 || y_true.empty() || y_true.size() % classes != 0 || probs.size() != y_true.size()) {
    throw ContractError("multilabel_metrics: labels and probabilities must both be [N, K]");
  }
  if (subset.empty()) throw ConfigError("multilabel_metrics: empty class subset");
  for (auto k : subset) {
    if (k >= classes) throw ConfigError("multilabel_metrics: subset class " + std::to_string(k) + " out of range");
  }
  names = default_names(std::move(names), classes);
  const std::size_t n = y_true.size() / classes;
  MetricsReport r;
  r.mode = "multi";
  r.samples = static_cast<std::int64_t>(n);
  r.threshold = threshold;
  std::vector<std::uint8_t> exact(n, 1);
  for (auto k : subset) {
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool truth = y_true[i * classes + k] != 0;
      const bool assigned = double(probs[i * classes + k]) > threshold;
      tp += truth && assigned;
      fp += !truth && assigned;
      fn += truth && !assigned;
      if (truth != assigned) exact[i] = 0;
    }
    r.classes.push_back(binary_metrics(names[k], tp, fp, fn));
  }
  std::int64_t hits = 0;
  for (auto e : exact) hits += e;
  r.accuracy = double(hits) / double(n);
  summarize(r);
  return r;
}

std::string metrics_csv(const MetricsReport& r) {
  std::string out = "class,precision,recall,f1,support\n";
  char buf[256];
  double mp = 0, mr = 0, wp = 0, wr = 0;
  std::int64_t total = 0;
  for (const auto& c : r.classes) {
    std::snprintf(buf, sizeof buf, "%s,%.3f,%.3f,%.3f,%lld\n", c.name.c_str(), c.precision, c.recall, c.f1,
                  static_cast<long long>(c.support));
    out += buf;
    mp += c.precision;
    mr += c.recall;
    wp += c.precision * double(c.support);
    wr += c.recall * double(c.support);
    total += c.support;
  }
  const double k = r.classes.empty() ? 1.0 : double(r.classes.size());
  const double t = total > 0 ? double(total) : 1.0;
  std::snprintf(buf, sizeof buf, "average,%.3f,%.3f,%.3f,%lld\n", mp / k, mr / k, r.average_f1,
                static_cast<long long>(total));
  out += buf;
  std::snprintf(buf, sizeof buf, "weighted average,%.3f,%.3f,%.3f,%lld\n", wp / t, wr / t, r.weighted_f1,
                static_cast<long long>(total));
  out += buf;
  std::snprintf(buf, sizeof buf, "accuracy,,,%.3f,%lld\n", r.accuracy, static_cast<long long>(r.samples));
  out += buf;
  return out;
}

std::string metrics_json(const MetricsReport& r) {
  nlohmann::json j;
  j["mode"] = r.mode;
  j["samples"] = r.samples;
  if (r.mode == "multi") j["threshold"] = r.threshold;
  j["weighted_f1"] = r.weighted_f1;
  j["average_f1"] = r.average_f1;
  j["accuracy"] = r.accuracy;
  j["classes"] = nlohmann::json::array();
  for (const auto& c : r.classes) {
    j["classes"].push_back({{"name", c.name},
                            {"precision", c.precision},
                            {"recall", c.recall},
                            {"f1", c.f1},
                            {"support", c.support}});
  }
  return j.dump(2) + "\n";
}

template std::size_t argmax(std::span<const float>);
template std::size_t argmax(std::span<const double>);
template MetricsReport single_label_metrics(std::span<const std::int64_t>, std::span<const float>, std::size_t,
                                            std::vector<std::string>);
template MetricsReport single_label_metrics(std::span<const std::int64_t>, std::span<const double>, std::size_t,
                                            std::vector<std::string>);
template MetricsReport multilabel_metrics(std::span<const std::uint8_t>, std::span<const float>, std::size_t,
                                          double, const std::vector<std::size_t>&, std::vector<std::string>);
template MetricsReport multilabel_metrics(std::span<const std::uint8_t>, std::span<const double>, std::size_t,
                                          double, const std::vector<std::size_t>&, std::vector<std::string>);

}  // namespace direcnet
