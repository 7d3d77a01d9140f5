// retrieval.hpp - ranked lists and the NN/FT/ST/DCG + precision-recall
// statistics, following the Princeton benchmark definitions.
//
// Protocol: every model queries the corpus with itself excluded
// (leave-one-in); tiers count from rank 1 of the remaining list; DCG is
// normalized by the ideal list so it lies in [0, 1].
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "salvox/bow.hpp"
#include "salvox/errors.hpp"

namespace salvox {

struct RankedEntry {
  std::string model_id;
  double distance{};
};

struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;  // ascending distance, query excluded
};

// Sorts the corpus by histogram distance; equal distances break by
// lexicographic model id. The query id itself is dropped from the list.
inline RankedList rank(const BowHistogram& query, std::span<const BowHistogram> corpus) {
  RankedList list;
  list.query_id = query.model_id;
  list.entries.reserve(corpus.size());
  for (const auto& h : corpus) {
    if (h.model_id == query.model_id) continue;
    list.entries.push_back({h.model_id, histogram_distance(query, h)});
  }
  std::sort(list.entries.begin(), list.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.model_id < b.model_id;
  });
  return list;
}

struct QueryMetrics {
  double nn{}, ft{}, st{}, dcg{};
};

using Labels = std::map<std::string, std::string>;

namespace detail {

// 1 for in-class entries, 0 otherwise, in rank order.
inline std::vector<int> relevance_pattern(const RankedList& ranked, const Labels& labels,
                                          const std::string& query_class) {
  std::vector<int> rel;
  rel.reserve(ranked.entries.size());
  for (const auto& e : ranked.entries) {
    auto it = labels.find(e.model_id);
    if (it == labels.end()) throw InvalidArgument("no label for model '" + e.model_id + "'");
    rel.push_back(it->second == query_class ? 1 : 0);
  }
  return rel;
}

}  // namespace detail

// class_size counts the query itself, so the tier size is class_size - 1.
inline QueryMetrics compute_metrics(const RankedList& ranked, const Labels& labels,
                                    const std::string& query_class, int class_size) {
  if (class_size < 2) throw InvalidArgument("query class needs at least 2 members");
  if (ranked.entries.empty()) throw InvalidArgument("empty ranked list");
  std::vector<int> rel = detail::relevance_pattern(ranked, labels, query_class);
  const int tier = class_size - 1;
  const int n = static_cast<int>(rel.size());

  QueryMetrics m;
  m.nn = rel[0] ? 1.0 : 0.0;
  int ft_hits = 0, st_hits = 0;
  for (int i = 0; i < n; ++i) {
    if (!rel[static_cast<size_t>(i)]) continue;
    if (i < tier) ++ft_hits;
    if (i < 2 * tier) ++st_hits;
  }
  m.ft = static_cast<double>(ft_hits) / tier;
  m.st = static_cast<double>(st_hits) / tier;

  // DCG_1 = G_1, DCG_i = DCG_{i-1} + G_i / log2(i), over the whole list,
  // normalized by the ideal list with all tier relevant items first.
  double dcg = rel[0] ? 1.0 : 0.0;
  for (int i = 2; i <= n; ++i)
    if (rel[static_cast<size_t>(i - 1)]) dcg += 1.0 / std::log2(static_cast<double>(i));
  double ideal = 1.0;
  for (int i = 2; i <= tier; ++i) ideal += 1.0 / std::log2(static_cast<double>(i));
  m.dcg = dcg / ideal;
  return m;
}

// Interpolated precision at the 20 standard recall levels 0.05..1.00:
// precision at recall r is the best precision over prefixes reaching r.
inline std::vector<std::pair<double, double>> precision_recall(const RankedList& ranked,
                                                               const Labels& labels,
                                                               const std::string& query_class,
                                                               int class_size) {
  if (class_size < 2) throw InvalidArgument("query class needs at least 2 members");
  std::vector<int> rel = detail::relevance_pattern(ranked, labels, query_class);
  const double total_relevant = class_size - 1;
  const int n = static_cast<int>(rel.size());

  std::vector<std::pair<double, double>> prefix;  // (recall, precision) per prefix
  int hits = 0;
  for (int i = 1; i <= n; ++i) {
    hits += rel[static_cast<size_t>(i - 1)];
    prefix.push_back({hits / total_relevant, static_cast<double>(hits) / i});
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(20);
  for (int j = 1; j <= 20; ++j) {
    double r = j / 20.0;
    double best = 0.0;
    for (const auto& [rec, prec] : prefix)
      if (rec >= r - 1e-12 && prec > best) best = prec;
    out.push_back({r, best});
  }
  return out;
}

// Convenience overloads deriving the query class from the labels and the
// class size from the relevance pattern (list covers the whole corpus, so
// |C| = 1 + number of relevant entries).
inline QueryMetrics compute_metrics(const RankedList& ranked, const Labels& labels) {
  auto it = labels.find(ranked.query_id);
  if (it == labels.end()) throw InvalidArgument("no label for query '" + ranked.query_id + "'");
  std::vector<int> rel = detail::relevance_pattern(ranked, labels, it->second);
  int class_size = 1;
  for (int r : rel) class_size += r;
  return compute_metrics(ranked, labels, it->second, class_size);
}

inline std::vector<std::pair<double, double>> precision_recall(const RankedList& ranked,
                                                               const Labels& labels) {
  auto it = labels.find(ranked.query_id);
  if (it == labels.end()) throw InvalidArgument("no label for query '" + ranked.query_id + "'");
  std::vector<int> rel = detail::relevance_pattern(ranked, labels, it->second);
  int class_size = 1;
  for (int r : rel) class_size += r;
  return precision_recall(ranked, labels, it->second, class_size);
}

struct QueryReport {
  std::string query_id;
  std::string label;
  int class_size{};
  QueryMetrics metrics;
};

struct EvalReport {
  QueryMetrics mean;
  std::vector<QueryReport> per_query;
  std::vector<std::pair<double, double>> mean_precision_recall;  // 20 levels
  std::map<std::string, int> class_sizes;
  std::vector<std::string> skipped_queries;  // singleton classes
  HistNorm normalization{HistNorm::L1};
  bool degenerate_corpus{false};  // all histograms identical
};

// Leave-one-in evaluation: every model queries the corpus minus itself.
inline EvalReport evaluate_corpus(std::span<const BowHistogram> histograms, const Labels& labels) {
  if (histograms.size() < 2) throw InvalidArgument("corpus needs at least 2 models");
  EvalReport report;
  report.normalization = histograms.front().normalization;

  for (const auto& h : histograms) {
    auto it = labels.find(h.model_id);
    if (it == labels.end()) throw InvalidArgument("no label for model '" + h.model_id + "'");
    ++report.class_sizes[it->second];
  }

  report.degenerate_corpus = true;
  for (const auto& h : histograms)
    if (h.counts != histograms.front().counts) {
      report.degenerate_corpus = false;
      break;
    }

  std::vector<double> pr_sum(20, 0.0);
  double nn = 0, ft = 0, st = 0, dcg = 0;
  int evaluated = 0;
  for (const auto& h : histograms) {
    const std::string& cls = labels.at(h.model_id);
    int class_size = report.class_sizes.at(cls);
    if (class_size < 2) {
      report.skipped_queries.push_back(h.model_id);
      continue;
    }
    RankedList ranked = rank(h, histograms);
    QueryReport qr;
    qr.query_id = h.model_id;
    qr.label = cls;
    qr.class_size = class_size;
    qr.metrics = compute_metrics(ranked, labels, cls, class_size);
    auto pr = precision_recall(ranked, labels, cls, class_size);
    for (size_t j = 0; j < 20; ++j) pr_sum[j] += pr[j].second;
    nn += qr.metrics.nn;
    ft += qr.metrics.ft;
    st += qr.metrics.st;
    dcg += qr.metrics.dcg;
    ++evaluated;
    report.per_query.push_back(std::move(qr));
  }
  if (evaluated == 0) throw InvalidArgument("no evaluable queries (all classes are singletons)");
  report.mean = {nn / evaluated, ft / evaluated, st / evaluated, dcg / evaluated};
  report.mean_precision_recall.reserve(20);
  for (int j = 1; j <= 20; ++j)
    report.mean_precision_recall.push_back({j / 20.0, pr_sum[static_cast<size_t>(j - 1)] / evaluated});
  return report;
}

}  // namespace salvox
