#include "hiore/decode.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace hiore {

template <typename T>
std::vector<double> adjacent_distances(const ProbTable<T>& pt) {
  int n = pt.n, k = pt.num_labels;
  std::vector<double> out;
  out.reserve(static_cast<size_t>(std::max(0, n - 1)));
  for (int t = 0; t + 1 < n; ++t) {
    double row_sq = 0.0, col_sq = 0.0;
    for (int j = 0; j < n; ++j)
      for (int y = 0; y < k; ++y) {
        double dr = pt.prob(t, j, y) - pt.prob(t + 1, j, y);
        row_sq += dr * dr;
        double dc = pt.prob(j, t, y) - pt.prob(j, t + 1, y);
        col_sq += dc * dc;
      }
    out.push_back(0.5 * (std::sqrt(row_sq) + std::sqrt(col_sq)));
  }
  return out;
}

template <typename T>
std::vector<std::pair<int, int>> split_spans(const ProbTable<T>& pt, double threshold) {
  if (threshold < 0) throw ConfigError("split_spans: threshold must be >= 0");
  std::vector<double> dist = adjacent_distances(pt);
  std::vector<std::pair<int, int>> spans;
  int start = 0;
  for (int t = 0; t + 1 < pt.n; ++t) {
    if (dist[static_cast<size_t>(t)] > threshold) {
      spans.emplace_back(start, t);
      start = t + 1;
    }
  }
  spans.emplace_back(start, pt.n - 1);
  return spans;
}

namespace {

/// Mean distribution over a cell rectangle, then argmax restricted to the
/// given label set (which always contains the null label 0). Lowest index
/// wins ties.
template <typename T>
std::pair<int, double> rect_argmax(const ProbTable<T>& pt, int i0, int i1, int j0, int j1,
                                   const std::vector<int>& labels) {
  std::vector<double> mean(static_cast<size_t>(pt.num_labels), 0.0);
  int64_t cells = 0;
  for (int i = i0; i <= i1; ++i)
    for (int j = j0; j <= j1; ++j) {
      for (int y = 0; y < pt.num_labels; ++y) mean[static_cast<size_t>(y)] += pt.prob(i, j, y);
      ++cells;
    }
  for (double& v : mean) v /= static_cast<double>(cells);
  int best = labels[0];
  double best_p = mean[static_cast<size_t>(labels[0])];
  for (int y : labels)
    if (mean[static_cast<size_t>(y)] > best_p) {
      best = y;
      best_p = mean[static_cast<size_t>(y)];
    }
  return {best, best_p};
}

}  // namespace

template <typename T>
std::vector<EntityMention> decode_entities(const ProbTable<T>& pt,
                                           const std::vector<std::pair<int, int>>& spans,
                                           const LabelSpace& ls, std::vector<double>* scores) {
  std::vector<int> labels = {LabelSpace::kNull};
  for (int y = 1; y < ls.size(); ++y)
    if (ls.is_entity_label(y)) labels.push_back(y);
  std::vector<EntityMention> out;
  for (const auto& [a, b] : spans) {
    auto [y, p] = rect_argmax(pt, a, b, a, b, labels);
    if (y == LabelSpace::kNull) continue;
    out.push_back({a, b, ls.name(y)});
    if (scores) scores->push_back(p);
  }
  return out;
}

template <typename T>
std::vector<RelationMention> decode_relations(const ProbTable<T>& pt,
                                              const std::vector<EntityMention>& entities,
                                              const LabelSpace& ls,
                                              const std::set<std::string>& symmetric_types,
                                              std::vector<double>* scores) {
  std::vector<int> labels = {LabelSpace::kNull};
  for (int y = 1; y < ls.size(); ++y)
    if (ls.is_relation_label(y)) labels.push_back(y);
  std::vector<RelationMention> out;
  std::map<std::pair<std::pair<int, int>, std::string>, double> symmetric_hits;
  int ne = static_cast<int>(entities.size());
  for (int p = 0; p < ne; ++p)
    for (int q = 0; q < ne; ++q) {
      if (p == q) continue;
      const EntityMention& e1 = entities[static_cast<size_t>(p)];
      const EntityMention& e2 = entities[static_cast<size_t>(q)];
      auto [y, prob] = rect_argmax(pt, e1.start, e1.end, e2.start, e2.end, labels);
      if (y == LabelSpace::kNull) continue;
      const std::string& type = ls.name(y);
      if (symmetric_types.count(type)) {
        auto key = std::make_pair(std::make_pair(std::min(p, q), std::max(p, q)), type);
        auto it = symmetric_hits.find(key);
        if (it == symmetric_hits.end())
          symmetric_hits[key] = prob;
        else
          it->second = std::max(it->second, prob);
      } else {
        out.push_back({p, q, type});
        if (scores) scores->push_back(prob);
      }
    }
  for (const auto& [key, prob] : symmetric_hits) {
    out.push_back({key.first.first, key.first.second, key.second});
    if (scores) scores->push_back(prob);
  }
  return out;
}

template <typename T>
DecodedResult decode(const ProbTable<T>& pt, const LabelSpace& ls, double threshold,
                     const std::set<std::string>& symmetric_types) {
  DecodedResult r;
  auto spans = split_spans(pt, threshold);
  r.entities = decode_entities(pt, spans, ls, &r.entity_scores);
  r.relations = decode_relations(pt, r.entities, ls, symmetric_types, &r.relation_scores);
  return r;
}

template <typename T>
ProbTable<T> one_hot_table(const GoldTable& g, int num_labels) {
  ProbTable<T> pt;
  pt.n = g.n;
  pt.num_labels = num_labels;
  Shape shape{g.n, g.n, num_labels};
  pt.probs = Tensor<T>(shape);
  pt.logits = Tensor<T>(shape);
  for (size_t c = 0; c < g.labels.size(); ++c)
    pt.probs.data[c * static_cast<size_t>(num_labels) + static_cast<size_t>(g.labels[c])] = T(1);
  return pt;
}

template std::vector<double> adjacent_distances<float>(const ProbTable<float>&);
template std::vector<double> adjacent_distances<double>(const ProbTable<double>&);
template std::vector<std::pair<int, int>> split_spans<float>(const ProbTable<float>&, double);
template std::vector<std::pair<int, int>> split_spans<double>(const ProbTable<double>&, double);
template std::vector<EntityMention> decode_entities<float>(const ProbTable<float>&,
                                                           const std::vector<std::pair<int, int>>&,
                                                           const LabelSpace&, std::vector<double>*);
template std::vector<EntityMention> decode_entities<double>(const ProbTable<double>&,
                                                            const std::vector<std::pair<int, int>>&,
                                                            const LabelSpace&, std::vector<double>*);
template std::vector<RelationMention> decode_relations<float>(const ProbTable<float>&,
                                                              const std::vector<EntityMention>&,
                                                              const LabelSpace&,
                                                              const std::set<std::string>&,
                                                              std::vector<double>*);
template std::vector<RelationMention> decode_relations<double>(const ProbTable<double>&,
                                                               const std::vector<EntityMention>&,
                                                               const LabelSpace&,
                                                               const std::set<std::string>&,
                                                               std::vector<double>*);
template DecodedResult decode<float>(const ProbTable<float>&, const LabelSpace&, double,
                                     const std::set<std::string>&);
template DecodedResult decode<double>(const ProbTable<double>&, const LabelSpace&, double,
                                      const std::set<std::string>&);
template ProbTable<float> one_hot_table<float>(const GoldTable&, int);
template ProbTable<double> one_hot_table<double>(const GoldTable&, int);

}  // namespace hiore
