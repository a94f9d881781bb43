#pragma once

#include <set>
#include <utility>
#include <vector>

#include "hiore/corpus.hpp"
#include "hiore/heads.hpp"

namespace hiore {

/// Decoded entities and relations plus the mean probability that selected
/// each item's label.
struct DecodedResult {
  std::vector<EntityMention> entities;
  std::vector<double> entity_scores;
  std::vector<RelationMention> relations;
  std::vector<double> relation_scores;
};

/// Split statistic between positions t and t+1: the Euclidean distance
/// between adjacent rows of the flattened probability tensor averaged with
/// the distance between adjacent columns. One value per boundary, n-1 total.
template <typename T>
std::vector<double> adjacent_distances(const ProbTable<T>& pt);

/// Maximal unsplit segments; a split lands after t iff distance > threshold.
template <typename T>
std::vector<std::pair<int, int>> split_spans(const ProbTable<T>& pt, double threshold);

/// Span label = argmax of the mean cell distribution over the span square,
/// restricted to entity labels plus null; null spans are dropped. Ties
/// break toward the lowest label index.
template <typename T>
std::vector<EntityMention> decode_entities(const ProbTable<T>& pt,
                                           const std::vector<std::pair<int, int>>& spans,
                                           const LabelSpace& ls, std::vector<double>* scores = nullptr);

/// Ordered entity pairs scored by the mean distribution over the relation
/// rectangle, restricted to relation labels plus null. Types configured
/// symmetric emit once, in canonical (low index, high index) order, when
/// either rectangle selects them.
template <typename T>
std::vector<RelationMention> decode_relations(const ProbTable<T>& pt,
                                              const std::vector<EntityMention>& entities,
                                              const LabelSpace& ls,
                                              const std::set<std::string>& symmetric_types = {},
                                              std::vector<double>* scores = nullptr);

template <typename T>
DecodedResult decode(const ProbTable<T>& pt, const LabelSpace& ls, double threshold,
                     const std::set<std::string>& symmetric_types = {});

/// One-hot probability table of a gold table (testing / round-trip aid).
template <typename T>
ProbTable<T> one_hot_table(const GoldTable& g, int num_labels);

extern template std::vector<double> adjacent_distances<float>(const ProbTable<float>&);
extern template std::vector<double> adjacent_distances<double>(const ProbTable<double>&);
extern template std::vector<std::pair<int, int>> split_spans<float>(const ProbTable<float>&, double);
extern template std::vector<std::pair<int, int>> split_spans<double>(const ProbTable<double>&, double);
extern template std::vector<EntityMention> decode_entities<float>(const ProbTable<float>&,
                                                                  const std::vector<std::pair<int, int>>&,
                                                                  const LabelSpace&, std::vector<double>*);
extern template std::vector<EntityMention> decode_entities<double>(const ProbTable<double>&,
                                                                   const std::vector<std::pair<int, int>>&,
                                                                   const LabelSpace&, std::vector<double>*);
extern template std::vector<RelationMention> decode_relations<float>(const ProbTable<float>&,
                                                                     const std::vector<EntityMention>&,
                                                                     const LabelSpace&,
                                                                     const std::set<std::string>&,
                                                                     std::vector<double>*);
extern template std::vector<RelationMention> decode_relations<double>(const ProbTable<double>&,
                                                                      const std::vector<EntityMention>&,
                                                                      const LabelSpace&,
                                                                      const std::set<std::string>&,
                                                                      std::vector<double>*);
extern template DecodedResult decode<float>(const ProbTable<float>&, const LabelSpace&, double,
                                            const std::set<std::string>&);
extern template DecodedResult decode<double>(const ProbTable<double>&, const LabelSpace&, double,
                                             const std::set<std::string>&);
extern template ProbTable<float> one_hot_table<float>(const GoldTable&, int);
extern template ProbTable<double> one_hot_table<double>(const GoldTable&, int);

}  // namespace hiore
