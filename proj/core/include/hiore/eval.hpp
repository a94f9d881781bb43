#pragma once

#include <map>
#include <string>
#include <vector>

#include "hiore/corpus.hpp"

namespace hiore {

/// Micro-averaged precision/recall/F1 with the underlying counts.
struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;

  static PRF from_counts(int64_t tp, int64_t fp, int64_t fn);
};

/// Strict criterion: an entity counts iff span and type both match.
PRF score_entities(const std::vector<Sentence>& pred, const std::vector<Sentence>& gold);

/// Strict criterion: a relation counts iff its type matches and both
/// argument entities match in span and type.
PRF score_relations(const std::vector<Sentence>& pred, const std::vector<Sentence>& gold);

/// Per-type breakdown under the same strict criteria.
std::map<std::string, PRF> score_entities_by_type(const std::vector<Sentence>& pred,
                                                  const std::vector<Sentence>& gold);
std::map<std::string, PRF> score_relations_by_type(const std::vector<Sentence>& pred,
                                                   const std::vector<Sentence>& gold);

/// Token gap between the closest boundaries of a relation's argument
/// spans: tokens strictly between them, 0 when adjacent or touching.
int argument_distance(const Sentence& s, const RelationMention& r);

/// A relation is long-distance when the argument distance exceeds this.
constexpr int kLongDistanceThreshold = 4;

struct StratumScore {
  PRF prf;
  bool defined = false;  // false when the gold stratum is empty
  int64_t gold_items = 0;
};

/// Strata computed from gold annotations: isolated entities (IE),
/// relations in multi-relation sentences (MR), and long-distance
/// relations (LDR). Predictions are matched against the restricted gold.
struct StratifiedResult {
  StratumScore isolated_entities;
  StratumScore multi_relation;
  StratumScore long_distance;
};

StratifiedResult stratified_eval(const std::vector<Sentence>& pred,
                                 const std::vector<Sentence>& gold);

}  // namespace hiore
