#include "hiore/eval.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace hiore {

PRF PRF::from_counts(int64_t tp, int64_t fp, int64_t fn) {
  PRF r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

namespace {

using EntityKey = std::tuple<int, int, std::string>;
// (arg1 span+type, arg2 span+type, relation type)
using RelationKey = std::tuple<EntityKey, EntityKey, std::string>;

EntityKey entity_key(const EntityMention& e) { return {e.start, e.end, e.etype}; }

RelationKey relation_key(const Sentence& s, const RelationMention& r) {
  return {entity_key(s.entities[static_cast<size_t>(r.arg1)]),
          entity_key(s.entities[static_cast<size_t>(r.arg2)]), r.rtype};
}

std::set<EntityKey> entity_set(const Sentence& s) {
  std::set<EntityKey> out;
  for (const EntityMention& e : s.entities) out.insert(entity_key(e));
  return out;
}

std::set<RelationKey> relation_set(const Sentence& s) {
  std::set<RelationKey> out;
  for (const RelationMention& r : s.relations) out.insert(relation_key(s, r));
  return out;
}

/// Pairs sentences by id; both corpora must cover the same id set.
std::vector<std::pair<const Sentence*, const Sentence*>> align(const std::vector<Sentence>& pred,
                                                               const std::vector<Sentence>& gold) {
  std::map<std::string, const Sentence*> by_id;
  for (const Sentence& p : pred) {
    if (by_id.count(p.id)) throw CorpusError("score: duplicate prediction id '" + p.id + "'");
    by_id[p.id] = &p;
  }
  std::vector<std::pair<const Sentence*, const Sentence*>> out;
  for (const Sentence& g : gold) {
    auto it = by_id.find(g.id);
    if (it == by_id.end()) throw CorpusError("score: missing prediction for sentence '" + g.id + "'");
    out.emplace_back(it->second, &g);
    by_id.erase(it);
  }
  if (!by_id.empty())
    throw CorpusError("score: prediction for unknown sentence '" + by_id.begin()->first + "'");
  return out;
}

template <typename Key>
void count_sets(const std::set<Key>& pred, const std::set<Key>& gold, int64_t& tp, int64_t& fp,
                int64_t& fn) {
  for (const Key& k : pred) {
    if (gold.count(k))
      ++tp;
    else
      ++fp;
  }
  for (const Key& k : gold)
    if (!pred.count(k)) ++fn;
}

}  // namespace

PRF score_entities(const std::vector<Sentence>& pred, const std::vector<Sentence>& gold) {
  int64_t tp = 0, fp = 0, fn = 0;
  for (auto [p, g] : align(pred, gold)) count_sets(entity_set(*p), entity_set(*g), tp, fp, fn);
  return PRF::from_counts(tp, fp, fn);
}

PRF score_relations(const std::vector<Sentence>& pred, const std::vector<Sentence>& gold) {
  int64_t tp = 0, fp = 0, fn = 0;
  for (auto [p, g] : align(pred, gold)) count_sets(relation_set(*p), relation_set(*g), tp, fp, fn);
  return PRF::from_counts(tp, fp, fn);
}

std::map<std::string, PRF> score_entities_by_type(const std::vector<Sentence>& pred,
                                                  const std::vector<Sentence>& gold) {
  std::map<std::string, std::tuple<int64_t, int64_t, int64_t>> counts;
  for (auto [p, g] : align(pred, gold)) {
    std::set<EntityKey> ps = entity_set(*p), gs = entity_set(*g);
    for (const EntityKey& k : ps)
      (gs.count(k) ? std::get<0>(counts[std::get<2>(k)]) : std::get<1>(counts[std::get<2>(k)]))++;
    for (const EntityKey& k : gs)
      if (!ps.count(k)) std::get<2>(counts[std::get<2>(k)])++;
  }
  std::map<std::string, PRF> out;
  for (const auto& [type, c] : counts)
    out[type] = PRF::from_counts(std::get<0>(c), std::get<1>(c), std::get<2>(c));
  return out;
}

std::map<std::string, PRF> score_relations_by_type(const std::vector<Sentence>& pred,
                                                   const std::vector<Sentence>& gold) {
  std::map<std::string, std::tuple<int64_t, int64_t, int64_t>> counts;
  for (auto [p, g] : align(pred, gold)) {
    std::set<RelationKey> ps = relation_set(*p), gs = relation_set(*g);
    for (const RelationKey& k : ps)
      (gs.count(k) ? std::get<0>(counts[std::get<2>(k)]) : std::get<1>(counts[std::get<2>(k)]))++;
    for (const RelationKey& k : gs)
      if (!ps.count(k)) std::get<2>(counts[std::get<2>(k)])++;
  }
  std::map<std::string, PRF> out;
  for (const auto& [type, c] : counts)
    out[type] = PRF::from_counts(std::get<0>(c), std::get<1>(c), std::get<2>(c));
  return out;
}

int argument_distance(const Sentence& s, const RelationMention& r) {
  const EntityMention& a = s.entities[static_cast<size_t>(r.arg1)];
  const EntityMention& b = s.entities[static_cast<size_t>(r.arg2)];
  if (a.start > b.end) return a.start - b.end - 1;
  if (b.start > a.end) return b.start - a.end - 1;
  return 0;
}

StratifiedResult stratified_eval(const std::vector<Sentence>& pred,
                                 const std::vector<Sentence>& gold) {
  int64_t ie_tp = 0, ie_fp = 0, ie_fn = 0, ie_gold = 0;
  int64_t mr_tp = 0, mr_fp = 0, mr_fn = 0, mr_gold = 0;
  int64_t ld_tp = 0, ld_fp = 0, ld_fn = 0, ld_gold = 0;
  for (auto [p, g] : align(pred, gold)) {
    // IE: gold entities participating in no gold relation.
    std::set<int> related;
    for (const RelationMention& r : g->relations) {
      related.insert(r.arg1);
      related.insert(r.arg2);
    }
    std::set<EntityKey> ie;
    for (size_t e = 0; e < g->entities.size(); ++e)
      if (!related.count(static_cast<int>(e))) ie.insert(entity_key(g->entities[e]));
    ie_gold += static_cast<int64_t>(ie.size());
    count_sets(entity_set(*p), ie, ie_tp, ie_fp, ie_fn);

    std::set<RelationKey> preds = relation_set(*p);
    // MR: all gold relations of sentences holding more than one.
    if (g->relations.size() > 1) {
      std::set<RelationKey> mr = relation_set(*g);
      mr_gold += static_cast<int64_t>(mr.size());
      count_sets(preds, mr, mr_tp, mr_fp, mr_fn);
    }
    // LDR: gold relations whose argument distance exceeds the threshold.
    std::set<RelationKey> ld;
    for (const RelationMention& r : g->relations)
      if (argument_distance(*g, r) > kLongDistanceThreshold) ld.insert(relation_key(*g, r));
    if (!ld.empty()) {
      ld_gold += static_cast<int64_t>(ld.size());
      count_sets(preds, ld, ld_tp, ld_fp, ld_fn);
    }
  }
  StratifiedResult out;
  out.isolated_entities = {PRF::from_counts(ie_tp, ie_fp, ie_fn), ie_gold > 0, ie_gold};
  out.multi_relation = {PRF::from_counts(mr_tp, mr_fp, mr_fn), mr_gold > 0, mr_gold};
  out.long_distance = {PRF::from_counts(ld_tp, ld_fp, ld_fn), ld_gold > 0, ld_gold};
  return out;
}

}  // namespace hiore
