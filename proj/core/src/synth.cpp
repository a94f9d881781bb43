#include "hiore/synth.hpp"

#include <algorithm>

namespace hiore {

void SynthConfig::validate() const {
  if (vocab_size < 1) throw ConfigError("synth: vocab_size must be >= 1");
  if (min_len < 1) throw ConfigError("synth: min_len must be >= 1");
  if (min_len > max_len) throw ConfigError("synth: min_len > max_len");
  if (max_span_len < 1) throw ConfigError("synth: max_span_len must be >= 1");
  if (entity_types.empty()) throw ConfigError("synth: need at least one entity type");
}

namespace {

struct SpanPlan {
  int start;
  int end;
  int type_idx;
};

// Greedy non-overlapping span placement with at least one free token
// between spans, so every consecutive pair leaves room for a relation
// marker and adjacent entities stay distinguishable.
std::vector<SpanPlan> place_spans(Rng& rng, int n, int want, int max_span_len, int num_types) {
  std::vector<SpanPlan> spans;
  int cursor = 0;
  for (int k = 0; k < want && cursor < n; ++k) {
    int remaining = n - cursor;
    if (remaining < 1) break;
    int len = static_cast<int>(rng.uniform_int(1, std::min<int64_t>(max_span_len, remaining)));
    int slack = remaining - len;
    int offset = slack > 0 ? static_cast<int>(rng.uniform_int(0, std::min(slack, 2))) : 0;
    int start = cursor + offset;
    spans.push_back({start, start + len - 1, static_cast<int>(rng.uniform_int(0, num_types - 1))});
    cursor = start + len + 1;  // gap of >= 1
  }
  return spans;
}

}  // namespace

// The corpus is learnable by construction: entity spans draw their surface
// tokens from a per-type pool, and each relation is cued by a marker token
// of its type placed in the gap between its two argument spans. Relations
// always link consecutive entities left to right, so the annotation is a
// deterministic function of the token sequence.
std::vector<Sentence> gen_synthetic(uint64_t seed, int count, const SynthConfig& cfg) {
  if (count < 1) throw ConfigError("synth: count must be >= 1");
  cfg.validate();
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<Sentence> out;
  out.reserve(static_cast<size_t>(count));
  const bool rels_possible = cfg.allow_relations && !cfg.relation_types.empty();

  auto filler = [&]() { return "f" + std::to_string(rng.uniform_int(0, cfg.vocab_size - 1)); };
  auto entity_token = [&](int type_idx) {
    return "e" + std::to_string(type_idx) + "_" + std::to_string(rng.uniform_int(0, 5));
  };
  auto marker_token = [&](const std::string& rtype) { return "m_" + rtype; };

  for (int k = 0; k < count; ++k) {
    Sentence s;
    s.id = "synth-" + std::to_string(seed) + "-" + std::to_string(k);
    // Rotate through sentence templates so every evaluation stratum is
    // populated: isolated entity, multi-relation, long-distance relation,
    // then a free-form mix.
    int tmpl = k % 4;
    int n = static_cast<int>(rng.uniform_int(cfg.min_len, cfg.max_len));
    if (tmpl == 2 && n < 2 + 6) tmpl = 3;  // too short for a long-distance pair
    if (!rels_possible && (tmpl == 1 || tmpl == 2)) tmpl = 0;

    s.tokens.resize(static_cast<size_t>(n));
    for (auto& t : s.tokens) t = filler();

    int num_types = static_cast<int>(cfg.entity_types.size());
    std::vector<SpanPlan> spans;
    std::vector<std::pair<int, int>> rel_pairs;  // consecutive span indices, left -> right
    if (tmpl == 0) {
      int want = static_cast<int>(rng.uniform_int(1, std::min(cfg.max_entities, 3)));
      spans = place_spans(rng, n, want, cfg.max_span_len, num_types);
    } else if (tmpl == 1) {
      spans = place_spans(rng, n, 3, cfg.max_span_len, num_types);
      for (size_t p = 0; p + 1 < spans.size(); ++p)
        rel_pairs.emplace_back(static_cast<int>(p), static_cast<int>(p + 1));
    } else if (tmpl == 2) {
      // two single-token spans with > 4 tokens strictly between them
      spans.push_back({0, 0, static_cast<int>(rng.uniform_int(0, num_types - 1))});
      spans.push_back({n - 1, n - 1, static_cast<int>(rng.uniform_int(0, num_types - 1))});
      rel_pairs.emplace_back(0, 1);
    } else {
      int want = static_cast<int>(rng.uniform_int(0, cfg.max_entities));
      spans = place_spans(rng, n, want, cfg.max_span_len, num_types);
      if (rels_possible)
        for (size_t p = 0; p + 1 < spans.size(); ++p)
          if (rng.bernoulli(0.5)) rel_pairs.emplace_back(static_cast<int>(p), static_cast<int>(p + 1));
    }

    for (const SpanPlan& p : spans) {
      s.entities.push_back({p.start, p.end, cfg.entity_types[static_cast<size_t>(p.type_idx)]});
      for (int t = p.start; t <= p.end; ++t) s.tokens[static_cast<size_t>(t)] = entity_token(p.type_idx);
    }
    for (const auto& [a, b] : rel_pairs) {
      int gap_lo = spans[static_cast<size_t>(a)].end + 1;
      int gap_hi = spans[static_cast<size_t>(b)].start - 1;
      if (gap_lo > gap_hi) continue;  // no room for a marker
      const std::string& rtype = cfg.relation_types[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int64_t>(cfg.relation_types.size()) - 1))];
      int slot = static_cast<int>(rng.uniform_int(gap_lo, gap_hi));
      s.tokens[static_cast<size_t>(slot)] = marker_token(rtype);
      s.relations.push_back({a, b, rtype});
    }
    // Distractor markers outside the entity range: a marker only signals a
    // relation when it sits between two spans, so surface matching alone
    // over-predicts. Placed before the first span or after the last one to
    // keep the annotation a deterministic function of the tokens.
    if (rels_possible && rng.bernoulli(0.5)) {
      std::vector<int> slots;
      int first = spans.empty() ? n : spans.front().start;
      int last = spans.empty() ? -1 : spans.back().end;
      for (int t = 0; t < first; ++t) slots.push_back(t);
      for (int t = last + 1; t < n; ++t) slots.push_back(t);
      if (!slots.empty()) {
        int slot = slots[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(slots.size()) - 1))];
        const std::string& rtype = cfg.relation_types[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(cfg.relation_types.size()) - 1))];
        s.tokens[static_cast<size_t>(slot)] = marker_token(rtype);
      }
    }
    validate_sentence(s);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace hiore
