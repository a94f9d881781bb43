#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hiore/corpus.hpp"

namespace hiore {

/// Knobs for the synthetic corpus generator. Defaults give short sentences
/// with a small closed vocabulary, three entity types and two relation
/// types, which is enough to exercise every decoding and scoring path.
struct SynthConfig {
  int vocab_size = 120;
  int min_len = 6;
  int max_len = 12;
  std::vector<std::string> entity_types = {"GRP", "ITM", "PER"};
  std::vector<std::string> relation_types = {"LINK", "PART"};
  int max_entities = 4;
  int max_span_len = 2;
  bool allow_relations = true;

  void validate() const;
};

/// Deterministic for a fixed seed. The generated mix always contains
/// isolated entities, multi-relation sentences, and relations whose
/// argument spans are separated by more than 4 tokens (length permitting).
std::vector<Sentence> gen_synthetic(uint64_t seed, int count, const SynthConfig& cfg = {});

}  // namespace hiore
