#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hiore/common.hpp"

namespace hiore {

/// Typed token span, end inclusive.
struct EntityMention {
  int start = 0;
  int end = 0;
  std::string etype;

  bool operator==(const EntityMention&) const = default;
  auto operator<=>(const EntityMention&) const = default;
};

/// Typed directed pair of entity indices (into Sentence::entities).
struct RelationMention {
  int arg1 = 0;
  int arg2 = 0;
  std::string rtype;

  bool operator==(const RelationMention&) const = default;
  auto operator<=>(const RelationMention&) const = default;
};

/// One annotated input unit: flat, non-overlapping entity spans plus
/// typed directed entity pairs. Immutable after construction.
struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<EntityMention> entities;
  std::vector<RelationMention> relations;

  int n() const { return static_cast<int>(tokens.size()); }
  bool operator==(const Sentence&) const = default;
};

/// Throws CorpusError on any invariant violation: empty token list, span
/// out of range, overlapping spans, bad relation references.
void validate_sentence(const Sentence& s);

/// Unified label set: null label at index 0, then entity types, then
/// relation types, each sorted lexicographically.
struct LabelSpace {
  std::vector<std::string> entity_types;
  std::vector<std::string> relation_types;

  static constexpr int kNull = 0;
  static constexpr const char* kNullName = "<null>";

  int size() const {
    return 1 + static_cast<int>(entity_types.size()) + static_cast<int>(relation_types.size());
  }
  int entity_index(const std::string& t) const;    // unified index
  int relation_index(const std::string& t) const;  // unified index
  bool is_entity_label(int idx) const {
    return idx >= 1 && idx <= static_cast<int>(entity_types.size());
  }
  bool is_relation_label(int idx) const {
    return idx > static_cast<int>(entity_types.size()) && idx < size();
  }
  const std::string& name(int idx) const;

  bool operator==(const LabelSpace&) const = default;
};

LabelSpace build_label_space(const std::vector<Sentence>& corpus);

/// n x n matrix of unified label indices.
struct GoldTable {
  int n = 0;
  std::vector<int> labels;  // row-major

  int& at(int i, int j) { return labels[static_cast<size_t>(i * n + j)]; }
  int at(int i, int j) const { return labels[static_cast<size_t>(i * n + j)]; }
};

/// n x n indicator of non-null cells.
struct BinaryTable {
  int n = 0;
  std::vector<uint8_t> bits;

  uint8_t& at(int i, int j) { return bits[static_cast<size_t>(i * n + j)]; }
  uint8_t at(int i, int j) const { return bits[static_cast<size_t>(i * n + j)]; }
  int64_t count_ones() const {
    int64_t c = 0;
    for (uint8_t b : bits) c += b;
    return c;
  }
};

/// Fills entity squares and relation rectangles; relation types listed in
/// symmetric_types are additionally mirrored into the transposed rectangle.
/// Two distinct non-null labels targeting one cell is a hard error.
GoldTable gold_table(const Sentence& s, const LabelSpace& ls,
                     const std::set<std::string>& symmetric_types = {});

BinaryTable gold_binary_table(const GoldTable& g);

// Line-delimited JSON corpus: one record per line with fields id, tokens,
// entities [{start,end,type}], relations [{arg1,arg2,type}]. UTF-8.
std::vector<Sentence> load_corpus(const std::string& path);
void save_corpus(const std::vector<Sentence>& corpus, const std::string& path);

/// Token-string interning for the encoder. Index 0 is the unknown token.
struct Vocab {
  std::vector<std::string> tokens;  // tokens[0] == "<unk>"
  std::map<std::string, int32_t> index;

  static Vocab build(const std::vector<Sentence>& corpus);
  static Vocab from_tokens(std::vector<std::string> toks);
  int32_t lookup(const std::string& tok) const {
    auto it = index.find(tok);
    return it == index.end() ? 0 : it->second;
  }
  std::vector<int32_t> encode(const Sentence& s) const;
  int32_t size() const { return static_cast<int32_t>(tokens.size()); }
};

}  // namespace hiore
