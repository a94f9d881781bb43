#include "hiore/corpus.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace hiore {

void validate_sentence(const Sentence& s) {
  const std::string where = "sentence '" + s.id + "': ";
  int n = s.n();
  if (n < 1) throw CorpusError(where + "empty token list");
  std::vector<int> owner(static_cast<size_t>(n), -1);
  for (size_t e = 0; e < s.entities.size(); ++e) {
    const EntityMention& m = s.entities[e];
    if (m.start < 0 || m.end < m.start || m.end >= n)
      throw CorpusError(where + "entity span (" + std::to_string(m.start) + "," +
                        std::to_string(m.end) + ") out of range for n=" + std::to_string(n));
    if (m.etype.empty()) throw CorpusError(where + "entity with empty type");
    for (int t = m.start; t <= m.end; ++t) {
      if (owner[static_cast<size_t>(t)] != -1)
        throw CorpusError(where + "overlapping entity spans at token " + std::to_string(t));
      owner[static_cast<size_t>(t)] = static_cast<int>(e);
    }
  }
  for (const RelationMention& r : s.relations) {
    int ne = static_cast<int>(s.entities.size());
    if (r.arg1 < 0 || r.arg1 >= ne || r.arg2 < 0 || r.arg2 >= ne)
      throw CorpusError(where + "relation references missing entity");
    if (r.arg1 == r.arg2) throw CorpusError(where + "relation with identical arguments");
    if (r.rtype.empty()) throw CorpusError(where + "relation with empty type");
  }
}

int LabelSpace::entity_index(const std::string& t) const {
  auto it = std::lower_bound(entity_types.begin(), entity_types.end(), t);
  if (it == entity_types.end() || *it != t) throw CorpusError("unknown entity type: " + t);
  return 1 + static_cast<int>(it - entity_types.begin());
}

int LabelSpace::relation_index(const std::string& t) const {
  auto it = std::lower_bound(relation_types.begin(), relation_types.end(), t);
  if (it == relation_types.end() || *it != t) throw CorpusError("unknown relation type: " + t);
  return 1 + static_cast<int>(entity_types.size()) + static_cast<int>(it - relation_types.begin());
}

const std::string& LabelSpace::name(int idx) const {
  static const std::string null_name = kNullName;
  if (idx == kNull) return null_name;
  if (is_entity_label(idx)) return entity_types[static_cast<size_t>(idx - 1)];
  if (is_relation_label(idx))
    return relation_types[static_cast<size_t>(idx - 1 - static_cast<int>(entity_types.size()))];
  throw CorpusError("label index out of range: " + std::to_string(idx));
}

LabelSpace build_label_space(const std::vector<Sentence>& corpus) {
  if (corpus.empty()) throw CorpusError("cannot build a label space from an empty corpus");
  std::set<std::string> ents, rels;
  for (const Sentence& s : corpus) {
    for (const EntityMention& e : s.entities) ents.insert(e.etype);
    for (const RelationMention& r : s.relations) rels.insert(r.rtype);
  }
  LabelSpace ls;
  ls.entity_types.assign(ents.begin(), ents.end());
  ls.relation_types.assign(rels.begin(), rels.end());
  return ls;
}

namespace {

void fill_cell(GoldTable& g, int i, int j, int label, const std::string& source,
               std::vector<std::string>& cell_source) {
  int& cur = g.at(i, j);
  if (cur != LabelSpace::kNull && cur != label) {
    throw CorpusError("gold table cell conflict at (" + std::to_string(i) + "," +
                      std::to_string(j) + "): '" + cell_source[static_cast<size_t>(i * g.n + j)] +
                      "' vs '" + source + "'");
  }
  cur = label;
  cell_source[static_cast<size_t>(i * g.n + j)] = source;
}

}  // namespace

GoldTable gold_table(const Sentence& s, const LabelSpace& ls,
                     const std::set<std::string>& symmetric_types) {
  validate_sentence(s);
  GoldTable g;
  g.n = s.n();
  g.labels.assign(static_cast<size_t>(g.n) * static_cast<size_t>(g.n), LabelSpace::kNull);
  std::vector<std::string> source(g.labels.size());
  for (const EntityMention& e : s.entities) {
    int label = ls.entity_index(e.etype);
    std::string src = "entity " + e.etype + "(" + std::to_string(e.start) + "," + std::to_string(e.end) + ")";
    for (int i = e.start; i <= e.end; ++i)
      for (int j = e.start; j <= e.end; ++j) fill_cell(g, i, j, label, src, source);
  }
  for (const RelationMention& r : s.relations) {
    int label = ls.relation_index(r.rtype);
    const EntityMention& e1 = s.entities[static_cast<size_t>(r.arg1)];
    const EntityMention& e2 = s.entities[static_cast<size_t>(r.arg2)];
    std::string src = "relation " + r.rtype + "(" + std::to_string(r.arg1) + "," + std::to_string(r.arg2) + ")";
    for (int i = e1.start; i <= e1.end; ++i)
      for (int j = e2.start; j <= e2.end; ++j) fill_cell(g, i, j, label, src, source);
    if (symmetric_types.count(r.rtype)) {
      for (int i = e2.start; i <= e2.end; ++i)
        for (int j = e1.start; j <= e1.end; ++j) fill_cell(g, i, j, label, src, source);
    }
  }
  return g;
}

BinaryTable gold_binary_table(const GoldTable& g) {
  BinaryTable b;
  b.n = g.n;
  b.bits.resize(g.labels.size());
  for (size_t i = 0; i < g.labels.size(); ++i)
    b.bits[i] = g.labels[i] != LabelSpace::kNull ? 1 : 0;
  return b;
}

// ---------------------------------------------------------------------------
// JSONL I/O
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

Sentence parse_record(const json& rec, int line_no) {
  const std::string where = "corpus line " + std::to_string(line_no) + ": ";
  if (!rec.is_object()) throw CorpusError(where + "record is not an object");
  Sentence s;
  if (!rec.contains("id") || !rec["id"].is_string()) throw CorpusError(where + "missing string 'id'");
  s.id = rec["id"].get<std::string>();
  if (!rec.contains("tokens") || !rec["tokens"].is_array())
    throw CorpusError(where + "missing array 'tokens'");
  for (const auto& t : rec["tokens"]) {
    if (!t.is_string()) throw CorpusError(where + "non-string token");
    s.tokens.push_back(t.get<std::string>());
  }
  if (rec.contains("entities")) {
    if (!rec["entities"].is_array()) throw CorpusError(where + "'entities' must be an array");
    for (const auto& e : rec["entities"]) {
      if (!e.contains("start") || !e.contains("end") || !e.contains("type"))
        throw CorpusError(where + "entity missing start/end/type");
      s.entities.push_back({e["start"].get<int>(), e["end"].get<int>(), e["type"].get<std::string>()});
    }
  }
  if (rec.contains("relations")) {
    if (!rec["relations"].is_array()) throw CorpusError(where + "'relations' must be an array");
    for (const auto& r : rec["relations"]) {
      if (!r.contains("arg1") || !r.contains("arg2") || !r.contains("type"))
        throw CorpusError(where + "relation missing arg1/arg2/type");
      s.relations.push_back({r["arg1"].get<int>(), r["arg2"].get<int>(), r["type"].get<std::string>()});
    }
  }
  try {
    validate_sentence(s);
  } catch (const CorpusError& e) {
    throw CorpusError(where + e.what());
  }
  return s;
}

}  // namespace

std::vector<Sentence> load_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open corpus: " + path);
  std::vector<Sentence> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw CorpusError("corpus line " + std::to_string(line_no) + ": bad JSON: " + e.what());
    }
    out.push_back(parse_record(rec, line_no));
  }
  return out;
}

void save_corpus(const std::vector<Sentence>& corpus, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  for (const Sentence& s : corpus) {
    json rec;
    rec["id"] = s.id;
    rec["tokens"] = s.tokens;
    rec["entities"] = json::array();
    for (const EntityMention& e : s.entities)
      rec["entities"].push_back({{"start", e.start}, {"end", e.end}, {"type", e.etype}});
    rec["relations"] = json::array();
    for (const RelationMention& r : s.relations)
      rec["relations"].push_back({{"arg1", r.arg1}, {"arg2", r.arg2}, {"type", r.rtype}});
    os << rec.dump() << "\n";
  }
  if (!os) throw IoError("corpus write failed: " + path);
}

// ---------------------------------------------------------------------------
// Vocab
// ---------------------------------------------------------------------------

Vocab Vocab::build(const std::vector<Sentence>& corpus) {
  std::set<std::string> seen;
  for (const Sentence& s : corpus)
    for (const std::string& t : s.tokens) seen.insert(t);
  std::vector<std::string> toks;
  toks.reserve(seen.size() + 1);
  toks.push_back("<unk>");
  for (const std::string& t : seen)
    if (t != "<unk>") toks.push_back(t);
  return from_tokens(std::move(toks));
}

Vocab Vocab::from_tokens(std::vector<std::string> toks) {
  if (toks.empty() || toks[0] != "<unk>") throw ConfigError("vocab must start with <unk>");
  Vocab v;
  v.tokens = std::move(toks);
  for (size_t i = 0; i < v.tokens.size(); ++i)
    v.index[v.tokens[i]] = static_cast<int32_t>(i);
  return v;
}

std::vector<int32_t> Vocab::encode(const Sentence& s) const {
  std::vector<int32_t> ids;
  ids.reserve(s.tokens.size());
  for (const std::string& t : s.tokens) ids.push_back(lookup(t));
  return ids;
}

}  // namespace hiore
