#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "helpers.hpp"

#include <cstdio>
#include <fstream>

#include "hiore/eval.hpp"
#include "hiore/synth.hpp"

using namespace hiore;
using hiore::test::make_sentence;

namespace {

/// Test-side oracle: invert the filling rules. Reads entity squares back
/// off the diagonal runs and relation rectangles off the ordered pairs.
/// Valid for flat, conflict-free annotations without mirrored types.
std::pair<std::vector<EntityMention>, std::vector<RelationMention>> read_back(
    const GoldTable& g, const LabelSpace& ls) {
  std::vector<EntityMention> ents;
  int i = 0;
  while (i < g.n) {
    int label = g.at(i, i);
    if (!ls.is_entity_label(label)) {
      ++i;
      continue;
    }
    int j = i;
    while (j + 1 < g.n && g.at(j + 1, j + 1) == label && g.at(i, j + 1) == label) ++j;
    ents.push_back({i, j, ls.name(label)});
    i = j + 1;
  }
  std::vector<RelationMention> rels;
  for (size_t a = 0; a < ents.size(); ++a)
    for (size_t b = 0; b < ents.size(); ++b) {
      if (a == b) continue;
      int label = g.at(ents[a].start, ents[b].start);
      if (ls.is_relation_label(label))
        rels.push_back({static_cast<int>(a), static_cast<int>(b), ls.name(label)});
    }
  return {ents, rels};
}

}  // namespace

TEST_CASE("minimal well-formed record loads") {
  std::string path = "corpus_min.jsonl";
  {
    std::ofstream os(path);
    os << R"({"id":"a","tokens":["Bob","works"],"entities":[{"start":0,"end":0,"type":"PER"}],"relations":[]})"
       << "\n";
  }
  auto corpus = load_corpus(path);
  REQUIRE(corpus.size() == 1);
  CHECK(corpus[0].n() == 2);
  CHECK(corpus[0].entities.size() == 1);
  CHECK(corpus[0].entities[0].etype == "PER");
  std::remove(path.c_str());
}

TEST_CASE("overlapping spans are rejected") {
  Sentence s = make_sentence("x", 4, {{0, 2, "PER"}, {1, 1, "ORG"}});
  CHECK_THROWS_WITH_AS(validate_sentence(s), doctest::Contains("overlap"), CorpusError);
  std::string path = "corpus_bad.jsonl";
  {
    std::ofstream os(path);
    os << R"({"id":"x","tokens":["a","b","c","d"],"entities":[{"start":0,"end":2,"type":"PER"},{"start":1,"end":1,"type":"ORG"}]})"
       << "\n";
  }
  CHECK_THROWS_AS(load_corpus(path), CorpusError);
  std::remove(path.c_str());
}

TEST_CASE("span and relation reference validation") {
  CHECK_THROWS_AS(validate_sentence(make_sentence("x", 3, {{0, 3, "PER"}})), CorpusError);
  CHECK_THROWS_AS(validate_sentence(make_sentence("x", 3, {{-1, 0, "PER"}})), CorpusError);
  CHECK_THROWS_AS(validate_sentence(make_sentence("x", 3, {{0, 0, "PER"}}, {{0, 1, "R"}})), CorpusError);
  CHECK_THROWS_AS(validate_sentence(make_sentence("x", 3, {{0, 0, "PER"}, {2, 2, "ORG"}}, {{0, 0, "R"}})),
                  CorpusError);
  CHECK_THROWS_AS(validate_sentence(make_sentence("x", 0)), CorpusError);
}

TEST_CASE("malformed records are rejected with the line number") {
  std::string path = "corpus_malformed.jsonl";
  {
    std::ofstream os(path);
    os << R"({"id":"ok","tokens":["a"]})" << "\n";
    os << R"({"id":"bad","tokens":"not-an-array"})" << "\n";
  }
  CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("line 2"), CorpusError);
  std::remove(path.c_str());
}

TEST_CASE("synthetic corpus round-trips through save/load") {
  auto corpus = gen_synthetic(7, 20);
  REQUIRE(corpus.size() == 20);
  std::string path = "corpus_rt.jsonl";
  save_corpus(corpus, path);
  auto reloaded = load_corpus(path);
  CHECK(reloaded == corpus);
  // saving the reload reproduces the file byte for byte
  std::string path2 = "corpus_rt2.jsonl";
  save_corpus(reloaded, path2);
  std::ifstream f1(path), f2(path2);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("label space: null pinned at 0, entities sorted before relations") {
  auto corpus = std::vector<Sentence>{
      make_sentence("a", 3, {{0, 0, "PER"}, {2, 2, "ORG"}}, {{0, 1, "ORG-AFF"}})};
  LabelSpace ls = build_label_space(corpus);
  CHECK(ls.size() == 4);
  CHECK(LabelSpace::kNull == 0);
  CHECK(ls.entity_index("ORG") == 1);
  CHECK(ls.entity_index("PER") == 2);
  CHECK(ls.relation_index("ORG-AFF") == 3);
  CHECK(ls.is_entity_label(1));
  CHECK(ls.is_relation_label(3));
  CHECK_FALSE(ls.is_entity_label(3));
  CHECK(ls.name(0) == LabelSpace::kNullName);

  auto no_rel = std::vector<Sentence>{make_sentence("a", 2, {{0, 0, "PER"}})};
  CHECK(build_label_space(no_rel).size() == 2);
  CHECK_THROWS_AS(build_label_space({}), CorpusError);
}

TEST_CASE("label space ignores sentence order") {
  auto c1 = gen_synthetic(3, 40);
  auto c2 = c1;
  std::reverse(c2.begin(), c2.end());
  CHECK(build_label_space(c1) == build_label_space(c2));
}

TEST_CASE("gold table fills squares and rectangles, rest is null") {
  Sentence s = make_sentence("g", 4, {{0, 1, "PER"}, {3, 3, "ORG"}}, {{0, 1, "ORG-AFF"}});
  LabelSpace ls = build_label_space({s});
  GoldTable g = gold_table(s, ls);
  int per = ls.entity_index("PER"), org = ls.entity_index("ORG"), aff = ls.relation_index("ORG-AFF");
  CHECK(g.at(0, 0) == per);
  CHECK(g.at(0, 1) == per);
  CHECK(g.at(1, 0) == per);
  CHECK(g.at(1, 1) == per);
  CHECK(g.at(3, 3) == org);
  CHECK(g.at(0, 3) == aff);
  CHECK(g.at(1, 3) == aff);
  int nulls = 0;
  for (int v : g.labels) nulls += v == LabelSpace::kNull;
  CHECK(nulls == 9);

  BinaryTable b = gold_binary_table(g);
  CHECK(b.count_ones() == 7);

  Sentence empty = make_sentence("e", 3);
  GoldTable ge = gold_table(empty, ls);
  for (int v : ge.labels) CHECK(v == LabelSpace::kNull);
  CHECK(gold_binary_table(ge).count_ones() == 0);
}

TEST_CASE("symmetric relation types mirror into the transposed rectangle") {
  Sentence s = make_sentence("m", 5, {{0, 0, "PER"}, {3, 4, "PER"}}, {{0, 1, "NEAR"}});
  LabelSpace ls = build_label_space({s});
  GoldTable plain = gold_table(s, ls);
  CHECK(plain.at(3, 0) == LabelSpace::kNull);
  GoldTable mirrored = gold_table(s, ls, {"NEAR"});
  int near = ls.relation_index("NEAR");
  CHECK(mirrored.at(0, 3) == near);
  CHECK(mirrored.at(0, 4) == near);
  CHECK(mirrored.at(3, 0) == near);
  CHECK(mirrored.at(4, 0) == near);
}

TEST_CASE("cell conflicts are hard errors naming the cell") {
  // two relations targeting the same ordered cell with different labels
  Sentence s = make_sentence("c", 4, {{0, 0, "PER"}, {2, 2, "ORG"}}, {{0, 1, "R1"}, {0, 1, "R2"}});
  LabelSpace ls;
  ls.entity_types = {"ORG", "PER"};
  ls.relation_types = {"R1", "R2"};
  CHECK_THROWS_WITH_AS(gold_table(s, ls), doctest::Contains("(0,2)"), CorpusError);
}

TEST_CASE("binary table ones match the block-area formula") {
  SynthConfig cfg;
  Rng rng(5);
  auto corpus = gen_synthetic(11, 300, cfg);
  LabelSpace ls = build_label_space(corpus);
  for (const Sentence& s : corpus) {
    GoldTable g = gold_table(s, ls);
    int64_t want = 0;
    std::vector<int64_t> area;
    for (const EntityMention& e : s.entities) area.push_back(e.end - e.start + 1);
    for (const EntityMention& e : s.entities) {
      int64_t len = e.end - e.start + 1;
      want += len * len;
    }
    for (const RelationMention& r : s.relations)
      want += area[static_cast<size_t>(r.arg1)] * area[static_cast<size_t>(r.arg2)];
    CHECK(gold_binary_table(g).count_ones() == want);
  }
}

TEST_CASE("reading squares and rectangles back recovers 1000 random annotations") {
  auto corpus = gen_synthetic(17, 1000);
  LabelSpace ls = build_label_space(corpus);
  int checked = 0;
  for (const Sentence& s : corpus) {
    GoldTable g = gold_table(s, ls);
    auto [ents, rels] = read_back(g, ls);
    REQUIRE(ents.size() == s.entities.size());
    std::vector<EntityMention> want = s.entities;
    std::sort(want.begin(), want.end());
    std::vector<EntityMention> got = ents;
    std::sort(got.begin(), got.end());
    CHECK(want == got);
    // map original relations onto read-back entity indexing for comparison
    auto keyed = [&](const std::vector<RelationMention>& rs, const std::vector<EntityMention>& es) {
      std::set<std::tuple<int, int, int, int, std::string>> out;
      for (const RelationMention& r : rs) {
        const EntityMention& a = es[static_cast<size_t>(r.arg1)];
        const EntityMention& b = es[static_cast<size_t>(r.arg2)];
        out.insert({a.start, a.end, b.start, b.end, r.rtype});
      }
      return out;
    };
    CHECK(keyed(s.relations, s.entities) == keyed(rels, ents));
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("generator is deterministic and respects its config") {
  auto a = gen_synthetic(7, 20);
  auto b = gen_synthetic(7, 20);
  CHECK(a == b);
  auto c = gen_synthetic(8, 20);
  CHECK(a != c);

  SynthConfig no_rel;
  no_rel.allow_relations = false;
  for (const Sentence& s : gen_synthetic(7, 50, no_rel)) CHECK(s.relations.empty());

  SynthConfig bad;
  bad.min_len = 9;
  bad.max_len = 3;
  CHECK_THROWS_AS(gen_synthetic(7, 1, bad), ConfigError);
  CHECK_THROWS_AS(gen_synthetic(7, 0, SynthConfig{}), ConfigError);
}

TEST_CASE("1000 generated sentences populate all three evaluation strata") {
  auto corpus = gen_synthetic(7, 1000);
  int isolated = 0, multi = 0, longdist = 0;
  for (const Sentence& s : corpus) {
    std::set<int> related;
    for (const RelationMention& r : s.relations) {
      related.insert(r.arg1);
      related.insert(r.arg2);
    }
    for (size_t e = 0; e < s.entities.size(); ++e)
      if (!related.count(static_cast<int>(e))) ++isolated;
    if (s.relations.size() > 1) ++multi;
    for (const RelationMention& r : s.relations)
      if (argument_distance(s, r) > kLongDistanceThreshold) ++longdist;
    for (const Sentence& other : {s}) (void)other;
  }
  CHECK(isolated >= 1);
  CHECK(multi >= 1);
  CHECK(longdist >= 1);
}

TEST_CASE("vocab interning maps unknown tokens to <unk>") {
  auto corpus = gen_synthetic(7, 5);
  Vocab v = Vocab::build(corpus);
  CHECK(v.tokens[0] == "<unk>");
  CHECK(v.lookup("definitely-not-a-token") == 0);
  for (const Sentence& s : corpus)
    for (const std::string& t : s.tokens) CHECK(v.lookup(t) > 0);
  std::vector<int32_t> ids = v.encode(corpus[0]);
  CHECK(ids.size() == corpus[0].tokens.size());
}
