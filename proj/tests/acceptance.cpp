// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero if a gated
// criterion fails. Criterion 7 (ablation directionality) is reported but
// not gated; its generated report documents the ordering.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hiore/config.hpp"
#include "hiore/decode.hpp"
#include "hiore/graph.hpp"
#include "hiore/synth.hpp"
#include "hiore/trainer.hpp"

using namespace hiore;
namespace fs = std::filesystem;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void report(int criterion, bool pass, const std::string& what, double seconds, bool gated = true) {
  std::printf("[%s] criterion %d: %s (%.1fs)%s\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
              seconds, gated ? "" : " [not gated]");
  std::fflush(stdout);
  if (gated && !pass) ++failures;
}

std::string cli() {
  const char* env = std::getenv("HIORE_CLI");
  if (env && *env) return env;
  return "./tools/hiore";
}

int shell(const std::string& cmd) {
  int rc = std::system((cmd + " > acceptance_work/cmd_out.txt 2>&1").c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// --- criterion 1: gradient correctness through the CLI ---------------------

void criterion_1() {
  Timer t;
  int rc = shell(cli() + " gradcheck --size 6 --tolerance 1e-4");
  double secs = t.seconds();
  bool pass = rc == 0 && secs < 120.0;
  report(1, pass,
         "gradcheck: full n=6 pipeline, both strategies and ablations, max rel err <= 1e-4, "
         "runtime < 2 min",
         secs);
  if (rc != 0) std::printf("%s", slurp("acceptance_work/cmd_out.txt").c_str());
}

// --- criterion 2: overfit identity ------------------------------------------

SynthConfig overfit_synth() {
  SynthConfig synth;
  synth.vocab_size = 50;
  synth.min_len = 4;
  synth.max_len = 12;
  synth.entity_types = {"GRP", "ITM", "PER"};   // 3 entity types
  synth.relation_types = {"LINK", "PART"};      // 2 relation types
  return synth;
}

ModelConfig overfit_model_config() {
  ModelConfig cfg;
  cfg.encoder.model_dim = 48;
  cfg.encoder.layers = 2;
  cfg.encoder.heads = 2;
  cfg.encoder.ffn_dim = 96;
  cfg.encoder.max_len = 16;
  cfg.encoder.mlp_dim = 24;
  cfg.table.dist_dim = 24;
  cfg.table.dist_clamp = 12;
  cfg.wnet.depth = 2;
  cfg.wnet.base_channels = 12;
  cfg.wnet.out_channels = 24;
  return cfg;
}

void criterion_2() {
  Timer t;
  auto corpus = gen_synthetic(7, 20, overfit_synth());
  Model<float> model =
      Model<float>::build(overfit_model_config(), build_label_space(corpus), Vocab::build(corpus), 7);
  TrainHyper hyper;
  hyper.batch_size = 4;
  hyper.lr = 3e-3;
  hyper.max_epochs = 300;
  hyper.patience = 300;
  hyper.seed = 7;
  hyper.decode_threshold = 0.7;
  bool perfect = false;
  int perfect_epoch = -1;
  TrainResult r = train(model, corpus, corpus, hyper, [&](const EpochRecord& rec) {
    if (!perfect && rec.dev_entity.f1 == 1.0 && rec.dev_relation.f1 == 1.0) {
      perfect = true;
      perfect_epoch = rec.epoch;
    }
  });
  double secs = t.seconds();
  bool pass = perfect && secs < 300.0;
  std::ostringstream what;
  what << "overfit: 20 synthetic sentences reach entity AND relation F1 = 1.0 ";
  if (perfect)
    what << "at epoch " << perfect_epoch;
  else
    what << "(best avg F1 " << r.best_avg_f1 << " after " << r.history.size() << " epochs)";
  what << ", runtime < 5 min";
  report(2, pass, what.str(), secs);
}

// --- criterion 3: graph closed form -----------------------------------------

void criterion_3() {
  Timer t;
  bool pass = true;
  for (int n = 1; n <= 20 && pass; ++n) {
    // brute-force enumeration of the two rules
    std::set<std::pair<int32_t, int32_t>> want;
    auto id = [n](int i, int j) { return static_cast<int32_t>(i * n + j); };
    auto ins = [&](int32_t a, int32_t b) {
      if (a != b) want.insert({std::min(a, b), std::max(a, b)});
    };
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) {
          ins(id(i, i), id(j, j));
          ins(id(i, j), id(i, i));
          ins(id(i, j), id(j, j));
        }
    CellGraph g = static_graph(n);
    pass = pass && static_cast<int64_t>(g.edges.size()) == 5LL * n * (n - 1) / 2;
    pass = pass && std::set<std::pair<int32_t, int32_t>>(g.edges.begin(), g.edges.end()) == want;
  }
  int violations = 0;
  Rng rng(33);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = static_cast<int>(rng.uniform_int(1, 10));
    BinaryPredictionTable b;
    b.n = n;
    b.bits.resize(static_cast<size_t>(n) * static_cast<size_t>(n));
    for (auto& v : b.bits) v = rng.bernoulli(rng.uniform(0.05, 0.95)) ? 1 : 0;
    CellGraph dyn = dynamic_graph(b);
    std::set<std::pair<int32_t, int32_t>> stat;
    for (const auto& e : static_graph(n).edges) stat.insert(e);
    for (const auto& e : dyn.edges)
      if (!stat.count(e)) ++violations;
  }
  pass = pass && violations == 0;
  report(3, pass,
         "graph closed form: |E| = 5n(n-1)/2 for n in [1,20] vs rule enumeration; dynamic subset "
         "of static over 1000 random tables, " +
             std::to_string(violations) + " violations",
         t.seconds());
}

// --- criterion 4: decoding round trip ----------------------------------------

void criterion_4() {
  Timer t;
  SynthConfig synth;
  synth.min_len = 2;
  synth.max_len = 8;
  auto corpus = gen_synthetic(23, 1000, synth);
  LabelSpace ls = build_label_space(corpus);
  int mismatches = 0;
  for (const Sentence& s : corpus) {
    GoldTable g = gold_table(s, ls);
    ProbTable<double> pt = one_hot_table<double>(g, ls.size());
    // valid threshold interval for this instance: (max within-segment
    // distance, min boundary distance)
    std::vector<double> dist = adjacent_distances(pt);
    std::vector<int> seg(static_cast<size_t>(s.n()), -1);
    for (size_t e = 0; e < s.entities.size(); ++e)
      for (int tok = s.entities[e].start; tok <= s.entities[e].end; ++tok)
        seg[static_cast<size_t>(tok)] = static_cast<int>(e);
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (size_t tok = 0; tok + 1 < seg.size(); ++tok) {
      if (seg[tok] != seg[tok + 1])
        hi = std::min(hi, dist[tok]);
      else
        lo = std::max(lo, dist[tok]);
    }
    if (!(lo < hi)) {
      ++mismatches;
      continue;
    }
    double threshold = 0.5 * (lo + std::min(hi, lo + 2.0));
    DecodedResult d = decode(pt, ls, threshold);
    std::vector<EntityMention> we = s.entities, ge = d.entities;
    std::sort(we.begin(), we.end());
    std::sort(ge.begin(), ge.end());
    if (we != ge) {
      ++mismatches;
      continue;
    }
    Sentence rebuilt;
    rebuilt.id = s.id;
    rebuilt.tokens = s.tokens;
    rebuilt.entities = d.entities;
    rebuilt.relations = d.relations;
    if (gold_table(rebuilt, ls).labels != g.labels) ++mismatches;
  }
  report(4, mismatches == 0,
         "decode round trip over 1000 random gold annotations (n <= 8), " +
             std::to_string(mismatches) + " mismatches",
         t.seconds());
}

// --- criterion 5: loss anchors ------------------------------------------------

void criterion_5() {
  Timer t;
  auto corpus = gen_synthetic(41, 4, overfit_synth());
  LabelSpace ls = build_label_space(corpus);
  Vocab vocab = Vocab::build(corpus);
  ModelConfig cfg = overfit_model_config();
  cfg.strategy = "dynamic";  // so the binary loss is exercised too
  Model<double> model = Model<double>::build(cfg, ls, vocab, 41);
  GoldTable gold = gold_table(corpus[0], ls);
  Tape<double> tape;
  auto f = model.forward(tape, corpus[0], &gold, nullptr, false, 0);
  double want_entry = std::log(static_cast<double>(ls.size()));
  double want_bin = std::log(2.0);
  bool pass = std::abs(f.report.entry - want_entry) <= 1e-10 &&
              std::abs(f.report.bin - want_bin) <= 1e-10;
  // one-hot-correct probabilities score exactly zero
  ProbTable<double> onehot = one_hot_table<double>(gold, ls.size());
  std::vector<uint8_t> mask(gold.labels.size(), 1);
  pass = pass && loss_entry_probs(onehot, gold, mask) == 0.0;
  std::ostringstream what;
  what << "loss anchors: zero-init heads give L_entry=ln" << ls.size() << " (err "
       << std::abs(f.report.entry - want_entry) << "), L_bin=ln2 (err "
       << std::abs(f.report.bin - want_bin) << "), one-hot gives 0";
  report(5, pass, what.str(), t.seconds());
}

// --- criterion 6: GNN oracle equivalence --------------------------------------

double dense_vs_sparse(const CellGraph& g, int channels, uint64_t seed) {
  Rng rng(seed);
  ParameterStore<double> store;
  register_gnn_params<double>(store, 1, channels, channels, rng);
  Tensor<double> u(Shape{g.n, g.n, channels});
  for (auto& v : u.data) v = rng.uniform(-1, 1);
  Tape<double> tape;
  Tensor<double> sparse = tape.value(gnn_forward(tape, store, tape.input(u, false), g, 1));
  // dense reference
  int64_t nodes = g.node_count();
  std::vector<double> a(static_cast<size_t>(nodes * nodes), 0.0);
  for (int64_t i = 0; i < nodes; ++i) a[static_cast<size_t>(i * nodes + i)] = 1.0;
  for (const auto& [p, q] : g.edges) {
    a[static_cast<size_t>(p * nodes + q)] = 1.0;
    a[static_cast<size_t>(q * nodes + p)] = 1.0;
  }
  std::vector<double> dinv(static_cast<size_t>(nodes));
  for (int64_t i = 0; i < nodes; ++i) {
    double deg = 0;
    for (int64_t j = 0; j < nodes; ++j) deg += a[static_cast<size_t>(i * nodes + j)];
    dinv[static_cast<size_t>(i)] = 1.0 / std::sqrt(deg);
  }
  const Tensor<double>& w = store.get("gnn.l0.w").value;
  double max_dev = 0;
  for (int64_t i = 0; i < nodes; ++i)
    for (int64_t c = 0; c < channels; ++c) {
      double acc = 0;
      for (int64_t j = 0; j < nodes; ++j) {
        double coeff = dinv[static_cast<size_t>(i)] * a[static_cast<size_t>(i * nodes + j)] *
                       dinv[static_cast<size_t>(j)];
        if (coeff == 0) continue;
        double xw = 0;
        for (int64_t k = 0; k < channels; ++k)
          xw += u.data[static_cast<size_t>(j * channels + k)] * w(k, c);
        acc += coeff * xw;
      }
      double want = 0.5 * acc * (1.0 + std::erf(acc / std::sqrt(2.0)));
      max_dev = std::max(max_dev,
                         std::abs(want - sparse.data[static_cast<size_t>(i * channels + c)]));
    }
  return max_dev;
}

void criterion_6() {
  Timer t;
  double worst = 0;
  for (int n = 1; n <= 6; ++n) worst = std::max(worst, dense_vs_sparse(static_graph(n), 5, 100 + n));
  Rng rng(55);
  for (int trial = 0; trial < 100; ++trial) {
    int n = static_cast<int>(rng.uniform_int(1, 6));
    BinaryPredictionTable b;
    b.n = n;
    b.bits.resize(static_cast<size_t>(n) * static_cast<size_t>(n));
    for (auto& v : b.bits) v = rng.bernoulli(0.5) ? 1 : 0;
    worst = std::max(worst, dense_vs_sparse(dynamic_graph(b), 4, 200 + static_cast<uint64_t>(trial)));
  }
  std::ostringstream what;
  what << "gnn sparse vs dense reference on static n<=6 and 100 random dynamic graphs, max "
          "deviation "
       << worst;
  report(6, worst <= 1e-10, what.str(), t.seconds());
}

// --- criterion 7: ablation directionality (soft) -------------------------------

void criterion_7() {
  Timer t;
  int rc = shell(cli() + " ablation-report --out acceptance_work/ablation_report.txt" +
                 " --train-size 200 --dev-size 50 --seeds 3 --epochs 60");
  std::string text = slurp("acceptance_work/ablation_report.txt");
  bool well_formed = rc == 0 && text.find("mean relation F1") != std::string::npos &&
                     text.find("full") != std::string::npos;
  report(7, well_formed,
         "ablation report generated (200/50 split, 3 seeds); directional ordering documented in "
         "acceptance_work/ablation_report.txt",
         t.seconds(), /*gated=*/true);
  // the ordering itself is reported, not gated
  if (well_formed) {
    bool wnet_ok = text.find("full >= no-wnet (relation F1): yes") != std::string::npos;
    bool gnn_ok = text.find("full >= no-gnn  (relation F1): yes") != std::string::npos;
    std::printf("        directionality: full >= no-wnet: %s, full >= no-gnn: %s [not gated]\n",
                wnet_ok ? "yes" : "no", gnn_ok ? "yes" : "no");
  }
}

// --- criterion 8: scorer vs brute-force matcher --------------------------------

struct Counts {
  int64_t tp = 0, fp = 0, fn = 0;
};

template <typename Key>
Counts quad_match(std::vector<Key> pred, std::vector<Key> gold) {
  std::sort(pred.begin(), pred.end());
  pred.erase(std::unique(pred.begin(), pred.end()), pred.end());
  std::sort(gold.begin(), gold.end());
  gold.erase(std::unique(gold.begin(), gold.end()), gold.end());
  std::vector<bool> used(gold.size(), false);
  Counts c;
  for (const Key& p : pred) {
    bool hit = false;
    for (size_t i = 0; i < gold.size(); ++i)
      if (!used[i] && gold[i] == p) {
        used[i] = true;
        hit = true;
        break;
      }
    hit ? ++c.tp : ++c.fp;
  }
  for (bool u : used)
    if (!u) ++c.fn;
  return c;
}

void criterion_8() {
  Timer t;
  using EKey = std::tuple<int, int, std::string>;
  using RKey = std::tuple<EKey, EKey, std::string>;
  Rng rng(77);
  bool pass = true;
  for (int trial = 0; trial < 1000 && pass; ++trial) {
    auto gold = gen_synthetic(3000 + static_cast<uint64_t>(trial), 3);
    // random perturbation: drop / retype / shift
    std::vector<Sentence> pred;
    for (const Sentence& g : gold) {
      Sentence p;
      p.id = g.id;
      p.tokens = g.tokens;
      for (const EntityMention& e : g.entities) {
        double roll = rng.uniform();
        if (roll < 0.2) continue;
        EntityMention c = e;
        if (roll < 0.4) c.etype += "_X";
        else if (roll < 0.5 && c.end + 1 < g.n()) ++c.end;
        bool overlap = false;
        for (const EntityMention& q : p.entities)
          if (!(c.end < q.start || q.end < c.start)) overlap = true;
        if (!overlap) p.entities.push_back(c);
      }
      for (const RelationMention& r : g.relations) {
        if (rng.uniform() < 0.3) continue;
        auto find = [&](int gi) {
          const EntityMention& ge = g.entities[static_cast<size_t>(gi)];
          for (size_t i = 0; i < p.entities.size(); ++i)
            if (p.entities[i].start == ge.start) return static_cast<int>(i);
          return -1;
        };
        int a = find(r.arg1), b = find(r.arg2);
        if (a < 0 || b < 0 || a == b) continue;
        bool dup = false;
        for (const RelationMention& q : p.relations)
          if (q.arg1 == a && q.arg2 == b) dup = true;
        if (!dup) p.relations.push_back({a, b, rng.uniform() < 0.2 ? r.rtype + "_X" : r.rtype});
      }
      pred.push_back(std::move(p));
    }
    Counts ec, rc;
    for (size_t i = 0; i < gold.size(); ++i) {
      std::vector<EKey> pe, ge2;
      for (const auto& e : pred[i].entities) pe.push_back({e.start, e.end, e.etype});
      for (const auto& e : gold[i].entities) ge2.push_back({e.start, e.end, e.etype});
      Counts c1 = quad_match(pe, ge2);
      ec.tp += c1.tp;
      ec.fp += c1.fp;
      ec.fn += c1.fn;
      auto rkeys = [](const Sentence& s) {
        std::vector<RKey> out;
        for (const auto& r : s.relations) {
          const auto& a = s.entities[static_cast<size_t>(r.arg1)];
          const auto& b = s.entities[static_cast<size_t>(r.arg2)];
          out.push_back({{a.start, a.end, a.etype}, {b.start, b.end, b.etype}, r.rtype});
        }
        return out;
      };
      Counts c2 = quad_match(rkeys(pred[i]), rkeys(gold[i]));
      rc.tp += c2.tp;
      rc.fp += c2.fp;
      rc.fn += c2.fn;
    }
    PRF es = score_entities(pred, gold);
    PRF rs = score_relations(pred, gold);
    pass = pass && es.tp == ec.tp && es.fp == ec.fp && es.fn == ec.fn;
    pass = pass && rs.tp == rc.tp && rs.fp == rc.fp && rs.fn == rc.fn;
  }
  // targeted strict-criterion cases
  auto mk = [](std::vector<EntityMention> es, std::vector<RelationMention> rs) {
    Sentence s;
    s.id = "t";
    for (int i = 0; i < 8; ++i) s.tokens.push_back("w");
    s.entities = std::move(es);
    s.relations = std::move(rs);
    return s;
  };
  Sentence g = mk({{0, 1, "PER"}, {4, 4, "ORG"}}, {{0, 1, "AFF"}});
  PRF wrong_type = score_entities({mk({{0, 1, "ORG"}, {4, 4, "ORG"}}, {})}, {g});
  pass = pass && wrong_type.tp == 1 && wrong_type.fp == 1 && wrong_type.fn == 1;
  PRF wrong_boundary = score_entities({mk({{0, 2, "PER"}, {4, 4, "ORG"}}, {})}, {g});
  pass = pass && wrong_boundary.tp == 1 && wrong_boundary.fp == 1 && wrong_boundary.fn == 1;
  PRF arg_type = score_relations({mk({{0, 1, "GPE"}, {4, 4, "ORG"}}, {{0, 1, "AFF"}})}, {g});
  pass = pass && arg_type.tp == 0 && arg_type.fp == 1 && arg_type.fn == 1;
  PRF arg_ok = score_relations({mk({{0, 1, "PER"}, {4, 4, "ORG"}}, {{0, 1, "AFF"}})}, {g});
  pass = pass && arg_ok.tp == 1 && arg_ok.fp == 0 && arg_ok.fn == 0;
  report(8, pass,
         "strict scorer matches the quadratic matcher on 1000 random pred/gold pairs plus "
         "targeted wrong-type/wrong-boundary cases",
         t.seconds());
}

// --- criterion 9: determinism ---------------------------------------------------

void criterion_9() {
  Timer t;
  SynthConfig synth;
  synth.vocab_size = 40;
  synth.min_len = 4;
  synth.max_len = 8;
  save_corpus(gen_synthetic(7, 10, synth), "acceptance_work/det_train.jsonl");
  nlohmann::json j;
  j["seed"] = 7;
  j["dtype"] = "float32";
  j["deterministic"] = true;
  j["paths"] = {{"train", "acceptance_work/det_train.jsonl"},
                {"dev", "acceptance_work/det_train.jsonl"}};
  j["encoder"] = {{"model_dim", 16}, {"layers", 1}, {"heads", 2}, {"ffn_dim", 24},
                  {"max_len", 16},   {"mlp_dim", 8}};
  j["table"] = {{"dist_dim", 8}, {"dist_clamp", 8}};
  j["wnet"] = {{"depth", 1}, {"base_channels", 6}, {"out_channels", 8}};
  j["train"] = {{"batch_size", 4}, {"lr", 2e-3}, {"max_epochs", 4}, {"patience", 4}};
  j["decode"] = {{"threshold", 0.7}};
  std::ofstream("acceptance_work/det_config.json") << j.dump(2);
  int rc1 = shell(cli() + " train --config acceptance_work/det_config.json --out-dir acceptance_work/det_a");
  int rc2 = shell(cli() + " train --config acceptance_work/det_config.json --out-dir acceptance_work/det_b");
  std::string a = slurp("acceptance_work/det_a/metrics.jsonl");
  std::string b = slurp("acceptance_work/det_b/metrics.jsonl");
  bool pass = rc1 == 0 && rc2 == 0 && !a.empty() && a == b;
  report(9, pass, "two cmd_train runs with identical seeds produce bit-identical metrics files",
         t.seconds());
}

}  // namespace

int main() {
  fs::create_directories("acceptance_work");
  std::printf("acceptance suite (cli: %s)\n", cli().c_str());
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  std::printf("%d criterion failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
