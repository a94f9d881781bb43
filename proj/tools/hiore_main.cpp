// hiore command-line interface: train / eval / predict plus the inspection
// and verification commands (gradcheck, inspect-graph, calibrate-threshold,
// export-features, gen-synthetic, ablation-report).

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

#include "hiore/config.hpp"
#include "hiore/gradcheck.hpp"
#include "hiore/synth.hpp"
#include "hiore/trainer.hpp"

using namespace hiore;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  int threads = 0;         // 0 = take from config
  int deterministic = -1;  // -1 = take from config
  uint64_t seed = 0;
  bool seed_set = false;
};

RunConfig resolve_config(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) cfg = load_run_config(f.config_path);
  if (f.seed_set) {
    cfg.seed = f.seed;
    cfg.train.seed = f.seed;
  }
  if (f.threads > 0) cfg.threads = f.threads;
  if (f.deterministic >= 0) cfg.deterministic = f.deterministic != 0;
  if (cfg.deterministic) cfg.threads = 1;
  cfg.train.deterministic = cfg.deterministic;
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  os << text;
}

std::string prf_line(const char* label, const PRF& p) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-10s P=%.4f R=%.4f F1=%.4f (tp=%lld fp=%lld fn=%lld)", label,
                p.precision, p.recall, p.f1, static_cast<long long>(p.tp),
                static_cast<long long>(p.fp), static_cast<long long>(p.fn));
  return buf;
}

json prf_json(const PRF& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
          {"tp", p.tp},               {"fp", p.fp},         {"fn", p.fn}};
}

template <typename T>
std::vector<Sentence> predict_corpus(Model<T>& model, const std::vector<Sentence>& corpus,
                                     double threshold, int threads,
                                     std::vector<DecodedResult>* details = nullptr) {
  std::vector<Sentence> out(corpus.size());
  std::vector<DecodedResult> det(corpus.size());
  if (threads <= 1) {
    for (size_t i = 0; i < corpus.size(); ++i)
      out[i] = model.predict_sentence(corpus[i], threshold, nullptr, &det[i]);
  } else {
    // frozen-parameter forwards are independent; chunk across workers and
    // collect in order
    std::vector<std::future<void>> jobs;
    std::atomic<size_t> next{0};
    for (int w = 0; w < threads; ++w)
      jobs.push_back(std::async(std::launch::async, [&]() {
        for (size_t i = next.fetch_add(1); i < corpus.size(); i = next.fetch_add(1))
          out[i] = model.predict_sentence(corpus[i], threshold, nullptr, &det[i]);
      }));
    for (auto& j : jobs) j.get();
  }
  if (details) *details = std::move(det);
  return out;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

template <typename T>
int run_train(RunConfig cfg, const std::string& out_dir) {
  if (cfg.train_path.empty())
    throw ConfigError("config: paths.train is required for the train command");
  auto train_set = load_corpus(cfg.train_path);
  std::vector<Sentence> dev_set =
      cfg.dev_path.empty() ? train_set : load_corpus(cfg.dev_path);
  if (train_set.empty()) throw CorpusError("train corpus is empty");
  if (dev_set.empty()) throw CorpusError("dev corpus is empty");

  LabelSpace labels = build_label_space(train_set);
  Vocab vocab = Vocab::build(train_set);
  Model<T> model = Model<T>::build(cfg.model, labels, vocab, cfg.seed);
  std::cout << "model: " << model.store.size() << " parameter tensors, "
            << model.store.total_elements() << " elements\n";

  fs::create_directories(out_dir);
  std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl");
  if (!metrics) throw IoError("cannot open metrics file in " + out_dir);
  bool include_timing = !cfg.deterministic;
  auto t0 = std::chrono::steady_clock::now();
  TrainResult result = train(model, train_set, dev_set, cfg.train, [&](const EpochRecord& r) {
    metrics << epoch_record_to_json(r, include_timing).dump() << "\n";
    metrics.flush();
    std::cout << "epoch " << r.epoch << " loss=" << r.loss_total << " dev_ent_f1=" << r.dev_entity.f1
              << " dev_rel_f1=" << r.dev_relation.f1 << " (" << r.sent_per_s << " sent/s)\n";
  });
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  save_checkpoint(model, (fs::path(out_dir) / "checkpoint.bin").string());
  json snapshot = run_config_to_json(cfg);
  snapshot["encoder"]["vocab_size"] = model.cfg.encoder.vocab_size;
  write_text((fs::path(out_dir) / "resolved_config.json").string(), snapshot.dump(2) + "\n");
  std::cout << "best epoch " << result.best_epoch << " dev avg F1 " << result.best_avg_f1 << " ("
            << result.history.size() << " epochs in " << wall << " s)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

template <typename T>
int run_eval(const std::string& ckpt, const std::string& corpus_path, bool strata,
             double threshold, int threads, const std::string& out_path) {
  Model<T> model = load_checkpoint<T>(ckpt);
  auto gold = load_corpus(corpus_path);
  if (gold.empty()) throw CorpusError("eval corpus is empty: " + corpus_path);
  auto t0 = std::chrono::steady_clock::now();
  auto pred = predict_corpus(model, gold, threshold, threads);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  PRF ent = score_entities(pred, gold);
  PRF rel = score_relations(pred, gold);
  std::cout << prf_line("entity", ent) << "\n" << prf_line("relation", rel) << "\n";
  json report;
  report["entity"] = prf_json(ent);
  report["relation"] = prf_json(rel);
  report["avg_f1"] = 0.5 * (ent.f1 + rel.f1);
  report["sentences"] = gold.size();
  report["sent_per_s"] = wall > 0 ? static_cast<double>(gold.size()) / wall : 0.0;

  json per_type;
  for (const auto& [type, prf] : score_entities_by_type(pred, gold)) per_type["entity"][type] = prf_json(prf);
  for (const auto& [type, prf] : score_relations_by_type(pred, gold))
    per_type["relation"][type] = prf_json(prf);
  report["per_type"] = per_type;

  if (strata) {
    StratifiedResult sr = stratified_eval(pred, gold);
    auto stratum = [&](const char* name, const StratumScore& s) {
      if (s.defined) {
        std::cout << prf_line(name, s.prf) << " [gold items " << s.gold_items << "]\n";
        report["strata"][name] = prf_json(s.prf);
        report["strata"][name]["gold_items"] = s.gold_items;
      } else {
        std::cout << name << ": n/a (empty stratum)\n";
        report["strata"][name] = "n/a";
      }
    };
    stratum("IE", sr.isolated_entities);
    stratum("MR", sr.multi_relation);
    stratum("LDR", sr.long_distance);
  }
  std::cout << "throughput: " << report["sent_per_s"].get<double>() << " sent/s\n";
  if (!out_path.empty()) write_text(out_path, report.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

template <typename T>
int run_predict(const std::string& ckpt, const std::string& corpus_path, const std::string& out,
                double threshold, int threads) {
  Model<T> model = load_checkpoint<T>(ckpt);
  auto corpus = load_corpus(corpus_path);
  if (corpus.empty()) throw CorpusError("predict corpus is empty: " + corpus_path);
  auto t0 = std::chrono::steady_clock::now();
  std::vector<DecodedResult> details;
  auto pred = predict_corpus(model, corpus, threshold, threads, &details);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream os(out);
  if (!os) throw IoError("cannot open for write: " + out);
  for (size_t i = 0; i < pred.size(); ++i) {
    json rec;
    rec["id"] = pred[i].id;
    rec["tokens"] = pred[i].tokens;
    rec["entities"] = json::array();
    for (size_t e = 0; e < pred[i].entities.size(); ++e) {
      const EntityMention& m = pred[i].entities[e];
      rec["entities"].push_back({{"start", m.start},
                                 {"end", m.end},
                                 {"type", m.etype},
                                 {"score", details[i].entity_scores[e]}});
    }
    rec["relations"] = json::array();
    for (size_t r = 0; r < pred[i].relations.size(); ++r) {
      const RelationMention& m = pred[i].relations[r];
      rec["relations"].push_back({{"arg1", m.arg1},
                                  {"arg2", m.arg2},
                                  {"type", m.rtype},
                                  {"score", details[i].relation_scores[r]}});
    }
    os << rec.dump() << "\n";
  }
  std::cout << "wrote " << pred.size() << " predictions to " << out << " ("
            << (wall > 0 ? static_cast<double>(pred.size()) / wall : 0.0) << " sent/s)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// inspect-graph
// ---------------------------------------------------------------------------

void dump_graph(const CellGraph& g) {
  for (const auto& [a, b] : g.edges) {
    int ai = a / g.n, aj = a % g.n, bi = b / g.n, bj = b % g.n;
    std::cout << ai << "," << aj << " -- " << bi << "," << bj << "\n";
  }
  std::cout << "nodes " << g.node_count() << " edges " << g.edges.size() << " (static bound "
            << 5LL * g.n * (g.n - 1) / 2 << ")\n";
}

template <typename T>
int run_inspect_checkpoint(const std::string& ckpt, const std::string& corpus_path,
                           const std::string& sentence_id) {
  Model<T> model = load_checkpoint<T>(ckpt);
  auto corpus = load_corpus(corpus_path);
  const Sentence* s = nullptr;
  for (const Sentence& c : corpus)
    if (sentence_id.empty() || c.id == sentence_id) {
      s = &c;
      break;
    }
  if (!s) throw CorpusError("sentence id not found: " + sentence_id);
  auto p = model.predict(*s);
  std::cout << "sentence '" << s->id << "' n=" << s->n() << " strategy=" << model.cfg.strategy
            << "\n";
  CellGraph dyn = dynamic_graph(p.bhat);
  dump_graph(model.cfg.strategy == "dynamic" ? p.graph : dyn);
  return 0;
}

// ---------------------------------------------------------------------------
// calibrate-threshold
// ---------------------------------------------------------------------------

template <typename T>
int run_calibrate(const std::string& ckpt, const std::string& corpus_path, double lo, double hi,
                  double step) {
  Model<T> model = load_checkpoint<T>(ckpt);
  auto gold = load_corpus(corpus_path);
  if (gold.empty()) throw CorpusError("calibration corpus is empty");
  double best_t = lo, best_f1 = -1;
  for (double t = lo; t <= hi + 1e-12; t += step) {
    auto pred = predict_corpus(model, gold, t, 1);
    PRF ent = score_entities(pred, gold);
    PRF rel = score_relations(pred, gold);
    double avg = 0.5 * (ent.f1 + rel.f1);
    std::cout << "threshold " << t << " entity_f1 " << ent.f1 << " relation_f1 " << rel.f1
              << " avg " << avg << "\n";
    if (avg > best_f1) {
      best_f1 = avg;
      best_t = t;
    }
  }
  std::cout << "best threshold " << best_t << " avg_f1 " << best_f1 << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// export-features
// ---------------------------------------------------------------------------

template <typename T>
int run_export_features(const std::string& ckpt, const std::string& corpus_path,
                        const std::string& out_dir, bool with_attention) {
  Model<T> model = load_checkpoint<T>(ckpt);
  auto corpus = load_corpus(corpus_path);
  fs::create_directories(out_dir);
  for (const Sentence& s : corpus) {
    EncoderOutput<T> eo = encode(model.store, model.cfg.encoder, model.vocab.encode(s));
    eo.sentence_id = s.id;
    if (!with_attention) eo.attention = Tensor<T>();
    export_features(eo, (fs::path(out_dir) / (s.id + ".feat")).string());
  }
  std::cout << "exported " << corpus.size() << " feature files to " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

int run_gradcheck(int n, double eps, double tolerance, uint64_t seed) {
  bool ok = true;
  auto report = [&](const GradCheckCase& c, double tol) {
    bool pass = c.max_rel_err <= tol;
    ok = ok && pass;
    std::printf("%-28s max_rel_err=%.3e params=%6lld time=%6.2fs %s\n", c.name.c_str(),
                c.max_rel_err, static_cast<long long>(c.checked_params), c.seconds,
                pass ? "ok" : "EXCEEDED");
    if (!pass) std::printf("    worst input: %s\n", c.worst_input.c_str());
  };
  for (const GradCheckCase& c : gradcheck_primitives(1e-5)) report(c, 1e-6);
  for (const GradCheckCase& c : gradcheck_suite(n, eps, seed)) report(c, tolerance);
  std::printf("gradcheck %s\n", ok ? "PASSED" : "FAILED");
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// ablation-report
// ---------------------------------------------------------------------------

ModelConfig ablation_model_config() {
  ModelConfig cfg;
  cfg.encoder.model_dim = 32;
  cfg.encoder.layers = 1;
  cfg.encoder.heads = 2;
  cfg.encoder.ffn_dim = 48;
  cfg.encoder.max_len = 16;
  cfg.encoder.mlp_dim = 16;
  cfg.table.dist_dim = 16;
  cfg.table.dist_clamp = 12;
  cfg.wnet.depth = 1;
  cfg.wnet.base_channels = 12;
  cfg.wnet.out_channels = 32;
  return cfg;
}

int run_ablation_report(const std::string& out_path, int train_size, int dev_size, int seeds,
                        int epochs) {
  SynthConfig synth;
  synth.vocab_size = 60;
  synth.min_len = 6;
  synth.max_len = 12;
  auto train_set = gen_synthetic(101, train_size, synth);
  auto dev_set = gen_synthetic(202, dev_size, synth);
  LabelSpace labels = build_label_space(train_set);
  Vocab vocab = Vocab::build(train_set);

  std::vector<std::pair<std::string, ModelConfig>> variants;
  ModelConfig base = ablation_model_config();
  variants.emplace_back("full", base);
  {
    ModelConfig c = base;
    c.use_wnet = false;
    variants.emplace_back("no-wnet", c);
  }
  {
    ModelConfig c = base;
    c.use_gnn = false;
    variants.emplace_back("no-gnn", c);
  }

  TrainHyper hyper;
  hyper.batch_size = 8;
  hyper.lr = 4e-3;
  hyper.max_epochs = epochs;
  hyper.patience = epochs;  // fixed budget, no premature stop at zero F1
  hyper.decode_threshold = 0.7;

  std::ostringstream report;
  report << "ablation report: " << train_size << " train / " << dev_size
         << " dev synthetic sentences, " << seeds << " seeds, <= " << epochs << " epochs\n";
  report << "variant      seed  dev_entity_f1  dev_relation_f1\n";
  std::map<std::string, double> mean_rel, mean_ent;
  for (auto& [name, cfg] : variants) {
    for (int s = 0; s < seeds; ++s) {
      uint64_t seed = 1000 + static_cast<uint64_t>(s);
      hyper.seed = seed;
      Model<float> model = Model<float>::build(cfg, labels, vocab, seed);
      TrainResult r = train(model, train_set, dev_set, hyper);
      auto [ent, rel] = evaluate_corpus(model, dev_set, hyper.decode_threshold);
      char line[128];
      std::snprintf(line, sizeof(line), "%-12s %4llu %14.4f %16.4f\n", name.c_str(),
                    static_cast<unsigned long long>(seed), ent.f1, rel.f1);
      report << line;
      std::cout << line << std::flush;
      mean_rel[name] += rel.f1 / seeds;
      mean_ent[name] += ent.f1 / seeds;
    }
  }
  report << "\nmean relation F1 over seeds:\n";
  for (auto& [name, f1] : mean_rel) {
    char line[96];
    std::snprintf(line, sizeof(line), "  %-12s entity %.4f relation %.4f\n", name.c_str(),
                  mean_ent[name], f1);
    report << line;
  }
  bool beats_no_wnet = mean_rel["full"] >= mean_rel["no-wnet"];
  bool beats_no_gnn = mean_rel["full"] >= mean_rel["no-gnn"];
  report << "\nfull >= no-wnet (relation F1): " << (beats_no_wnet ? "yes" : "no") << "\n";
  report << "full >= no-gnn  (relation F1): " << (beats_no_gnn ? "yes" : "no") << "\n";
  std::string text = report.str();
  std::cout << "\n" << text;
  if (!out_path.empty()) write_text(out_path, text);
  return 0;
}

std::string checkpoint_dtype(const std::string& path) {
  json m = peek_checkpoint_manifest(path);
  std::string dtype = m.value("dtype", "");
  if (dtype != "float32" && dtype != "float64")
    throw IoError("checkpoint: unsupported dtype '" + dtype + "'");
  return dtype;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unified entity-relation extraction over table filling"};
  app.require_subcommand(1);

  CommonFlags flags;

  // --- gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic annotated corpus");
  std::string gen_out;
  uint64_t gen_seed = 7;
  int gen_count = 20;
  SynthConfig synth_cfg;
  bool gen_no_relations = false;
  gen->add_option("--out", gen_out, "output corpus path")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--count", gen_count, "number of sentences");
  gen->add_option("--vocab", synth_cfg.vocab_size, "vocabulary size");
  gen->add_option("--min-len", synth_cfg.min_len, "minimum sentence length");
  gen->add_option("--max-len", synth_cfg.max_len, "maximum sentence length");
  gen->add_option("--entity-types", synth_cfg.entity_types, "entity type names");
  gen->add_option("--relation-types", synth_cfg.relation_types, "relation type names");
  gen->add_option("--max-entities", synth_cfg.max_entities, "entities per sentence cap");
  gen->add_option("--max-span-len", synth_cfg.max_span_len, "span length cap");
  gen->add_flag("--no-relations", gen_no_relations, "generate entities only");

  // --- train
  auto* tr = app.add_subcommand("train", "train a model from a config file");
  std::string train_out_dir = "run";
  std::string train_override, dev_override;
  int epochs_override = 0;
  tr->add_option("--config", flags.config_path, "run configuration JSON")->required();
  tr->add_option("--out-dir", train_out_dir, "output directory");
  tr->add_option("--train", train_override, "override paths.train");
  tr->add_option("--dev", dev_override, "override paths.dev");
  tr->add_option("--epochs", epochs_override, "override train.max_epochs");
  tr->add_option("--seed", flags.seed, "override seed")->each([&](const std::string&) { flags.seed_set = true; });
  tr->add_option("--threads", flags.threads, "worker threads (prediction paths)");
  tr->add_option("--deterministic", flags.deterministic, "force deterministic mode (0/1)");

  // --- eval
  auto* ev = app.add_subcommand("eval", "score a checkpoint against a gold corpus");
  std::string ev_ckpt, ev_corpus, ev_out;
  bool ev_strata = false;
  double ev_threshold = -1;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--corpus", ev_corpus)->required();
  ev->add_option("--out", ev_out, "write the JSON report here");
  ev->add_flag("--strata", ev_strata, "report IE/MR/LDR strata");
  ev->add_option("--threshold", ev_threshold, "decoding threshold override");
  ev->add_option("--threads", flags.threads);

  // --- predict
  auto* pr = app.add_subcommand("predict", "decode a corpus and write predictions");
  std::string pr_ckpt, pr_corpus, pr_out;
  double pr_threshold = -1;
  pr->add_option("--checkpoint", pr_ckpt)->required();
  pr->add_option("--corpus", pr_corpus)->required();
  pr->add_option("--out", pr_out)->required();
  pr->add_option("--threshold", pr_threshold, "decoding threshold override");
  pr->add_option("--threads", flags.threads);

  // --- gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  int gc_n = 6;
  double gc_eps = 2e-5, gc_tol = 1e-4;
  uint64_t gc_seed = 7;
  gc->add_option("--size", gc_n, "probe sentence length");
  gc->add_option("--eps", gc_eps, "central difference step");
  gc->add_option("--tolerance", gc_tol, "pipeline tolerance");
  gc->add_option("--seed", gc_seed);

  // --- inspect-graph
  auto* ig = app.add_subcommand("inspect-graph", "dump cell-graph edges and counts");
  int ig_n = 0;
  std::string ig_ckpt, ig_corpus, ig_sentence;
  ig->add_option("--n", ig_n, "static graph over an n-token table");
  ig->add_option("--checkpoint", ig_ckpt, "dynamic graph from this checkpoint");
  ig->add_option("--corpus", ig_corpus, "corpus holding the probe sentence");
  ig->add_option("--sentence", ig_sentence, "sentence id (default: first)");

  // --- calibrate-threshold
  auto* cal = app.add_subcommand("calibrate-threshold", "sweep decode thresholds on a dev split");
  std::string cal_ckpt, cal_corpus;
  double cal_lo = 0.1, cal_hi = 1.6, cal_step = 0.1;
  cal->add_option("--checkpoint", cal_ckpt)->required();
  cal->add_option("--corpus", cal_corpus)->required();
  cal->add_option("--lo", cal_lo);
  cal->add_option("--hi", cal_hi);
  cal->add_option("--step", cal_step);

  // --- export-features
  auto* ex = app.add_subcommand("export-features", "export encoder states/attention per sentence");
  std::string ex_ckpt, ex_corpus, ex_out;
  bool ex_no_attention = false;
  ex->add_option("--checkpoint", ex_ckpt)->required();
  ex->add_option("--corpus", ex_corpus)->required();
  ex->add_option("--out-dir", ex_out)->required();
  ex->add_flag("--no-attention", ex_no_attention, "omit attention channels");

  // --- ablation-report
  auto* ab = app.add_subcommand("ablation-report", "train full vs ablated variants and compare");
  std::string ab_out = "ablation_report.txt";
  int ab_train = 200, ab_dev = 50, ab_seeds = 3, ab_epochs = 100;
  ab->add_option("--out", ab_out);
  ab->add_option("--train-size", ab_train);
  ab->add_option("--dev-size", ab_dev);
  ab->add_option("--seeds", ab_seeds);
  ab->add_option("--epochs", ab_epochs);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      if (gen_no_relations) synth_cfg.allow_relations = false;
      save_corpus(gen_synthetic(gen_seed, gen_count, synth_cfg), gen_out);
      std::cout << "wrote " << gen_count << " sentences to " << gen_out << "\n";
      return 0;
    }
    if (tr->parsed()) {
      RunConfig cfg = resolve_config(flags);
      if (!train_override.empty()) cfg.train_path = train_override;
      if (!dev_override.empty()) cfg.dev_path = dev_override;
      if (epochs_override > 0) cfg.train.max_epochs = epochs_override;
      cfg.validate();
      return cfg.dtype == "float64" ? run_train<double>(cfg, train_out_dir)
                                    : run_train<float>(cfg, train_out_dir);
    }
    if (ev->parsed()) {
      int threads = flags.threads > 0 ? flags.threads : 1;
      json manifest = peek_checkpoint_manifest(ev_ckpt);
      double threshold = ev_threshold >= 0 ? ev_threshold : 1.4;
      return checkpoint_dtype(ev_ckpt) == "float64"
                 ? run_eval<double>(ev_ckpt, ev_corpus, ev_strata, threshold, threads, ev_out)
                 : run_eval<float>(ev_ckpt, ev_corpus, ev_strata, threshold, threads, ev_out);
    }
    if (pr->parsed()) {
      int threads = flags.threads > 0 ? flags.threads : 1;
      double threshold = pr_threshold >= 0 ? pr_threshold : 1.4;
      return checkpoint_dtype(pr_ckpt) == "float64"
                 ? run_predict<double>(pr_ckpt, pr_corpus, pr_out, threshold, threads)
                 : run_predict<float>(pr_ckpt, pr_corpus, pr_out, threshold, threads);
    }
    if (gc->parsed()) return run_gradcheck(gc_n, gc_eps, gc_tol, gc_seed);
    if (ig->parsed()) {
      if (ig_n > 0) {
        dump_graph(static_graph(ig_n));
        return 0;
      }
      if (ig_ckpt.empty() || ig_corpus.empty())
        throw ConfigError("inspect-graph needs --n or --checkpoint with --corpus");
      return checkpoint_dtype(ig_ckpt) == "float64"
                 ? run_inspect_checkpoint<double>(ig_ckpt, ig_corpus, ig_sentence)
                 : run_inspect_checkpoint<float>(ig_ckpt, ig_corpus, ig_sentence);
    }
    if (cal->parsed())
      return checkpoint_dtype(cal_ckpt) == "float64"
                 ? run_calibrate<double>(cal_ckpt, cal_corpus, cal_lo, cal_hi, cal_step)
                 : run_calibrate<float>(cal_ckpt, cal_corpus, cal_lo, cal_hi, cal_step);
    if (ex->parsed())
      return checkpoint_dtype(ex_ckpt) == "float64"
                 ? run_export_features<double>(ex_ckpt, ex_corpus, ex_out, !ex_no_attention)
                 : run_export_features<float>(ex_ckpt, ex_corpus, ex_out, !ex_no_attention);
    if (ab->parsed()) return run_ablation_report(ab_out, ab_train, ab_dev, ab_seeds, ab_epochs);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
