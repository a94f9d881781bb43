// Microbenchmarks for the hot paths: table construction, the W-shaped
// conv stack, sparse GNN message passing, decoding and end-to-end
// prediction throughput.

#include <benchmark/benchmark.h>

#include "hiore/decode.hpp"
#include "hiore/graph.hpp"
#include "hiore/model.hpp"
#include "hiore/synth.hpp"

using namespace hiore;

namespace {

ModelConfig bench_config() {
  ModelConfig cfg;
  cfg.encoder.model_dim = 64;
  cfg.encoder.layers = 2;
  cfg.encoder.heads = 4;
  cfg.encoder.ffn_dim = 128;
  cfg.encoder.max_len = 64;
  cfg.encoder.mlp_dim = 32;
  cfg.table.dist_dim = 32;
  cfg.table.dist_clamp = 32;
  cfg.wnet.depth = 2;
  cfg.wnet.base_channels = 16;
  cfg.wnet.out_channels = 32;
  return cfg;
}

Model<float> bench_model(const std::vector<Sentence>& corpus, uint64_t seed) {
  return Model<float>::build(bench_config(), build_label_space(corpus), Vocab::build(corpus), seed);
}

std::vector<Sentence> bench_corpus(int len) {
  SynthConfig synth;
  synth.min_len = len;
  synth.max_len = len;
  synth.vocab_size = 200;
  return gen_synthetic(7, 16, synth);
}

void BM_StaticGraph(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(static_graph(n));
}
BENCHMARK(BM_StaticGraph)->Arg(16)->Arg(32)->Arg(64);

void BM_GnnForward(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  Rng rng(3);
  ParameterStore<float> store;
  register_gnn_params<float>(store, 1, 32, 32, rng);
  CellGraph g = static_graph(n);
  Tensor<float> u(Shape{n, n, 32});
  for (auto& v : u.data) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto _ : state) {
    Tape<float> tape(false);
    benchmark::DoNotOptimize(tape.value(gnn_forward(tape, store, tape.input(u, false), g, 1)));
  }
}
BENCHMARK(BM_GnnForward)->Arg(16)->Arg(32);

void BM_WnetForward(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  WNetConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 16;
  cfg.out_channels = 32;
  Rng rng(5);
  ParameterStore<float> store;
  register_wnet_params(store, cfg, 160, 8, rng);
  for (Parameter<float>* p : store.all())
    for (auto& v : p->value.data) v = static_cast<float>(rng.uniform(-0.2, 0.2));
  Tensor<float> v(Shape{n, n, 160}), k(Shape{n, n, 8});
  for (auto& x : v.data) x = static_cast<float>(rng.uniform(-1, 1));
  for (auto& x : k.data) x = static_cast<float>(rng.uniform(0, 1));
  for (auto _ : state) {
    Tape<float> tape(false);
    benchmark::DoNotOptimize(
        tape.value(wnet_forward(tape, store, cfg, tape.input(v, false), tape.input(k, false))));
  }
}
BENCHMARK(BM_WnetForward)->Arg(16)->Arg(32);

void BM_Decode(benchmark::State& state) {
  int n = static_cast<int>(state.range(0));
  Rng rng(7);
  Sentence proto;
  proto.id = "p";
  proto.tokens = {"a", "b"};
  proto.entities = {{0, 0, "A"}, {1, 1, "B"}};
  proto.relations = {{0, 1, "R"}};
  LabelSpace ls = build_label_space({proto});
  ProbTable<float> pt;
  pt.n = n;
  pt.num_labels = ls.size();
  pt.probs = Tensor<float>(Shape{n, n, ls.size()});
  pt.logits = Tensor<float>(Shape{n, n, ls.size()});
  for (auto& v : pt.probs.data) v = static_cast<float>(rng.uniform(0.01, 1.0));
  for (auto _ : state) benchmark::DoNotOptimize(decode(pt, ls, 0.7));
}
BENCHMARK(BM_Decode)->Arg(16)->Arg(48);

void BM_PredictSentence(benchmark::State& state) {
  auto corpus = bench_corpus(static_cast<int>(state.range(0)));
  Model<float> model = bench_model(corpus, 7);
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.predict_sentence(corpus[i % corpus.size()], 0.7));
    ++i;
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()));
}
BENCHMARK(BM_PredictSentence)->Arg(12)->Arg(24);

void BM_TrainStep(benchmark::State& state) {
  auto corpus = bench_corpus(static_cast<int>(state.range(0)));
  Model<float> model = bench_model(corpus, 7);
  GoldTable gold = gold_table(corpus[0], model.labels, model.symmetric_types);
  for (auto _ : state) {
    model.store.zero_grads();
    Tape<float> tape(false);
    auto f = model.forward(tape, corpus[0], &gold, nullptr, true, 1);
    tape.backward(f.loss_total);
    benchmark::DoNotOptimize(f.report.total);
  }
}
BENCHMARK(BM_TrainStep)->Arg(12)->Arg(24);

}  // namespace

BENCHMARK_MAIN();
