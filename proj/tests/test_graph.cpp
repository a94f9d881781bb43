#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "helpers.hpp"

#include <set>

#include "hiore/graph.hpp"

using namespace hiore;
using hiore::test::fill_random;

namespace {

using Edge = std::pair<int32_t, int32_t>;

/// Brute-force enumeration of the two static-graph rules, written directly
/// from their definitions: (a) diagonal cells pairwise; (b) every
/// off-diagonal cell to its two diagonal cells.
std::set<Edge> static_rules(int n) {
  auto id = [n](int i, int j) { return static_cast<int32_t>(i * n + j); };
  std::set<Edge> out;
  auto ins = [&](int32_t a, int32_t b) {
    if (a != b) out.insert({std::min(a, b), std::max(a, b)});
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) ins(id(i, i), id(j, j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) {
        ins(id(i, j), id(i, i));
        ins(id(i, j), id(j, j));
      }
  return out;
}

std::set<Edge> dynamic_rules(const BinaryPredictionTable& b) {
  int n = b.n;
  auto id = [n](int i, int j) { return static_cast<int32_t>(i * n + j); };
  std::set<Edge> out;
  auto ins = [&](int32_t a, int32_t c) { out.insert({std::min(a, c), std::max(a, c)}); };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && b.at(i, j)) {
        ins(id(i, j), id(i, i));
        ins(id(i, j), id(j, j));
      }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && b.at(i, i) && b.at(j, j)) ins(id(i, i), id(j, j));
  return out;
}

std::set<Edge> as_set(const CellGraph& g) { return {g.edges.begin(), g.edges.end()}; }

BinaryPredictionTable random_bits(int n, Rng& rng, double p) {
  BinaryPredictionTable b;
  b.n = n;
  b.bits.resize(static_cast<size_t>(n) * static_cast<size_t>(n));
  for (auto& v : b.bits) v = rng.bernoulli(p) ? 1 : 0;
  return b;
}

/// Dense reference: G = gelu(D^{-1/2}(A+I)D^{-1/2} X W) with explicit
/// matrices, no sparsity.
Tensor<double> dense_gnn_layer(const CellGraph& g, const Tensor<double>& x,
                               const Tensor<double>& w) {
  int64_t nodes = g.node_count();
  std::vector<std::vector<double>> a(static_cast<size_t>(nodes),
                                     std::vector<double>(static_cast<size_t>(nodes), 0.0));
  for (int64_t i = 0; i < nodes; ++i) a[static_cast<size_t>(i)][static_cast<size_t>(i)] = 1.0;
  for (const auto& [p, q] : g.edges) {
    a[static_cast<size_t>(p)][static_cast<size_t>(q)] = 1.0;
    a[static_cast<size_t>(q)][static_cast<size_t>(p)] = 1.0;
  }
  std::vector<double> dinv(static_cast<size_t>(nodes));
  for (int64_t i = 0; i < nodes; ++i) {
    double deg = 0;
    for (int64_t j = 0; j < nodes; ++j) deg += a[static_cast<size_t>(i)][static_cast<size_t>(j)];
    dinv[static_cast<size_t>(i)] = 1.0 / std::sqrt(deg);
  }
  int64_t cin = x.dim(1), cout = w.dim(1);
  Tensor<double> ax(Shape{nodes, cin});
  for (int64_t i = 0; i < nodes; ++i)
    for (int64_t j = 0; j < nodes; ++j) {
      double coeff = dinv[static_cast<size_t>(i)] * a[static_cast<size_t>(i)][static_cast<size_t>(j)] *
                     dinv[static_cast<size_t>(j)];
      if (coeff == 0.0) continue;
      for (int64_t c = 0; c < cin; ++c) ax(i, c) += coeff * x(j, c);
    }
  Tensor<double> out(Shape{nodes, cout});
  for (int64_t i = 0; i < nodes; ++i)
    for (int64_t k = 0; k < cin; ++k)
      for (int64_t c = 0; c < cout; ++c) out(i, c) += ax(i, k) * w(k, c);
  for (auto& v : out.data) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  return out;
}

}  // namespace

TEST_CASE("static graph edge counts: n=1 empty, n=3 has 15, closed form holds") {
  CHECK(static_graph(1).edges.empty());
  CHECK(static_graph(3).edges.size() == 15);
  for (int n = 2; n <= 20; ++n) {
    CellGraph g = static_graph(n);
    CHECK(static_cast<int64_t>(g.edges.size()) == 5LL * n * (n - 1) / 2);
    CHECK(as_set(g) == static_rules(n));
  }
}

TEST_CASE("edges are canonical, sorted, deduplicated") {
  CellGraph g = static_graph(6);
  for (size_t i = 0; i < g.edges.size(); ++i) {
    CHECK(g.edges[i].first < g.edges[i].second);
    CHECK(g.edges[i].second < g.node_count());
    if (i > 0) CHECK(g.edges[i - 1] < g.edges[i]);
  }
}

TEST_CASE("dynamic graph: all-zero bits give no edges, all-one bits give the static graph") {
  BinaryPredictionTable zero;
  zero.n = 5;
  zero.bits.assign(25, 0);
  CHECK(dynamic_graph(zero).edges.empty());
  BinaryPredictionTable one;
  one.n = 5;
  one.bits.assign(25, 1);
  CHECK(as_set(dynamic_graph(one)) == as_set(static_graph(5)));
}

TEST_CASE("dynamic graph obeys the two rules and stays inside the static graph") {
  Rng rng(71);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = static_cast<int>(rng.uniform_int(1, 10));
    BinaryPredictionTable b = random_bits(n, rng, rng.uniform(0.1, 0.9));
    CellGraph d = dynamic_graph(b);
    CHECK(as_set(d) == dynamic_rules(b));
    std::set<Edge> stat = static_rules(n);
    for (const Edge& e : d.edges) CHECK(stat.count(e) == 1);
  }
}

TEST_CASE("dynamic graph is monotone under bit flips 0 -> 1") {
  Rng rng(72);
  for (int trial = 0; trial < 50; ++trial) {
    int n = static_cast<int>(rng.uniform_int(2, 8));
    BinaryPredictionTable b = random_bits(n, rng, 0.4);
    std::set<Edge> before = as_set(dynamic_graph(b));
    BinaryPredictionTable flipped = b;
    int64_t at = rng.uniform_int(0, n * n - 1);
    flipped.bits[static_cast<size_t>(at)] = 1;
    std::set<Edge> after = as_set(dynamic_graph(flipped));
    for (const Edge& e : before) CHECK(after.count(e) == 1);
  }
}

TEST_CASE("predict_binary: ties resolve to 0, strong logits to 1, argmax matches oracle") {
  ParameterStore<double> store;
  register_binary_head_params<double>(store, 4);
  // zero-initialized head ties every cell -> all zero bits
  Tape<double> tape;
  Tensor<double> u(Shape{3, 3, 4});
  Rng rng(73);
  fill_random(u, rng);
  auto bin = predict_binary(tape, store, tape.input(u, false));
  for (uint8_t b : bin.bhat.bits) CHECK(b == 0);

  // bias strongly favoring class 1
  store.get("head.bin.b").value.data[1] = 50.0;
  Tape<double> tape2;
  auto bin2 = predict_binary(tape2, store, tape2.input(u, false));
  for (uint8_t b : bin2.bhat.bits) CHECK(b == 1);

  // random head: recompute the per-cell argmax independently
  fill_random(store.get("head.bin.w").value, rng);
  fill_random(store.get("head.bin.b").value, rng);
  Tape<double> tape3;
  auto bin3 = predict_binary(tape3, store, tape3.input(u, false));
  const Tensor<double>& w = store.get("head.bin.w").value;
  const Tensor<double>& bb = store.get("head.bin.b").value;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double l0 = bb.data[0], l1 = bb.data[1];
      for (int64_t c = 0; c < 4; ++c) {
        l0 += u(i, j, c) * w(c, 0);
        l1 += u(i, j, c) * w(c, 1);
      }
      CHECK(bin3.bhat.at(i, j) == (l1 > l0 ? 1 : 0));
    }
}

TEST_CASE("gnn on an empty edge set reduces to a per-node transform") {
  ParameterStore<double> store;
  Rng rng(74);
  register_gnn_params<double>(store, 1, 3, 5, rng);
  CellGraph g;
  g.n = 2;  // no edges
  Tensor<double> u(Shape{2, 2, 3});
  fill_random(u, rng);
  Tape<double> tape;
  auto out = tape.value(gnn_forward(tape, store, tape.input(u, false), g, 1));
  const Tensor<double>& w = store.get("gnn.l0.w").value;
  for (int64_t node = 0; node < 4; ++node)
    for (int64_t c = 0; c < 5; ++c) {
      double acc = 0;  // self-loop with degree 1 passes the feature through
      for (int64_t k = 0; k < 3; ++k) acc += u.data[static_cast<size_t>(node * 3 + k)] * w(k, c);
      double want = 0.5 * acc * (1.0 + std::erf(acc / std::sqrt(2.0)));
      CHECK(out.data[static_cast<size_t>(node * 5 + c)] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("gnn matches the dense normalized-adjacency reference") {
  Rng rng(75);
  for (int n = 1; n <= 6; ++n) {
    ParameterStore<double> store;
    register_gnn_params<double>(store, 1, 4, 4, rng);
    CellGraph g = static_graph(n);
    Tensor<double> u(Shape{n, n, 4});
    fill_random(u, rng);
    Tape<double> tape;
    auto sparse = tape.value(gnn_forward(tape, store, tape.input(u, false), g, 1));
    Tensor<double> flat = Tensor<double>::from({static_cast<int64_t>(n) * n, 4}, u.data);
    Tensor<double> dense = dense_gnn_layer(g, flat, store.get("gnn.l0.w").value);
    for (int64_t i = 0; i < dense.numel(); ++i)
      CHECK(std::abs(sparse.data[static_cast<size_t>(i)] - dense.data[static_cast<size_t>(i)]) <= 1e-10);
  }
}

TEST_CASE("gnn is equivariant under node relabeling") {
  // Relabeling (i,j) -> (p(i), p(j)) for a token permutation p maps the
  // static graph onto itself, so permuting U must permute G identically.
  int n = 4;
  Rng rng(76);
  ParameterStore<double> store;
  register_gnn_params<double>(store, 1, 3, 3, rng);
  CellGraph g = static_graph(n);
  Tensor<double> u(Shape{n, n, 3});
  fill_random(u, rng);
  std::vector<int> perm = {2, 0, 3, 1};
  Tensor<double> pu(Shape{n, n, 3});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int64_t c = 0; c < 3; ++c)
        pu(i, j, c) = u(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)], c);
  Tape<double> t1, t2;
  auto out = t1.value(gnn_forward(t1, store, t1.input(u, false), g, 1));
  auto pout = t2.value(gnn_forward(t2, store, t2.input(pu, false), g, 1));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int64_t c = 0; c < 3; ++c)
        CHECK(pout(i, j, c) ==
              doctest::Approx(out(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)], c))
                  .epsilon(1e-12));
}

TEST_CASE("multi-layer gnn runs and changes the representation") {
  Rng rng(77);
  ParameterStore<double> store;
  register_gnn_params<double>(store, 3, 4, 4, rng);
  CellGraph g = static_graph(3);
  Tensor<double> u(Shape{3, 3, 4});
  fill_random(u, rng);
  Tape<double> tape;
  auto out = tape.value(gnn_forward(tape, store, tape.input(u, false), g, 3));
  CHECK(out.shape == Shape{3, 3, 4});
  CHECK_THROWS_AS(([&] {
                    Tape<double> t;
                    gnn_forward(t, store, t.input(u, false), g, 0);
                  }()),
                  ConfigError);
}
