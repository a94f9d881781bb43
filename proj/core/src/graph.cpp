#include "hiore/graph.hpp"

#include <algorithm>
#include <cmath>

namespace hiore {

namespace {

void add_edge(std::vector<std::pair<int32_t, int32_t>>& edges, int32_t a, int32_t b) {
  if (a == b) return;
  if (a > b) std::swap(a, b);
  edges.emplace_back(a, b);
}

void canonicalize(std::vector<std::pair<int32_t, int32_t>>& edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

}  // namespace

CellGraph static_graph(int n) {
  if (n < 1) throw ShapeError("static_graph: n must be >= 1");
  CellGraph g;
  g.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      add_edge(g.edges, CellGraph::node_id(n, i, i), CellGraph::node_id(n, j, j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      add_edge(g.edges, CellGraph::node_id(n, i, j), CellGraph::node_id(n, i, i));
      add_edge(g.edges, CellGraph::node_id(n, i, j), CellGraph::node_id(n, j, j));
    }
  canonicalize(g.edges);
  return g;
}

CellGraph dynamic_graph(const BinaryPredictionTable& bhat) {
  int n = bhat.n;
  if (n < 1) throw ShapeError("dynamic_graph: empty table");
  CellGraph g;
  g.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || !bhat.at(i, j)) continue;
      add_edge(g.edges, CellGraph::node_id(n, i, j), CellGraph::node_id(n, i, i));
      add_edge(g.edges, CellGraph::node_id(n, i, j), CellGraph::node_id(n, j, j));
    }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (bhat.at(i, i) && bhat.at(j, j))
        add_edge(g.edges, CellGraph::node_id(n, i, i), CellGraph::node_id(n, j, j));
  canonicalize(g.edges);
  return g;
}

SparseCoeffs normalized_adjacency(const CellGraph& g) {
  int64_t nodes = g.node_count();
  std::vector<int64_t> degree(static_cast<size_t>(nodes), 1);  // self-loop
  for (const auto& [a, b] : g.edges) {
    ++degree[static_cast<size_t>(a)];
    ++degree[static_cast<size_t>(b)];
  }
  // CSR assembly: self-loop plus both directions of each undirected edge.
  std::vector<int64_t> counts(static_cast<size_t>(nodes), 1);
  for (const auto& [a, b] : g.edges) {
    ++counts[static_cast<size_t>(a)];
    ++counts[static_cast<size_t>(b)];
  }
  SparseCoeffs sc;
  sc.n = nodes;
  sc.row_ptr.assign(static_cast<size_t>(nodes + 1), 0);
  for (int64_t i = 0; i < nodes; ++i) sc.row_ptr[static_cast<size_t>(i + 1)] = sc.row_ptr[static_cast<size_t>(i)] + counts[static_cast<size_t>(i)];
  sc.col.resize(static_cast<size_t>(sc.row_ptr.back()));
  sc.w.resize(sc.col.size());
  std::vector<int64_t> cursor(sc.row_ptr.begin(), sc.row_ptr.end() - 1);
  auto put = [&](int64_t row, int64_t col) {
    double w = 1.0 / std::sqrt(static_cast<double>(degree[static_cast<size_t>(row)]) *
                               static_cast<double>(degree[static_cast<size_t>(col)]));
    int64_t at = cursor[static_cast<size_t>(row)]++;
    sc.col[static_cast<size_t>(at)] = col;
    sc.w[static_cast<size_t>(at)] = w;
  };
  for (int64_t i = 0; i < nodes; ++i) put(i, i);
  for (const auto& [a, b] : g.edges) {
    put(a, b);
    put(b, a);
  }
  return sc;
}

template <typename T>
void register_binary_head_params(ParameterStore<T>& store, int u_channels) {
  // Classifier heads start at zero: untrained logits tie and the tie rule
  // resolves every bit to 0.
  store.create("head.bin.w", {static_cast<int64_t>(u_channels), 2});
  store.create("head.bin.b", {2});
}

template <typename T>
BinaryHeadNodes<T> predict_binary(Tape<T>& tape, ParameterStore<T>& store, typename Tape<T>::Id u) {
  const Tensor<T>& uv = tape.value(u);
  int n = static_cast<int>(uv.dim(0));
  int64_t ch = uv.dim(2);
  auto flat = tape.reshape(u, {static_cast<int64_t>(n) * n, ch});
  BinaryHeadNodes<T> out;
  out.logits = tape.linear(flat, tape.param(store.get("head.bin.w")), tape.param(store.get("head.bin.b")));
  const Tensor<T>& lv = tape.value(out.logits);
  out.bhat.n = n;
  out.bhat.bits.resize(static_cast<size_t>(n) * static_cast<size_t>(n));
  for (int64_t i = 0; i < static_cast<int64_t>(n) * n; ++i)
    out.bhat.bits[static_cast<size_t>(i)] = lv(i, 1) > lv(i, 0) ? 1 : 0;
  return out;
}

template <typename T>
void register_gnn_params(ParameterStore<T>& store, int layers, int u_channels, int gdim, Rng& rng) {
  if (layers < 1) throw ConfigError("gnn: layers must be >= 1");
  for (int l = 0; l < layers; ++l) {
    int64_t in = l == 0 ? u_channels : gdim;
    init_uniform_fan_in(store.create("gnn.l" + std::to_string(l) + ".w", {in, static_cast<int64_t>(gdim)}),
                        in, rng);
  }
}

template <typename T>
typename Tape<T>::Id gnn_forward(Tape<T>& tape, ParameterStore<T>& store, typename Tape<T>::Id u,
                                 const CellGraph& g, int layers) {
  const Tensor<T>& uv = tape.value(u);
  int64_t n = uv.dim(0);
  if (g.n != static_cast<int>(n)) throw ShapeError("gnn_forward: graph size mismatch");
  if (layers < 1) throw ConfigError("gnn_forward: layers must be >= 1");
  SparseCoeffs ahat = normalized_adjacency(g);
  auto x = tape.reshape(u, {n * n, uv.dim(2)});
  int64_t gdim = 0;
  for (int l = 0; l < layers; ++l) {
    auto& w = store.get("gnn.l" + std::to_string(l) + ".w");
    gdim = w.value.dim(1);
    x = tape.gelu(tape.matmul(tape.spmm(ahat, x), tape.param(w)));
  }
  return tape.reshape(x, {n, n, gdim});
}

template void register_binary_head_params<float>(ParameterStore<float>&, int);
template void register_binary_head_params<double>(ParameterStore<double>&, int);
template BinaryHeadNodes<float> predict_binary<float>(Tape<float>&, ParameterStore<float>&, Tape<float>::Id);
template BinaryHeadNodes<double> predict_binary<double>(Tape<double>&, ParameterStore<double>&,
                                                        Tape<double>::Id);
template void register_gnn_params<float>(ParameterStore<float>&, int, int, int, Rng&);
template void register_gnn_params<double>(ParameterStore<double>&, int, int, int, Rng&);
template Tape<float>::Id gnn_forward<float>(Tape<float>&, ParameterStore<float>&, Tape<float>::Id,
                                            const CellGraph&, int);
template Tape<double>::Id gnn_forward<double>(Tape<double>&, ParameterStore<double>&, Tape<double>::Id,
                                              const CellGraph&, int);

}  // namespace hiore
