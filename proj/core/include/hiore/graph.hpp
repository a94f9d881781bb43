#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hiore/corpus.hpp"
#include "hiore/params.hpp"
#include "hiore/tape.hpp"

namespace hiore {

/// Predicted non-null bits over the table; same layout as the gold bits.
using BinaryPredictionTable = BinaryTable;

/// Undirected graph over the n^2 table cells. Node (i,j) has id i*n+j.
/// Edges are stored once as canonical (low id, high id) pairs, sorted,
/// with no self-loops.
struct CellGraph {
  int n = 0;
  std::vector<std::pair<int32_t, int32_t>> edges;

  static int32_t node_id(int n, int i, int j) { return static_cast<int32_t>(i * n + j); }
  int64_t node_count() const { return static_cast<int64_t>(n) * n; }
};

/// Diagonal clique plus anchors from every off-diagonal cell to its two
/// diagonal cells: |E| = 5n(n-1)/2.
CellGraph static_graph(int n);

/// Edges licensed by the predicted bits: off-diagonal 1-cells anchor to
/// their diagonal cells; diagonal 1-cells pairwise connect. Always a
/// subset of static_graph(n).
CellGraph dynamic_graph(const BinaryPredictionTable& bhat);

/// Symmetric normalization with self-loops: D^{-1/2} (A + I) D^{-1/2}.
SparseCoeffs normalized_adjacency(const CellGraph& g);

template <typename T>
struct BinaryHeadNodes {
  typename Tape<T>::Id logits = -1;  // [n*n, 2]
  BinaryPredictionTable bhat;        // argmax per cell, ties toward 0
};

template <typename T>
void register_binary_head_params(ParameterStore<T>& store, int u_channels);

/// p(b_ij | s) = softmax(W_bin U_ij); bhat by per-cell argmax.
template <typename T>
BinaryHeadNodes<T> predict_binary(Tape<T>& tape, ParameterStore<T>& store, typename Tape<T>::Id u);

template <typename T>
void register_gnn_params(ParameterStore<T>& store, int layers, int u_channels, int gdim, Rng& rng);

/// Per layer: X <- gelu(Ahat X W), sparse gather-scatter message passing.
/// Output reshaped back to [n,n,gdim].
template <typename T>
typename Tape<T>::Id gnn_forward(Tape<T>& tape, ParameterStore<T>& store, typename Tape<T>::Id u,
                                 const CellGraph& g, int layers);

extern template void register_binary_head_params<float>(ParameterStore<float>&, int);
extern template void register_binary_head_params<double>(ParameterStore<double>&, int);
extern template BinaryHeadNodes<float> predict_binary<float>(Tape<float>&, ParameterStore<float>&,
                                                             Tape<float>::Id);
extern template BinaryHeadNodes<double> predict_binary<double>(Tape<double>&, ParameterStore<double>&,
                                                               Tape<double>::Id);
extern template void register_gnn_params<float>(ParameterStore<float>&, int, int, int, Rng&);
extern template void register_gnn_params<double>(ParameterStore<double>&, int, int, int, Rng&);
extern template Tape<float>::Id gnn_forward<float>(Tape<float>&, ParameterStore<float>&, Tape<float>::Id,
                                                   const CellGraph&, int);
extern template Tape<double>::Id gnn_forward<double>(Tape<double>&, ParameterStore<double>&, Tape<double>::Id,
                                                     const CellGraph&, int);

}  // namespace hiore
