#pragma once

#include <string>
#include <vector>

#include "hiore/encoder.hpp"
#include "hiore/params.hpp"
#include "hiore/tape.hpp"

namespace hiore {

/// Input-table settings. The vanilla cell width is 4*mlp_dim + dist_dim;
/// the biaffine variant replaces that construction with a bilinear score
/// vector of width biaffine_dim per cell.
struct TableConfig {
  int dist_dim = 150;
  int dist_clamp = 64;
  std::string mode = "concat-v";  // or "biaffine"
  int biaffine_dim = 64;

  void validate() const;
  int v_channels(int mlp_dim) const {
    return mode == "biaffine" ? biaffine_dim : 4 * mlp_dim + dist_dim;
  }
};

template <typename T>
void register_table_params(ParameterStore<T>& store, const TableConfig& cfg, int mlp_dim, Rng& rng);

/// Cell (i,j) = [head_i; tail_j; head_i - tail_j; head_i * tail_j;
/// dist(min(|i-j|, clamp))] in concat-v mode, or the biaffine score vector.
template <typename T>
typename Tape<T>::Id build_v(Tape<T>& tape, ParameterStore<T>& store, const TableConfig& cfg,
                             const HeadTailNodes<T>& ht);

/// Stacks per-head attention matrices into [n,n,k] (layer-major channels).
template <typename T>
typename Tape<T>::Id build_k(Tape<T>& tape, const std::vector<typename Tape<T>::Id>& channels);

extern template void register_table_params<float>(ParameterStore<float>&, const TableConfig&, int, Rng&);
extern template void register_table_params<double>(ParameterStore<double>&, const TableConfig&, int, Rng&);
extern template Tape<float>::Id build_v<float>(Tape<float>&, ParameterStore<float>&, const TableConfig&,
                                               const HeadTailNodes<float>&);
extern template Tape<double>::Id build_v<double>(Tape<double>&, ParameterStore<double>&, const TableConfig&,
                                                 const HeadTailNodes<double>&);
extern template Tape<float>::Id build_k<float>(Tape<float>&, const std::vector<Tape<float>::Id>&);
extern template Tape<double>::Id build_k<double>(Tape<double>&, const std::vector<Tape<double>::Id>&);

}  // namespace hiore
