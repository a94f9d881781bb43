#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hiore/params.hpp"
#include "hiore/tape.hpp"

namespace hiore {

/// W-shaped convolutional network: two encoders (over V and K) feeding one
/// shared decoder with skip connections from both. Channel schedule doubles
/// per downsampling level; the bottleneck doubles once more.
struct WNetConfig {
  int depth = 2;           // downsampling levels
  int base_channels = 32;  // level-0 width per encoder
  int out_channels = 64;   // u
  bool use_attention_input = true;
  bool single_unet = false;  // concat V and K, run one encoder

  void validate() const;
  int level_channels(int level) const { return base_channels << level; }
  int bottleneck_channels() const { return base_channels << depth; }
};

/// Table padded bottom/right to the next multiple of 2^depth; the mask
/// marks the original n x n region. Loss and decoding ignore padded cells.
struct PaddedTable {
  int64_t n = 0;
  int64_t padded = 0;

  std::vector<uint8_t> mask() const {
    std::vector<uint8_t> m(static_cast<size_t>(padded * padded), 0);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j) m[static_cast<size_t>(i * padded + j)] = 1;
    return m;
  }
};

PaddedTable pad_for_depth(int64_t n, int depth);

/// Upper bound on the Chebyshev radius a single input cell can influence,
/// walking the conv/pool/upsample schedule of the configured depth.
int64_t receptive_radius_bound(const WNetConfig& cfg);

template <typename T>
void register_wnet_params(ParameterStore<T>& store, const WNetConfig& cfg, int v_channels,
                          int k_channels, Rng& rng);

/// V [n,n,v] and optionally K [n,n,k] -> U [n,n,u]. K must be < 0 exactly
/// when the configuration runs without the attention table.
template <typename T>
typename Tape<T>::Id wnet_forward(Tape<T>& tape, ParameterStore<T>& store, const WNetConfig& cfg,
                                  typename Tape<T>::Id v, typename Tape<T>::Id k);

extern template void register_wnet_params<float>(ParameterStore<float>&, const WNetConfig&, int, int, Rng&);
extern template void register_wnet_params<double>(ParameterStore<double>&, const WNetConfig&, int, int, Rng&);
extern template Tape<float>::Id wnet_forward<float>(Tape<float>&, ParameterStore<float>&, const WNetConfig&,
                                                    Tape<float>::Id, Tape<float>::Id);
extern template Tape<double>::Id wnet_forward<double>(Tape<double>&, ParameterStore<double>&, const WNetConfig&,
                                                      Tape<double>::Id, Tape<double>::Id);

}  // namespace hiore
