#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hiore/params.hpp"
#include "hiore/tape.hpp"
#include "hiore/tensor.hpp"

namespace hiore {

/// Desk-scale trainable stand-in for a pretrained encoder: token/position
/// embeddings plus pre-norm self-attention blocks. Every head's post-softmax
/// attention matrix is exposed as one channel of the attention table.
struct EncoderConfig {
  int32_t vocab_size = 0;  // filled in from the corpus vocab
  int model_dim = 128;
  int layers = 2;
  int heads = 4;
  int ffn_dim = 256;
  int max_len = 64;
  double dropout = 0.0;
  int mlp_dim = 150;  // head/tail MLP output width

  int attention_channels() const { return layers * heads; }
  void validate() const;
};

/// Per-word states plus the stacked per-head attention channels
/// (layer-major ordering: channel = layer * heads + head).
template <typename T>
struct EncoderOutput {
  Tensor<T> states;     // [n, model_dim]
  Tensor<T> attention;  // [n, n, layers*heads], empty when absent
  std::string sentence_id;

  bool has_attention() const { return attention.numel() > 0; }
};

/// Tape-level handles for a single encoded sentence.
template <typename T>
struct EncoderNodes {
  typename Tape<T>::Id states = -1;
  std::vector<typename Tape<T>::Id> attention;  // one [n,n] node per channel
};

template <typename T>
struct HeadTailNodes {
  typename Tape<T>::Id head = -1;  // [n, mlp_dim]
  typename Tape<T>::Id tail = -1;
};

/// Registers embeddings, attention blocks and the head/tail MLPs under
/// "encoder." / "headmlp." / "tailmlp.".
template <typename T>
void register_encoder_params(ParameterStore<T>& store, const EncoderConfig& cfg, Rng& rng);

/// Runs the encoder over token ids. Dropout fires only when train_mode.
template <typename T>
EncoderNodes<T> encode_on_tape(Tape<T>& tape, ParameterStore<T>& store, const EncoderConfig& cfg,
                               const std::vector<int32_t>& token_ids, bool train_mode,
                               uint64_t dropout_seed);

/// Convenience value-level wrapper (inference mode).
template <typename T>
EncoderOutput<T> encode(ParameterStore<T>& store, const EncoderConfig& cfg,
                        const std::vector<int32_t>& token_ids);

/// Two independent single-hidden-layer MLPs (GELU) applied rowwise.
template <typename T>
HeadTailNodes<T> head_tail_on_tape(Tape<T>& tape, ParameterStore<T>& store,
                                   const EncoderConfig& cfg, typename Tape<T>::Id states);

// Precomputed-feature export: same archive container as checkpoints, with
// entries "states" [n,m] and optionally "attention" [n,n,k], plus the
// sentence id in the manifest.
template <typename T>
void export_features(const EncoderOutput<T>& eo, const std::string& path);

template <typename T>
EncoderOutput<T> load_precomputed(const std::string& path);

/// Shape checks against the configured encoder; attention may be absent
/// only when attention input is unused downstream.
template <typename T>
void check_features(const EncoderOutput<T>& eo, const EncoderConfig& cfg, bool need_attention);

extern template void register_encoder_params<float>(ParameterStore<float>&, const EncoderConfig&, Rng&);
extern template void register_encoder_params<double>(ParameterStore<double>&, const EncoderConfig&, Rng&);
extern template EncoderNodes<float> encode_on_tape<float>(Tape<float>&, ParameterStore<float>&,
                                                          const EncoderConfig&, const std::vector<int32_t>&,
                                                          bool, uint64_t);
extern template EncoderNodes<double> encode_on_tape<double>(Tape<double>&, ParameterStore<double>&,
                                                            const EncoderConfig&, const std::vector<int32_t>&,
                                                            bool, uint64_t);
extern template EncoderOutput<float> encode<float>(ParameterStore<float>&, const EncoderConfig&,
                                                   const std::vector<int32_t>&);
extern template EncoderOutput<double> encode<double>(ParameterStore<double>&, const EncoderConfig&,
                                                     const std::vector<int32_t>&);
extern template HeadTailNodes<float> head_tail_on_tape<float>(Tape<float>&, ParameterStore<float>&,
                                                              const EncoderConfig&, Tape<float>::Id);
extern template HeadTailNodes<double> head_tail_on_tape<double>(Tape<double>&, ParameterStore<double>&,
                                                                const EncoderConfig&, Tape<double>::Id);
extern template void export_features<float>(const EncoderOutput<float>&, const std::string&);
extern template void export_features<double>(const EncoderOutput<double>&, const std::string&);
extern template EncoderOutput<float> load_precomputed<float>(const std::string&);
extern template EncoderOutput<double> load_precomputed<double>(const std::string&);
extern template void check_features<float>(const EncoderOutput<float>&, const EncoderConfig&, bool);
extern template void check_features<double>(const EncoderOutput<double>&, const EncoderConfig&, bool);

}  // namespace hiore
