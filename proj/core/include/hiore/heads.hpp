#pragma once

#include <cstdint>
#include <vector>

#include "hiore/corpus.hpp"
#include "hiore/params.hpp"
#include "hiore/tape.hpp"

namespace hiore {

/// Per-cell categorical distribution over the unified label space, kept
/// together with its pre-softmax logits.
template <typename T>
struct ProbTable {
  int n = 0;
  int num_labels = 0;
  Tensor<T> probs;   // [n, n, |Y|]
  Tensor<T> logits;  // [n, n, |Y|]

  double prob(int i, int j, int y) const {
    return static_cast<double>(probs.data[static_cast<size_t>(((i * n) + j) * num_labels + y)]);
  }
};

struct LossReport {
  double entry = 0.0;
  double bin = 0.0;  // stays 0 under the static strategy
  double total = 0.0;
  int64_t cells = 0;  // unmasked cells entering the mean
};

template <typename T>
void register_label_head_params(ParameterStore<T>& store, int g_channels, int num_labels);

/// logits[cell] = W_y G_cell + b; returns the flat [n*n, |Y|] logits node.
template <typename T>
typename Tape<T>::Id label_logits(Tape<T>& tape, ParameterStore<T>& store, typename Tape<T>::Id g);

/// Softmaxes flat logits into a value-level ProbTable.
template <typename T>
ProbTable<T> make_prob_table(Tape<T>& tape, typename Tape<T>::Id flat_logits, int n, int num_labels);

/// Value-space mean NLL over unmasked cells; the training path uses the
/// logit-space cross_entropy op, which must agree with this to 1e-12.
template <typename T>
double loss_entry_probs(const ProbTable<T>& pt, const GoldTable& gold,
                        const std::vector<uint8_t>& mask);

/// Flattens gold labels / binary bits into cross_entropy targets.
std::vector<int32_t> flatten_gold(const GoldTable& g);
std::vector<int32_t> flatten_bits(const BinaryTable& b);

extern template void register_label_head_params<float>(ParameterStore<float>&, int, int);
extern template void register_label_head_params<double>(ParameterStore<double>&, int, int);
extern template Tape<float>::Id label_logits<float>(Tape<float>&, ParameterStore<float>&, Tape<float>::Id);
extern template Tape<double>::Id label_logits<double>(Tape<double>&, ParameterStore<double>&, Tape<double>::Id);
extern template ProbTable<float> make_prob_table<float>(Tape<float>&, Tape<float>::Id, int, int);
extern template ProbTable<double> make_prob_table<double>(Tape<double>&, Tape<double>::Id, int, int);
extern template double loss_entry_probs<float>(const ProbTable<float>&, const GoldTable&,
                                               const std::vector<uint8_t>&);
extern template double loss_entry_probs<double>(const ProbTable<double>&, const GoldTable&,
                                                const std::vector<uint8_t>&);

}  // namespace hiore
