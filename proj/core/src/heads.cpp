#include "hiore/heads.hpp"

#include <cmath>

namespace hiore {

template <typename T>
void register_label_head_params(ParameterStore<T>& store, int g_channels, int num_labels) {
  // Zero-initialized: the untrained head scores every label uniformly,
  // so the initial entry loss is exactly ln|Y|.
  store.create("head.label.w", {static_cast<int64_t>(g_channels), static_cast<int64_t>(num_labels)});
  store.create("head.label.b", {static_cast<int64_t>(num_labels)});
}

template <typename T>
typename Tape<T>::Id label_logits(Tape<T>& tape, ParameterStore<T>& store, typename Tape<T>::Id g) {
  const Tensor<T>& gv = tape.value(g);
  int64_t n = gv.dim(0), ch = gv.dim(2);
  auto flat = tape.reshape(g, {n * n, ch});
  return tape.linear(flat, tape.param(store.get("head.label.w")), tape.param(store.get("head.label.b")));
}

template <typename T>
ProbTable<T> make_prob_table(Tape<T>& tape, typename Tape<T>::Id flat_logits, int n, int num_labels) {
  auto sm = tape.softmax(flat_logits, 1);
  ProbTable<T> pt;
  pt.n = n;
  pt.num_labels = num_labels;
  Shape shape{n, n, num_labels};
  pt.logits = Tensor<T>::from(shape, tape.value(flat_logits).data);
  pt.probs = Tensor<T>::from(shape, tape.value(sm).data);
  return pt;
}

template <typename T>
double loss_entry_probs(const ProbTable<T>& pt, const GoldTable& gold,
                        const std::vector<uint8_t>& mask) {
  if (pt.n != gold.n) throw ShapeError("loss_entry: table size mismatch");
  if (mask.size() != gold.labels.size()) throw ShapeError("loss_entry: mask size mismatch");
  double total = 0.0;
  int64_t count = 0;
  for (size_t c = 0; c < gold.labels.size(); ++c) {
    if (!mask[c]) continue;
    int y = gold.labels[c];
    if (y < 0 || y >= pt.num_labels)
      throw CorpusError("loss_entry: gold label index " + std::to_string(y) + " out of range");
    double p = static_cast<double>(pt.probs.data[c * static_cast<size_t>(pt.num_labels) + static_cast<size_t>(y)]);
    total += -std::log(p);
    ++count;
  }
  if (count == 0) throw ShapeError("loss_entry: empty mask");
  return total / static_cast<double>(count);
}

std::vector<int32_t> flatten_gold(const GoldTable& g) {
  return std::vector<int32_t>(g.labels.begin(), g.labels.end());
}

std::vector<int32_t> flatten_bits(const BinaryTable& b) {
  return std::vector<int32_t>(b.bits.begin(), b.bits.end());
}

template void register_label_head_params<float>(ParameterStore<float>&, int, int);
template void register_label_head_params<double>(ParameterStore<double>&, int, int);
template Tape<float>::Id label_logits<float>(Tape<float>&, ParameterStore<float>&, Tape<float>::Id);
template Tape<double>::Id label_logits<double>(Tape<double>&, ParameterStore<double>&, Tape<double>::Id);
template ProbTable<float> make_prob_table<float>(Tape<float>&, Tape<float>::Id, int, int);
template ProbTable<double> make_prob_table<double>(Tape<double>&, Tape<double>::Id, int, int);
template double loss_entry_probs<float>(const ProbTable<float>&, const GoldTable&,
                                        const std::vector<uint8_t>&);
template double loss_entry_probs<double>(const ProbTable<double>&, const GoldTable&,
                                         const std::vector<uint8_t>&);

}  // namespace hiore
