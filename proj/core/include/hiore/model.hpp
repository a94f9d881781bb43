#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "hiore/corpus.hpp"
#include "hiore/decode.hpp"
#include "hiore/encoder.hpp"
#include "hiore/graph.hpp"
#include "hiore/heads.hpp"
#include "hiore/table.hpp"
#include "hiore/wnet.hpp"

namespace hiore {

/// Full pipeline configuration. The ablation switches mirror the run
/// variants: attention table off, WNet replaced by a cellwise projection,
/// GNN bypassed, dynamic instead of static graph, biaffine input table.
struct ModelConfig {
  EncoderConfig encoder;
  TableConfig table;
  WNetConfig wnet;
  bool use_wnet = true;
  bool use_gnn = true;
  int gnn_layers = 1;
  int gnn_dim = 0;  // 0 means "match u"
  std::string strategy = "static";  // or "dynamic"
  bool teacher_forcing_graph = false;
  bool freeze_encoder = false;
  std::vector<std::string> symmetric_relation_types;

  int u_channels() const { return wnet.out_channels; }
  int g_channels() const { return use_gnn ? (gnn_dim > 0 ? gnn_dim : u_channels()) : u_channels(); }
  void validate() const;
};

template <typename T>
class Model {
 public:
  ModelConfig cfg;
  LabelSpace labels;
  Vocab vocab;
  ParameterStore<T> store;
  std::set<std::string> symmetric_types;

  /// Registers and initializes all parameters. Weights are uniform in
  /// +-sqrt(1/fan_in) from the seeded generator; biases and classifier
  /// heads start at zero.
  static Model build(ModelConfig cfg, LabelSpace labels, Vocab vocab, uint64_t seed);

  struct Forward {
    int n = 0;
    typename Tape<T>::Id u = -1;
    typename Tape<T>::Id flat_label_logits = -1;
    typename Tape<T>::Id loss_entry = -1;
    typename Tape<T>::Id loss_bin = -1;
    typename Tape<T>::Id loss_total = -1;
    LossReport report;
    BinaryPredictionTable bhat;
    CellGraph graph;
  };

  /// Runs the pipeline on one sentence. gold enables the losses; features,
  /// when given, replace the internal encoder (frozen-feature path).
  Forward forward(Tape<T>& tape, const Sentence& s, const GoldTable* gold,
                  const EncoderOutput<T>* features, bool train_mode, uint64_t dropout_seed);

  struct Prediction {
    ProbTable<T> probs;
    BinaryPredictionTable bhat;
    CellGraph graph;
  };

  /// Inference-mode forward; safe to run concurrently on frozen params.
  Prediction predict(const Sentence& s, const EncoderOutput<T>* features = nullptr);

  DecodedResult decode_sentence(const Sentence& s, double threshold,
                                const EncoderOutput<T>* features = nullptr);

  /// Decoded annotations rendered back onto a Sentence record.
  Sentence predict_sentence(const Sentence& s, double threshold,
                            const EncoderOutput<T>* features = nullptr,
                            DecodedResult* detail = nullptr);
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace hiore
