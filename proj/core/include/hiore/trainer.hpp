#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hiore/config.hpp"
#include "hiore/eval.hpp"
#include "hiore/model.hpp"

namespace hiore {

/// AdamW with decoupled weight decay: decay acts on the weights directly,
/// never through the gradient; first/second moments are bias-corrected.
template <typename T>
class AdamW {
 public:
  AdamW(ParameterStore<T>& store, double lr, double weight_decay, double beta1, double beta2,
        double eps);

  /// Applies one update from the currently accumulated gradients.
  void step();
  int64_t steps_taken() const { return t_; }

 private:
  ParameterStore<T>& store_;
  double lr_, wd_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;  // registration order
};

struct EpochRecord {
  int epoch = 0;
  double loss_entry = 0.0;
  double loss_bin = 0.0;
  double loss_total = 0.0;
  PRF dev_entity;
  PRF dev_relation;
  double dev_avg_f1 = 0.0;
  double wall_s = 0.0;
  double sent_per_s = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_avg_f1 = -1.0;
  int64_t optimizer_steps = 0;
};

/// Full optimization loop: batched forward/backward with the configured
/// strategy's loss, one AdamW step per batch, dev evaluation after every
/// epoch. Keeps the checkpoint maximizing the averaged entity/relation F1
/// and restores it into the model before returning. Stops early after
/// `patience` epochs without improvement or once dev F1 is perfect.
/// Throws NumericError with epoch/batch context on divergence.
template <typename T>
TrainResult train(Model<T>& model, const std::vector<Sentence>& train_set,
                  const std::vector<Sentence>& dev_set, const TrainHyper& hyper,
                  const std::function<void(const EpochRecord&)>& on_epoch = nullptr);

/// Dev-set strict scores at a given threshold.
template <typename T>
std::pair<PRF, PRF> evaluate_corpus(Model<T>& model, const std::vector<Sentence>& corpus,
                                    double threshold);

nlohmann::json epoch_record_to_json(const EpochRecord& r, bool include_timing);

// Checkpoint = parameter archive + manifest carrying the model config,
// label space, vocabulary and format version. Round-trips bit-exact for
// the stored dtype.
template <typename T>
void save_checkpoint(const Model<T>& model, const std::string& path);

/// Rejects version, dtype, name, shape and (optional) label-space
/// mismatches.
template <typename T>
Model<T> load_checkpoint(const std::string& path, const LabelSpace* expected_labels = nullptr);

/// Manifest of a checkpoint without materializing a model (dtype dispatch).
nlohmann::json peek_checkpoint_manifest(const std::string& path);

extern template class AdamW<float>;
extern template class AdamW<double>;
extern template TrainResult train<float>(Model<float>&, const std::vector<Sentence>&,
                                         const std::vector<Sentence>&, const TrainHyper&,
                                         const std::function<void(const EpochRecord&)>&);
extern template TrainResult train<double>(Model<double>&, const std::vector<Sentence>&,
                                          const std::vector<Sentence>&, const TrainHyper&,
                                          const std::function<void(const EpochRecord&)>&);
extern template std::pair<PRF, PRF> evaluate_corpus<float>(Model<float>&, const std::vector<Sentence>&,
                                                           double);
extern template std::pair<PRF, PRF> evaluate_corpus<double>(Model<double>&, const std::vector<Sentence>&,
                                                            double);
extern template void save_checkpoint<float>(const Model<float>&, const std::string&);
extern template void save_checkpoint<double>(const Model<double>&, const std::string&);
extern template Model<float> load_checkpoint<float>(const std::string&, const LabelSpace*);
extern template Model<double> load_checkpoint<double>(const std::string&, const LabelSpace*);

}  // namespace hiore
