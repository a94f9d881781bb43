#include "hiore/trainer.hpp"

#include <chrono>
#include <cmath>

namespace hiore {

template <typename T>
AdamW<T>::AdamW(ParameterStore<T>& store, double lr, double weight_decay, double beta1,
                double beta2, double eps)
    : store_(store), lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Parameter<T>* p : store.all()) {
    m_.emplace_back(p->value.shape);
    v_.emplace_back(p->value.shape);
  }
}

template <typename T>
void AdamW<T>::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto params = store_.all();
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = *params[i];
    if (!p.trainable) continue;
    Tensor<T>& m = m_[i];
    Tensor<T>& v = v_[i];
    for (int64_t j = 0; j < p.value.numel(); ++j) {
      double g = static_cast<double>(p.grad.data[static_cast<size_t>(j)]);
      double mj = beta1_ * static_cast<double>(m.data[static_cast<size_t>(j)]) + (1.0 - beta1_) * g;
      double vj = beta2_ * static_cast<double>(v.data[static_cast<size_t>(j)]) + (1.0 - beta2_) * g * g;
      m.data[static_cast<size_t>(j)] = static_cast<T>(mj);
      v.data[static_cast<size_t>(j)] = static_cast<T>(vj);
      double mhat = mj / bc1;
      double vhat = vj / bc2;
      double w = static_cast<double>(p.value.data[static_cast<size_t>(j)]);
      w -= lr_ * wd_ * w;  // decoupled decay
      w -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      p.value.data[static_cast<size_t>(j)] = static_cast<T>(w);
    }
  }
}

template <typename T>
std::pair<PRF, PRF> evaluate_corpus(Model<T>& model, const std::vector<Sentence>& corpus,
                                    double threshold) {
  std::vector<Sentence> pred;
  pred.reserve(corpus.size());
  for (const Sentence& s : corpus) pred.push_back(model.predict_sentence(s, threshold));
  return {score_entities(pred, corpus), score_relations(pred, corpus)};
}

template <typename T>
TrainResult train(Model<T>& model, const std::vector<Sentence>& train_set,
                  const std::vector<Sentence>& dev_set, const TrainHyper& hyper,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  hyper.validate();
  if (train_set.empty()) throw CorpusError("train: empty training corpus");
  if (dev_set.empty()) throw CorpusError("train: empty dev corpus");

  std::vector<GoldTable> golds;
  golds.reserve(train_set.size());
  for (const Sentence& s : train_set) golds.push_back(gold_table(s, model.labels, model.symmetric_types));

  AdamW<T> opt(model.store, hyper.lr, hyper.weight_decay, hyper.adam_beta1, hyper.adam_beta2,
               hyper.adam_eps);
  Rng shuffle_rng(hyper.seed ^ 0xc2b2ae3d27d4eb4full);

  TrainResult result;
  std::vector<Tensor<T>> best_params;
  int since_best = 0;
  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);
    double sum_entry = 0.0, sum_bin = 0.0, sum_total = 0.0;
    size_t cursor = 0;
    int batch_index = 0;
    while (cursor < order.size()) {
      size_t batch_end = std::min(cursor + static_cast<size_t>(hyper.batch_size), order.size());
      int batch_count = static_cast<int>(batch_end - cursor);
      model.store.zero_grads();
      for (size_t b = cursor; b < batch_end; ++b) {
        size_t idx = order[b];
        uint64_t drop_seed = hyper.seed * 1000003ull +
                             static_cast<uint64_t>(epoch) * 8191ull + static_cast<uint64_t>(idx);
        try {
          Tape<T> tape;
          auto f = model.forward(tape, train_set[idx], &golds[idx], nullptr, true, drop_seed);
          if (!std::isfinite(f.report.total))
            throw NumericError("non-finite loss");
          sum_entry += f.report.entry;
          sum_bin += f.report.bin;
          sum_total += f.report.total;
          tape.backward(f.loss_total);
        } catch (const NumericError& e) {
          throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index) + ", sentence '" + train_set[idx].id +
                             "': " + e.what());
        }
      }
      if (batch_count > 1) {
        T inv = static_cast<T>(1.0 / batch_count);
        for (Parameter<T>* p : model.store.all())
          if (p->trainable)
            for (auto& g : p->grad.data) g *= inv;
      }
      opt.step();
      cursor = batch_end;
      ++batch_index;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_entry = sum_entry / static_cast<double>(train_set.size());
    rec.loss_bin = sum_bin / static_cast<double>(train_set.size());
    rec.loss_total = sum_total / static_cast<double>(train_set.size());
    std::pair<PRF, PRF> scores;
    try {
      scores = evaluate_corpus(model, dev_set, hyper.decode_threshold);
    } catch (const NumericError& e) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                         " during dev evaluation: " + e.what());
    }
    rec.dev_entity = scores.first;
    rec.dev_relation = scores.second;
    rec.dev_avg_f1 = 0.5 * (rec.dev_entity.f1 + rec.dev_relation.f1);
    auto t1 = std::chrono::steady_clock::now();
    rec.wall_s = std::chrono::duration<double>(t1 - t0).count();
    rec.sent_per_s = rec.wall_s > 0 ? static_cast<double>(train_set.size()) / rec.wall_s : 0.0;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.dev_avg_f1 > result.best_avg_f1) {
      result.best_avg_f1 = rec.dev_avg_f1;
      result.best_epoch = epoch;
      best_params.clear();
      for (Parameter<T>* p : model.store.all()) best_params.push_back(p->value);
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= hyper.patience) break;
    if (result.best_avg_f1 >= 1.0) break;  // cannot improve further
  }

  if (!best_params.empty()) {
    auto params = model.store.all();
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_params[i];
  }
  result.optimizer_steps = opt.steps_taken();
  return result;
}

nlohmann::json epoch_record_to_json(const EpochRecord& r, bool include_timing) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["loss_entry"] = r.loss_entry;
  j["loss_bin"] = r.loss_bin;
  j["loss_total"] = r.loss_total;
  j["dev_entity_f1"] = r.dev_entity.f1;
  j["dev_entity_p"] = r.dev_entity.precision;
  j["dev_entity_r"] = r.dev_entity.recall;
  j["dev_relation_f1"] = r.dev_relation.f1;
  j["dev_relation_p"] = r.dev_relation.precision;
  j["dev_relation_r"] = r.dev_relation.recall;
  j["dev_avg_f1"] = r.dev_avg_f1;
  if (include_timing) {
    j["wall_s"] = r.wall_s;
    j["sent_per_s"] = r.sent_per_s;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {
constexpr int kCheckpointVersion = 1;
}

template <typename T>
void save_checkpoint(const Model<T>& model, const std::string& path) {
  Archive a;
  nlohmann::json m;
  m["format_version"] = kCheckpointVersion;
  m["dtype"] = dtype_name<T>();
  m["kind"] = "checkpoint";
  m["names"] = model.store.names();
  m["label_space"] = {{"entity_types", model.labels.entity_types},
                      {"relation_types", model.labels.relation_types}};
  m["vocab"] = model.vocab.tokens;
  m["model"] = model_config_to_json(model.cfg);
  a.manifest_json = m.dump();
  for (const Parameter<T>* p : model.store.all()) {
    ArchiveEntry e;
    e.name = p->name;
    e.shape = p->value.shape;
    e.data.assign(p->value.data.begin(), p->value.data.end());
    a.entries.push_back(std::move(e));
  }
  save_archive(a, path);
}

nlohmann::json peek_checkpoint_manifest(const std::string& path) {
  Archive a = load_archive(path);
  return nlohmann::json::parse(a.manifest_json);
}

template <typename T>
Model<T> load_checkpoint(const std::string& path, const LabelSpace* expected_labels) {
  Archive a = load_archive(path);
  nlohmann::json m = nlohmann::json::parse(a.manifest_json);
  if (m.value("format_version", -1) != kCheckpointVersion)
    throw IoError("checkpoint: unsupported format version");
  if (m.value("dtype", "") != dtype_name<T>())
    throw IoError("checkpoint: dtype is " + m.value("dtype", "?") + ", expected " + dtype_name<T>());
  if (!m.contains("label_space") || !m.contains("vocab") || !m.contains("model") || !m.contains("names"))
    throw IoError("checkpoint: incomplete manifest");
  LabelSpace ls;
  m["label_space"]["entity_types"].get_to(ls.entity_types);
  m["label_space"]["relation_types"].get_to(ls.relation_types);
  if (expected_labels && !(*expected_labels == ls))
    throw IoError("checkpoint: label space does not match the expected one");
  std::vector<std::string> toks;
  m["vocab"].get_to(toks);
  ModelConfig cfg = model_config_from_json(m["model"]);
  Model<T> model = Model<T>::build(cfg, ls, Vocab::from_tokens(std::move(toks)), 0);
  std::vector<std::string> names;
  m["names"].get_to(names);
  if (names != model.store.names())
    throw IoError("checkpoint: parameter name list does not match the configured model");
  if (a.entries.size() != names.size()) throw IoError("checkpoint: entry count mismatch");
  for (size_t i = 0; i < a.entries.size(); ++i) {
    const ArchiveEntry& e = a.entries[i];
    if (e.name != names[i]) throw IoError("checkpoint: entry order mismatch at " + e.name);
    Parameter<T>& p = model.store.get(e.name);
    if (e.shape != p.value.shape)
      throw IoError("checkpoint: shape mismatch for " + e.name + ": file " + shape_str(e.shape) +
                    " vs model " + shape_str(p.value.shape));
    for (size_t k = 0; k < e.data.size(); ++k) p.value.data[k] = static_cast<T>(e.data[k]);
  }
  return model;
}

template class AdamW<float>;
template class AdamW<double>;
template TrainResult train<float>(Model<float>&, const std::vector<Sentence>&,
                                  const std::vector<Sentence>&, const TrainHyper&,
                                  const std::function<void(const EpochRecord&)>&);
template TrainResult train<double>(Model<double>&, const std::vector<Sentence>&,
                                   const std::vector<Sentence>&, const TrainHyper&,
                                   const std::function<void(const EpochRecord&)>&);
template std::pair<PRF, PRF> evaluate_corpus<float>(Model<float>&, const std::vector<Sentence>&, double);
template std::pair<PRF, PRF> evaluate_corpus<double>(Model<double>&, const std::vector<Sentence>&, double);
template void save_checkpoint<float>(const Model<float>&, const std::string&);
template void save_checkpoint<double>(const Model<double>&, const std::string&);
template Model<float> load_checkpoint<float>(const std::string&, const LabelSpace*);
template Model<double> load_checkpoint<double>(const std::string&, const LabelSpace*);

}  // namespace hiore
