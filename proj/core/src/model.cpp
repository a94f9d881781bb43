#include "hiore/model.hpp"

namespace hiore {

void ModelConfig::validate() const {
  encoder.validate();
  table.validate();
  wnet.validate();
  if (gnn_layers < 1) throw ConfigError("model: gnn_layers must be >= 1");
  if (strategy != "static" && strategy != "dynamic")
    throw ConfigError("model: strategy must be 'static' or 'dynamic', got '" + strategy + "'");
  if (!use_wnet && wnet.single_unet) throw ConfigError("model: single_unet requires the WNet");
}

template <typename T>
Model<T> Model<T>::build(ModelConfig cfg, LabelSpace labels, Vocab vocab, uint64_t seed) {
  cfg.encoder.vocab_size = vocab.size();
  cfg.validate();
  Model<T> m;
  m.cfg = cfg;
  m.labels = std::move(labels);
  m.vocab = std::move(vocab);
  m.symmetric_types.insert(cfg.symmetric_relation_types.begin(),
                           cfg.symmetric_relation_types.end());
  for (const std::string& t : m.symmetric_types)
    m.labels.relation_index(t);  // must name a known relation type

  Rng rng(seed ^ 0x5851f42d4c957f2dull);
  register_encoder_params(m.store, cfg.encoder, rng);
  register_table_params(m.store, cfg.table, cfg.encoder.mlp_dim, rng);
  int v_ch = cfg.table.v_channels(cfg.encoder.mlp_dim);
  int k_ch = cfg.encoder.attention_channels();
  if (cfg.use_wnet) {
    register_wnet_params(m.store, cfg.wnet, v_ch, k_ch, rng);
  } else {
    // cellwise linear projection keeps downstream shapes intact
    init_uniform_fan_in(m.store.create("proj.w", {v_ch, cfg.wnet.out_channels}), v_ch, rng);
    m.store.create("proj.b", {cfg.wnet.out_channels});
  }
  if (cfg.use_gnn) register_gnn_params(m.store, cfg.gnn_layers, cfg.u_channels(), cfg.g_channels(), rng);
  register_binary_head_params<T>(m.store, cfg.u_channels());
  register_label_head_params<T>(m.store, cfg.g_channels(), m.labels.size());
  if (cfg.freeze_encoder) {
    for (Parameter<T>* p : m.store.all())
      if (p->name.rfind("encoder.", 0) == 0) p->trainable = false;
  }
  return m;
}

template <typename T>
typename Model<T>::Forward Model<T>::forward(Tape<T>& tape, const Sentence& s, const GoldTable* gold,
                                             const EncoderOutput<T>* features, bool train_mode,
                                             uint64_t dropout_seed) {
  using Id = typename Tape<T>::Id;
  Forward out;
  out.n = s.n();
  bool need_k = cfg.use_wnet && cfg.wnet.use_attention_input;

  Id states;
  Id k_table = -1;
  if (features) {
    check_features(*features, cfg.encoder, need_k);
    if (features->states.dim(0) != out.n)
      throw ShapeError("forward: feature length does not match sentence length");
    states = tape.input(features->states, false);
    if (need_k) k_table = tape.input(features->attention, false);
  } else {
    EncoderNodes<T> enc =
        encode_on_tape(tape, store, cfg.encoder, vocab.encode(s), train_mode, dropout_seed);
    states = enc.states;
    if (need_k) k_table = build_k(tape, enc.attention);
  }

  HeadTailNodes<T> ht = head_tail_on_tape(tape, store, cfg.encoder, states);
  Id v = build_v(tape, store, cfg.table, ht);

  Id u;
  if (cfg.use_wnet) {
    u = wnet_forward(tape, store, cfg.wnet, v, k_table);
  } else {
    const Tensor<T>& vv = tape.value(v);
    Id flat = tape.reshape(v, {vv.dim(0) * vv.dim(1), vv.dim(2)});
    Id proj = tape.linear(flat, tape.param(store.get("proj.w")), tape.param(store.get("proj.b")));
    u = tape.reshape(proj, {vv.dim(0), vv.dim(1), static_cast<int64_t>(cfg.wnet.out_channels)});
  }
  out.u = u;

  BinaryHeadNodes<T> bin = predict_binary(tape, store, u);
  out.bhat = bin.bhat;

  if (cfg.strategy == "static") {
    out.graph = static_graph(out.n);
  } else if (cfg.teacher_forcing_graph && train_mode && gold) {
    out.graph = dynamic_graph(gold_binary_table(*gold));
  } else {
    out.graph = dynamic_graph(bin.bhat);
  }

  Id g = cfg.use_gnn ? gnn_forward(tape, store, u, out.graph, cfg.gnn_layers) : u;
  out.flat_label_logits = label_logits(tape, store, g);

  if (gold) {
    if (gold->n != out.n) throw ShapeError("forward: gold table size mismatch");
    std::vector<uint8_t> mask(static_cast<size_t>(out.n) * static_cast<size_t>(out.n), 1);
    out.loss_entry = tape.cross_entropy(out.flat_label_logits, flatten_gold(*gold), mask);
    out.report.entry = static_cast<double>(tape.value(out.loss_entry).data[0]);
    out.report.cells = static_cast<int64_t>(mask.size());
    if (cfg.strategy == "dynamic") {
      out.loss_bin = tape.cross_entropy(bin.logits, flatten_bits(gold_binary_table(*gold)), mask);
      out.report.bin = static_cast<double>(tape.value(out.loss_bin).data[0]);
      out.loss_total = tape.add(out.loss_entry, out.loss_bin);
    } else {
      out.loss_total = out.loss_entry;
    }
    out.report.total = static_cast<double>(tape.value(out.loss_total).data[0]);
  }
  return out;
}

template <typename T>
typename Model<T>::Prediction Model<T>::predict(const Sentence& s, const EncoderOutput<T>* features) {
  Tape<T> tape(true, false);
  Forward f = forward(tape, s, nullptr, features, false, 0);
  Prediction p;
  p.probs = make_prob_table(tape, f.flat_label_logits, f.n, labels.size());
  p.bhat = f.bhat;
  p.graph = f.graph;
  return p;
}

template <typename T>
DecodedResult Model<T>::decode_sentence(const Sentence& s, double threshold,
                                        const EncoderOutput<T>* features) {
  Prediction p = predict(s, features);
  return decode(p.probs, labels, threshold, symmetric_types);
}

template <typename T>
Sentence Model<T>::predict_sentence(const Sentence& s, double threshold,
                                    const EncoderOutput<T>* features, DecodedResult* detail) {
  DecodedResult d = decode_sentence(s, threshold, features);
  Sentence out;
  out.id = s.id;
  out.tokens = s.tokens;
  out.entities = d.entities;
  out.relations = d.relations;
  if (detail) *detail = std::move(d);
  return out;
}

template class Model<float>;
template class Model<double>;

}  // namespace hiore
