#include "hiore/encoder.hpp"

#include <cmath>

#include <json.hpp>

namespace hiore {

void EncoderConfig::validate() const {
  if (vocab_size < 0) throw ConfigError("encoder: vocab_size must be >= 0");
  if (model_dim < 1 || layers < 1 || heads < 1 || ffn_dim < 1 || mlp_dim < 1)
    throw ConfigError("encoder: dims must be >= 1");
  if (model_dim % heads != 0) throw ConfigError("encoder: model_dim must be divisible by heads");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0,1)");
  if (max_len < 1) throw ConfigError("encoder: max_len must be >= 1");
}

namespace {

template <typename T>
void create_linear(ParameterStore<T>& store, const std::string& prefix, int64_t in, int64_t out,
                   Rng& rng) {
  init_uniform_fan_in(store.create(prefix + ".w", {in, out}), in, rng);
  store.create(prefix + ".b", {out});  // biases start at zero
}

template <typename T>
void create_layer_norm(ParameterStore<T>& store, const std::string& prefix, int64_t dim) {
  store.create(prefix + ".g", {dim}).value.fill(T(1));
  store.create(prefix + ".b", {dim});
}

template <typename T>
typename Tape<T>::Id apply_linear(Tape<T>& tape, ParameterStore<T>& store,
                                  const std::string& prefix, typename Tape<T>::Id x) {
  return tape.linear(x, tape.param(store.get(prefix + ".w")), tape.param(store.get(prefix + ".b")));
}

template <typename T>
typename Tape<T>::Id apply_layer_norm(Tape<T>& tape, ParameterStore<T>& store,
                                      const std::string& prefix, typename Tape<T>::Id x) {
  return tape.layer_norm(x, tape.param(store.get(prefix + ".g")), tape.param(store.get(prefix + ".b")),
                         static_cast<T>(1e-5));
}

}  // namespace

template <typename T>
void register_encoder_params(ParameterStore<T>& store, const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.vocab_size < 1) throw ConfigError("encoder: vocab_size not set (needs a corpus vocab)");
  int64_t m = cfg.model_dim;
  init_uniform_fan_in(store.create("encoder.tok_emb", {cfg.vocab_size, m}), m, rng);
  init_uniform_fan_in(store.create("encoder.pos_emb", {cfg.max_len, m}), m, rng);
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = "encoder.l" + std::to_string(l);
    create_layer_norm(store, p + ".ln1", m);
    create_linear(store, p + ".attn.q", m, m, rng);
    // key projection carries no bias: softmax is invariant to uniform row
    // shifts, so a key bias would be unidentifiable
    init_uniform_fan_in(store.create(p + ".attn.k.w", {m, m}), m, rng);
    create_linear(store, p + ".attn.v", m, m, rng);
    create_linear(store, p + ".attn.o", m, m, rng);
    create_layer_norm(store, p + ".ln2", m);
    create_linear(store, p + ".ffn.1", m, cfg.ffn_dim, rng);
    create_linear(store, p + ".ffn.2", cfg.ffn_dim, m, rng);
  }
  create_layer_norm(store, "encoder.lnf", m);
  create_linear(store, "headmlp.1", m, cfg.mlp_dim, rng);
  create_linear(store, "headmlp.2", cfg.mlp_dim, cfg.mlp_dim, rng);
  create_linear(store, "tailmlp.1", m, cfg.mlp_dim, rng);
  create_linear(store, "tailmlp.2", cfg.mlp_dim, cfg.mlp_dim, rng);
}

template <typename T>
EncoderNodes<T> encode_on_tape(Tape<T>& tape, ParameterStore<T>& store, const EncoderConfig& cfg,
                               const std::vector<int32_t>& token_ids, bool train_mode,
                               uint64_t dropout_seed) {
  using Id = typename Tape<T>::Id;
  int64_t n = static_cast<int64_t>(token_ids.size());
  if (n == 0) throw CorpusError("encode: empty token sequence");
  if (n > cfg.max_len)
    throw CorpusError("encode: sentence length " + std::to_string(n) + " exceeds max_len " +
                      std::to_string(cfg.max_len));
  int64_t dh = cfg.model_dim / cfg.heads;
  T inv_sqrt_dh = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  std::vector<int32_t> positions(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) positions[static_cast<size_t>(i)] = static_cast<int32_t>(i);
  Id tok = tape.embedding_lookup(tape.param(store.get("encoder.tok_emb")), token_ids);
  Id pos = tape.embedding_lookup(tape.param(store.get("encoder.pos_emb")), positions);
  Id h = tape.add(tok, pos);

  EncoderNodes<T> out;
  uint64_t drop_counter = dropout_seed;
  T rate = static_cast<T>(train_mode ? cfg.dropout : 0.0);
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = "encoder.l" + std::to_string(l);
    Id x = apply_layer_norm(tape, store, p + ".ln1", h);
    Id q = apply_linear(tape, store, p + ".attn.q", x);
    Id k = tape.matmul(x, tape.param(store.get(p + ".attn.k.w")));
    Id v = apply_linear(tape, store, p + ".attn.v", x);
    std::vector<Id> ctx_heads;
    for (int hh = 0; hh < cfg.heads; ++hh) {
      int64_t from = hh * dh, to = (hh + 1) * dh;
      Id qh = tape.slice_cols(q, from, to);
      Id kh = tape.slice_cols(k, from, to);
      Id vh = tape.slice_cols(v, from, to);
      Id scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt_dh);
      Id attn = tape.softmax(scores, 1);
      out.attention.push_back(attn);
      ctx_heads.push_back(tape.matmul(attn, vh));
    }
    Id ctx = tape.concat(ctx_heads, 1);
    Id attn_out = apply_linear(tape, store, p + ".attn.o", ctx);
    attn_out = tape.dropout(attn_out, rate, drop_counter++);
    h = tape.add(h, attn_out);
    Id f = apply_layer_norm(tape, store, p + ".ln2", h);
    Id ffn = apply_linear(tape, store, p + ".ffn.2",
                          tape.gelu(apply_linear(tape, store, p + ".ffn.1", f)));
    ffn = tape.dropout(ffn, rate, drop_counter++);
    h = tape.add(h, ffn);
  }
  out.states = apply_layer_norm(tape, store, "encoder.lnf", h);
  return out;
}

template <typename T>
EncoderOutput<T> encode(ParameterStore<T>& store, const EncoderConfig& cfg,
                        const std::vector<int32_t>& token_ids) {
  Tape<T> tape(true, false);
  EncoderNodes<T> nodes = encode_on_tape(tape, store, cfg, token_ids, false, 0);
  EncoderOutput<T> out;
  out.states = tape.value(nodes.states);
  int64_t n = out.states.dim(0);
  int64_t kch = static_cast<int64_t>(nodes.attention.size());
  out.attention = Tensor<T>(Shape{n, n, kch});
  for (int64_t c = 0; c < kch; ++c) {
    const Tensor<T>& a = tape.value(nodes.attention[static_cast<size_t>(c)]);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j) out.attention(i, j, c) = a(i, j);
  }
  return out;
}

template <typename T>
HeadTailNodes<T> head_tail_on_tape(Tape<T>& tape, ParameterStore<T>& store,
                                   const EncoderConfig& cfg, typename Tape<T>::Id states) {
  (void)cfg;
  HeadTailNodes<T> out;
  out.head = apply_linear(tape, store, "headmlp.2",
                          tape.gelu(apply_linear(tape, store, "headmlp.1", states)));
  out.tail = apply_linear(tape, store, "tailmlp.2",
                          tape.gelu(apply_linear(tape, store, "tailmlp.1", states)));
  return out;
}

template <typename T>
void export_features(const EncoderOutput<T>& eo, const std::string& path) {
  Archive a;
  nlohmann::json m;
  m["format_version"] = 1;
  m["dtype"] = dtype_name<T>();
  m["sentence_id"] = eo.sentence_id;
  m["names"] = nlohmann::json::array({"states"});
  if (eo.has_attention()) m["names"].push_back("attention");
  a.manifest_json = m.dump();
  ArchiveEntry st;
  st.name = "states";
  st.shape = eo.states.shape;
  st.data.assign(eo.states.data.begin(), eo.states.data.end());
  a.entries.push_back(std::move(st));
  if (eo.has_attention()) {
    ArchiveEntry at;
    at.name = "attention";
    at.shape = eo.attention.shape;
    at.data.assign(eo.attention.data.begin(), eo.attention.data.end());
    a.entries.push_back(std::move(at));
  }
  save_archive(a, path);
}

template <typename T>
EncoderOutput<T> load_precomputed(const std::string& path) {
  Archive a = load_archive(path);
  nlohmann::json m = nlohmann::json::parse(a.manifest_json);
  EncoderOutput<T> out;
  if (m.contains("sentence_id")) out.sentence_id = m["sentence_id"].get<std::string>();
  bool have_states = false;
  for (const ArchiveEntry& e : a.entries) {
    if (e.name == "states") {
      if (e.shape.size() != 2) throw IoError("features: states must be 2D");
      out.states = Tensor<T>(e.shape);
      for (size_t i = 0; i < e.data.size(); ++i) out.states.data[i] = static_cast<T>(e.data[i]);
      have_states = true;
    } else if (e.name == "attention") {
      if (e.shape.size() != 3 || e.shape[0] != e.shape[1])
        throw IoError("features: attention must be [n,n,k]");
      out.attention = Tensor<T>(e.shape);
      for (size_t i = 0; i < e.data.size(); ++i) out.attention.data[i] = static_cast<T>(e.data[i]);
    } else {
      throw IoError("features: unexpected entry '" + e.name + "'");
    }
  }
  if (!have_states) throw IoError("features: missing 'states' entry in " + path);
  if (out.has_attention() && out.attention.dim(0) != out.states.dim(0))
    throw IoError("features: states/attention length mismatch");
  return out;
}

template <typename T>
void check_features(const EncoderOutput<T>& eo, const EncoderConfig& cfg, bool need_attention) {
  if (eo.states.dim(1) != cfg.model_dim)
    throw IoError("features: state width " + std::to_string(eo.states.dim(1)) +
                  " does not match model_dim " + std::to_string(cfg.model_dim));
  if (need_attention) {
    if (!eo.has_attention()) throw IoError("features: attention channels required but absent");
    if (eo.attention.dim(2) != cfg.attention_channels())
      throw IoError("features: " + std::to_string(eo.attention.dim(2)) +
                    " attention channels, configured " + std::to_string(cfg.attention_channels()));
  }
}

template void register_encoder_params<float>(ParameterStore<float>&, const EncoderConfig&, Rng&);
template void register_encoder_params<double>(ParameterStore<double>&, const EncoderConfig&, Rng&);
template EncoderNodes<float> encode_on_tape<float>(Tape<float>&, ParameterStore<float>&,
                                                   const EncoderConfig&, const std::vector<int32_t>&,
                                                   bool, uint64_t);
template EncoderNodes<double> encode_on_tape<double>(Tape<double>&, ParameterStore<double>&,
                                                     const EncoderConfig&, const std::vector<int32_t>&,
                                                     bool, uint64_t);
template EncoderOutput<float> encode<float>(ParameterStore<float>&, const EncoderConfig&,
                                            const std::vector<int32_t>&);
template EncoderOutput<double> encode<double>(ParameterStore<double>&, const EncoderConfig&,
                                              const std::vector<int32_t>&);
template HeadTailNodes<float> head_tail_on_tape<float>(Tape<float>&, ParameterStore<float>&,
                                                       const EncoderConfig&, Tape<float>::Id);
template HeadTailNodes<double> head_tail_on_tape<double>(Tape<double>&, ParameterStore<double>&,
                                                         const EncoderConfig&, Tape<double>::Id);
template void export_features<float>(const EncoderOutput<float>&, const std::string&);
template void export_features<double>(const EncoderOutput<double>&, const std::string&);
template EncoderOutput<float> load_precomputed<float>(const std::string&);
template EncoderOutput<double> load_precomputed<double>(const std::string&);
template void check_features<float>(const EncoderOutput<float>&, const EncoderConfig&, bool);
template void check_features<double>(const EncoderOutput<double>&, const EncoderConfig&, bool);

}  // namespace hiore
