#include "hiore/config.hpp"

#include <fstream>
#include <set>

namespace hiore {

using nlohmann::json;

void TrainHyper::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (lr <= 0) throw ConfigError("train: lr must be > 0");
  if (weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1)
    throw ConfigError("train: adam betas must be in [0,1)");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (decode_threshold < 0) throw ConfigError("train: decode_threshold must be >= 0");
}

void RunConfig::validate() const {
  if (dtype != "float32" && dtype != "float64")
    throw ConfigError("config: dtype must be 'float32' or 'float64'");
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
  model.validate();
  train.validate();
  if (decode_threshold < 0) throw ConfigError("config: decode.threshold must be >= 0");
}

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("config: unknown key '" + where + it.key() + "'");
}

template <typename V>
void get_to(const json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + std::string(key) + "': " + e.what());
  }
}

}  // namespace

json model_config_to_json(const ModelConfig& m) {
  json j;
  j["encoder"] = {{"vocab_size", m.encoder.vocab_size}, {"model_dim", m.encoder.model_dim},
                  {"layers", m.encoder.layers},         {"heads", m.encoder.heads},
                  {"ffn_dim", m.encoder.ffn_dim},       {"max_len", m.encoder.max_len},
                  {"dropout", m.encoder.dropout},       {"mlp_dim", m.encoder.mlp_dim},
                  {"freeze", m.freeze_encoder}};
  j["table"] = {{"dist_dim", m.table.dist_dim},
                {"dist_clamp", m.table.dist_clamp},
                {"mode", m.table.mode},
                {"biaffine_dim", m.table.biaffine_dim}};
  j["wnet"] = {{"enabled", m.use_wnet},
               {"depth", m.wnet.depth},
               {"base_channels", m.wnet.base_channels},
               {"out_channels", m.wnet.out_channels},
               {"use_attention_input", m.wnet.use_attention_input},
               {"single_unet", m.wnet.single_unet}};
  j["gnn"] = {{"enabled", m.use_gnn}, {"layers", m.gnn_layers}, {"dim", m.gnn_dim}};
  j["strategy"] = m.strategy;
  j["teacher_forcing_graph"] = m.teacher_forcing_graph;
  j["symmetric_relation_types"] = m.symmetric_relation_types;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  check_keys(j, "", {"encoder", "table", "wnet", "gnn", "strategy", "teacher_forcing_graph",
                     "symmetric_relation_types"});
  ModelConfig m;
  if (j.contains("encoder")) {
    const json& e = j["encoder"];
    check_keys(e, "encoder.", {"vocab_size", "model_dim", "layers", "heads", "ffn_dim", "max_len",
                               "dropout", "mlp_dim", "freeze"});
    get_to(e, "vocab_size", m.encoder.vocab_size);
    get_to(e, "model_dim", m.encoder.model_dim);
    get_to(e, "layers", m.encoder.layers);
    get_to(e, "heads", m.encoder.heads);
    get_to(e, "ffn_dim", m.encoder.ffn_dim);
    get_to(e, "max_len", m.encoder.max_len);
    get_to(e, "dropout", m.encoder.dropout);
    get_to(e, "mlp_dim", m.encoder.mlp_dim);
    get_to(e, "freeze", m.freeze_encoder);
  }
  if (j.contains("table")) {
    const json& t = j["table"];
    check_keys(t, "table.", {"dist_dim", "dist_clamp", "mode", "biaffine_dim"});
    get_to(t, "dist_dim", m.table.dist_dim);
    get_to(t, "dist_clamp", m.table.dist_clamp);
    get_to(t, "mode", m.table.mode);
    get_to(t, "biaffine_dim", m.table.biaffine_dim);
  }
  if (j.contains("wnet")) {
    const json& w = j["wnet"];
    check_keys(w, "wnet.", {"enabled", "depth", "base_channels", "out_channels",
                            "use_attention_input", "single_unet"});
    get_to(w, "enabled", m.use_wnet);
    get_to(w, "depth", m.wnet.depth);
    get_to(w, "base_channels", m.wnet.base_channels);
    get_to(w, "out_channels", m.wnet.out_channels);
    get_to(w, "use_attention_input", m.wnet.use_attention_input);
    get_to(w, "single_unet", m.wnet.single_unet);
  }
  if (j.contains("gnn")) {
    const json& g = j["gnn"];
    check_keys(g, "gnn.", {"enabled", "layers", "dim"});
    get_to(g, "enabled", m.use_gnn);
    get_to(g, "layers", m.gnn_layers);
    get_to(g, "dim", m.gnn_dim);
  }
  get_to(j, "strategy", m.strategy);
  get_to(j, "teacher_forcing_graph", m.teacher_forcing_graph);
  get_to(j, "symmetric_relation_types", m.symmetric_relation_types);
  return m;
}

json run_config_to_json(const RunConfig& c) {
  json j = model_config_to_json(c.model);
  j["seed"] = c.seed;
  j["dtype"] = c.dtype;
  j["deterministic"] = c.deterministic;
  j["threads"] = c.threads;
  j["paths"] = {{"train", c.train_path}, {"dev", c.dev_path}, {"features_dir", c.features_dir}};
  j["train"] = {{"batch_size", c.train.batch_size},
                {"lr", c.train.lr},
                {"weight_decay", c.train.weight_decay},
                {"adam_beta1", c.train.adam_beta1},
                {"adam_beta2", c.train.adam_beta2},
                {"adam_eps", c.train.adam_eps},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience}};
  j["decode"] = {{"threshold", c.decode_threshold}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j, "", {"seed", "dtype", "deterministic", "threads", "paths", "encoder", "table",
                     "wnet", "gnn", "strategy", "teacher_forcing_graph", "symmetric_relation_types",
                     "train", "decode"});
  RunConfig c;
  get_to(j, "seed", c.seed);
  get_to(j, "dtype", c.dtype);
  get_to(j, "deterministic", c.deterministic);
  get_to(j, "threads", c.threads);
  if (j.contains("paths")) {
    const json& p = j["paths"];
    check_keys(p, "paths.", {"train", "dev", "features_dir"});
    get_to(p, "train", c.train_path);
    get_to(p, "dev", c.dev_path);
    get_to(p, "features_dir", c.features_dir);
  }
  json model_part;
  for (const char* key : {"encoder", "table", "wnet", "gnn", "strategy", "teacher_forcing_graph",
                          "symmetric_relation_types"})
    if (j.contains(key)) model_part[key] = j[key];
  if (!model_part.is_null()) c.model = model_config_from_json(model_part);
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, "train.", {"batch_size", "lr", "weight_decay", "adam_beta1", "adam_beta2",
                             "adam_eps", "max_epochs", "patience"});
    get_to(t, "batch_size", c.train.batch_size);
    get_to(t, "lr", c.train.lr);
    get_to(t, "weight_decay", c.train.weight_decay);
    get_to(t, "adam_beta1", c.train.adam_beta1);
    get_to(t, "adam_beta2", c.train.adam_beta2);
    get_to(t, "adam_eps", c.train.adam_eps);
    get_to(t, "max_epochs", c.train.max_epochs);
    get_to(t, "patience", c.train.patience);
  }
  if (j.contains("decode")) {
    const json& d = j["decode"];
    check_keys(d, "decode.", {"threshold"});
    get_to(d, "threshold", c.decode_threshold);
  }
  c.train.seed = c.seed;
  c.train.decode_threshold = c.decode_threshold;
  c.train.deterministic = c.deterministic;
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config: bad JSON in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace hiore
