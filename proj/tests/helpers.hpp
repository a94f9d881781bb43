#pragma once

#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "hiore/common.hpp"
#include "hiore/corpus.hpp"
#include "hiore/model.hpp"
#include "hiore/tensor.hpp"

namespace hiore::test {

template <typename T>
void fill_random(Tensor<T>& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
void randomize_store(ParameterStore<T>& store, Rng& rng, double scale = 0.3) {
  for (Parameter<T>* p : store.all())
    for (auto& v : p->value.data) v = static_cast<T>(rng.uniform(-scale, scale));
}

inline Sentence make_sentence(std::string id, int n, std::vector<EntityMention> ents = {},
                              std::vector<RelationMention> rels = {}) {
  Sentence s;
  s.id = std::move(id);
  for (int i = 0; i < n; ++i) s.tokens.push_back("tok" + std::to_string(i % 7));
  s.entities = std::move(ents);
  s.relations = std::move(rels);
  return s;
}

/// Deliberately tiny pipeline dims so finite differences stay affordable.
inline ModelConfig micro_config() {
  ModelConfig cfg;
  cfg.encoder.model_dim = 8;
  cfg.encoder.layers = 1;
  cfg.encoder.heads = 2;
  cfg.encoder.ffn_dim = 12;
  cfg.encoder.max_len = 16;
  cfg.encoder.mlp_dim = 6;
  cfg.table.dist_dim = 6;
  cfg.table.dist_clamp = 8;
  cfg.wnet.depth = 1;
  cfg.wnet.base_channels = 4;
  cfg.wnet.out_channels = 6;
  cfg.gnn_layers = 1;
  return cfg;
}

/// Small but trainable dims for overfit-style tests.
inline ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.encoder.model_dim = 64;
  cfg.encoder.layers = 2;
  cfg.encoder.heads = 2;
  cfg.encoder.ffn_dim = 128;
  cfg.encoder.max_len = 24;
  cfg.encoder.mlp_dim = 32;
  cfg.table.dist_dim = 32;
  cfg.table.dist_clamp = 16;
  cfg.wnet.depth = 2;
  cfg.wnet.base_channels = 16;
  cfg.wnet.out_channels = 32;
  cfg.gnn_layers = 1;
  return cfg;
}

}  // namespace hiore::test
