#include "hiore/table.hpp"

namespace hiore {

void TableConfig::validate() const {
  if (dist_dim < 1) throw ConfigError("table: dist_dim must be >= 1");
  if (dist_clamp < 1) throw ConfigError("table: dist_clamp must be >= 1");
  if (mode != "concat-v" && mode != "biaffine")
    throw ConfigError("table: mode must be 'concat-v' or 'biaffine', got '" + mode + "'");
  if (mode == "biaffine" && biaffine_dim < 1) throw ConfigError("table: biaffine_dim must be >= 1");
}

template <typename T>
void register_table_params(ParameterStore<T>& store, const TableConfig& cfg, int mlp_dim, Rng& rng) {
  cfg.validate();
  init_uniform_fan_in(store.create("table.dist_emb", {cfg.dist_clamp + 1, cfg.dist_dim}),
                      cfg.dist_dim, rng);
  if (cfg.mode == "biaffine") {
    int64_t d = mlp_dim, o = cfg.biaffine_dim;
    init_uniform_fan_in(store.create("table.biaffine.u", {d, o, d}), d * d, rng);
    init_uniform_fan_in(store.create("table.biaffine.w", {2 * d, o}), 2 * d, rng);
    store.create("table.biaffine.b", {o});
  }
}

template <typename T>
typename Tape<T>::Id build_v(Tape<T>& tape, ParameterStore<T>& store, const TableConfig& cfg,
                             const HeadTailNodes<T>& ht) {
  if (cfg.mode == "biaffine") {
    return tape.biaffine_table(ht.head, ht.tail, tape.param(store.get("table.biaffine.u")),
                               tape.param(store.get("table.biaffine.w")),
                               tape.param(store.get("table.biaffine.b")));
  }
  const Tensor<T>& dv = store.get("table.dist_emb").value;
  if (dv.dim(1) != cfg.dist_dim) throw ShapeError("build_v: distance embedding width mismatch");
  return tape.pairwise_table(ht.head, ht.tail, tape.param(store.get("table.dist_emb")),
                             cfg.dist_clamp);
}

template <typename T>
typename Tape<T>::Id build_k(Tape<T>& tape, const std::vector<typename Tape<T>::Id>& channels) {
  if (channels.empty()) throw ShapeError("build_k: attention channels absent");
  return tape.stack_last(channels);
}

template void register_table_params<float>(ParameterStore<float>&, const TableConfig&, int, Rng&);
template void register_table_params<double>(ParameterStore<double>&, const TableConfig&, int, Rng&);
template Tape<float>::Id build_v<float>(Tape<float>&, ParameterStore<float>&, const TableConfig&,
                                        const HeadTailNodes<float>&);
template Tape<double>::Id build_v<double>(Tape<double>&, ParameterStore<double>&, const TableConfig&,
                                          const HeadTailNodes<double>&);
template Tape<float>::Id build_k<float>(Tape<float>&, const std::vector<Tape<float>::Id>&);
template Tape<double>::Id build_k<double>(Tape<double>&, const std::vector<Tape<double>::Id>&);

}  // namespace hiore
