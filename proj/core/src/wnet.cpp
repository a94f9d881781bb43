#include "hiore/wnet.hpp"

namespace hiore {

void WNetConfig::validate() const {
  if (depth < 1) throw ConfigError("wnet: depth must be >= 1");
  if (base_channels < 1) throw ConfigError("wnet: base_channels must be >= 1");
  if (out_channels < 1) throw ConfigError("wnet: out_channels must be >= 1");
  if (single_unet && !use_attention_input)
    throw ConfigError("wnet: single_unet requires use_attention_input");
}

PaddedTable pad_for_depth(int64_t n, int depth) {
  if (n < 1) throw ShapeError("pad_for_depth: n must be >= 1");
  int64_t align = int64_t(1) << depth;
  PaddedTable pt;
  pt.n = n;
  pt.padded = (n + align - 1) / align * align;
  return pt;
}

int64_t receptive_radius_bound(const WNetConfig& cfg) {
  // Walk the op schedule accumulating reach in full-resolution cells:
  // a 3x3 conv at scale s adds s, a 2x2 pool adds its input scale, a
  // nearest upsample adds its output scale.
  int64_t radius = 0;
  int64_t scale = 1;
  for (int l = 0; l < cfg.depth; ++l) {
    radius += 2 * scale;  // conv block: two 3x3 convs
    radius += scale;      // pool
    scale *= 2;
  }
  radius += 2 * scale;  // bottleneck block
  for (int l = cfg.depth - 1; l >= 0; --l) {
    scale /= 2;
    radius += scale;      // upsample
    radius += 2 * scale;  // decoder block
  }
  return radius;
}

namespace {

template <typename T>
void create_conv(ParameterStore<T>& store, const std::string& name, int64_t ci, int64_t co, Rng& rng) {
  init_uniform_fan_in(store.create(name + ".w", {3, 3, ci, co}), 9 * ci, rng);
  store.create(name + ".b", {co});
}

template <typename T>
void create_block(ParameterStore<T>& store, const std::string& prefix, int64_t ci, int64_t co, Rng& rng) {
  create_conv(store, prefix + ".c1", ci, co, rng);
  create_conv(store, prefix + ".c2", co, co, rng);
}

template <typename T>
typename Tape<T>::Id apply_conv(Tape<T>& tape, ParameterStore<T>& store, const std::string& name,
                                typename Tape<T>::Id x) {
  return tape.conv2d_3x3(x, tape.param(store.get(name + ".w")), tape.param(store.get(name + ".b")));
}

template <typename T>
typename Tape<T>::Id apply_block(Tape<T>& tape, ParameterStore<T>& store, const std::string& prefix,
                                 typename Tape<T>::Id x) {
  x = tape.gelu(apply_conv(tape, store, prefix + ".c1", x));
  return tape.gelu(apply_conv(tape, store, prefix + ".c2", x));
}

}  // namespace

template <typename T>
void register_wnet_params(ParameterStore<T>& store, const WNetConfig& cfg, int v_channels,
                          int k_channels, Rng& rng) {
  cfg.validate();
  bool two_encoders = cfg.use_attention_input && !cfg.single_unet;
  int64_t v_in = cfg.single_unet ? v_channels + k_channels : v_channels;
  for (int l = 0; l < cfg.depth; ++l) {
    int64_t in = l == 0 ? v_in : cfg.level_channels(l - 1);
    create_block(store, "wnet.encv.l" + std::to_string(l), in, cfg.level_channels(l), rng);
  }
  if (two_encoders) {
    for (int l = 0; l < cfg.depth; ++l) {
      int64_t in = l == 0 ? k_channels : cfg.level_channels(l - 1);
      create_block(store, "wnet.enck.l" + std::to_string(l), in, cfg.level_channels(l), rng);
    }
  }
  int64_t deepest = cfg.level_channels(cfg.depth - 1);
  create_block(store, "wnet.mid", two_encoders ? 2 * deepest : deepest, cfg.bottleneck_channels(), rng);
  int64_t carry = cfg.bottleneck_channels();
  for (int l = cfg.depth - 1; l >= 0; --l) {
    int64_t skips = (two_encoders ? 2 : 1) * cfg.level_channels(l);
    create_block(store, "wnet.dec.l" + std::to_string(l), carry + skips, cfg.level_channels(l), rng);
    carry = cfg.level_channels(l);
  }
  init_uniform_fan_in(store.create("wnet.out.w", {carry, cfg.out_channels}), carry, rng);
  store.create("wnet.out.b", {cfg.out_channels});
}

template <typename T>
typename Tape<T>::Id wnet_forward(Tape<T>& tape, ParameterStore<T>& store, const WNetConfig& cfg,
                                  typename Tape<T>::Id v, typename Tape<T>::Id k) {
  using Id = typename Tape<T>::Id;
  cfg.validate();
  bool two_encoders = cfg.use_attention_input && !cfg.single_unet;
  if (cfg.use_attention_input && k < 0) throw ShapeError("wnet: attention table required but absent");
  if (!cfg.use_attention_input && k >= 0) throw ShapeError("wnet: attention table supplied but disabled");

  int64_t n = tape.value(v).dim(0);
  if (cfg.use_attention_input && tape.value(k).dim(0) != n)
    throw ShapeError("wnet: V and K disagree on n");
  PaddedTable pt = pad_for_depth(n, cfg.depth);
  if (pt.padded > n) {
    v = tape.pad2d(v, pt.padded, pt.padded);
    if (k >= 0) k = tape.pad2d(k, pt.padded, pt.padded);
  }
  if (cfg.single_unet) {
    v = tape.concat({v, k}, 2);
    k = -1;
  }

  std::vector<Id> skips_v, skips_k;
  Id xv = v;
  for (int l = 0; l < cfg.depth; ++l) {
    xv = apply_block(tape, store, "wnet.encv.l" + std::to_string(l), xv);
    skips_v.push_back(xv);
    xv = tape.maxpool_2x2(xv);
  }
  Id mid_in = xv;
  if (two_encoders) {
    Id xk = k;
    for (int l = 0; l < cfg.depth; ++l) {
      xk = apply_block(tape, store, "wnet.enck.l" + std::to_string(l), xk);
      skips_k.push_back(xk);
      xk = tape.maxpool_2x2(xk);
    }
    mid_in = tape.concat({xv, xk}, 2);
  }
  Id x = apply_block(tape, store, "wnet.mid", mid_in);
  for (int l = cfg.depth - 1; l >= 0; --l) {
    x = tape.upsample_nearest_2x(x);
    std::vector<Id> cat = {x, skips_v[static_cast<size_t>(l)]};
    if (two_encoders) cat.push_back(skips_k[static_cast<size_t>(l)]);
    x = apply_block(tape, store, "wnet.dec.l" + std::to_string(l), tape.concat(cat, 2));
  }
  // final 1x1 projection to u channels
  int64_t c0 = tape.value(x).dim(2);
  Id flat = tape.reshape(x, {pt.padded * pt.padded, c0});
  Id proj = tape.linear(flat, tape.param(store.get("wnet.out.w")), tape.param(store.get("wnet.out.b")));
  Id u = tape.reshape(proj, {pt.padded, pt.padded, static_cast<int64_t>(cfg.out_channels)});
  if (pt.padded > n) u = tape.crop2d(u, n, n);
  return u;
}

template void register_wnet_params<float>(ParameterStore<float>&, const WNetConfig&, int, int, Rng&);
template void register_wnet_params<double>(ParameterStore<double>&, const WNetConfig&, int, int, Rng&);
template Tape<float>::Id wnet_forward<float>(Tape<float>&, ParameterStore<float>&, const WNetConfig&,
                                             Tape<float>::Id, Tape<float>::Id);
template Tape<double>::Id wnet_forward<double>(Tape<double>&, ParameterStore<double>&, const WNetConfig&,
                                               Tape<double>::Id, Tape<double>::Id);

}  // namespace hiore
