#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hiore/common.hpp"
#include "hiore/tensor.hpp"

namespace hiore {

/// A named trainable tensor with its gradient slot.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;  // same shape, accumulated until zero_grads
  bool trainable = true;
};

/// Registry of model parameters. Iteration follows registration order,
/// which is what the archive format and the optimizer state rely on.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>& create(const std::string& name, Shape shape);
  Parameter<T>& get(const std::string& name);
  const Parameter<T>& get(const std::string& name) const;
  bool has(const std::string& name) const;

  std::vector<Parameter<T>*> all();
  std::vector<const Parameter<T>*> all() const;
  const std::vector<std::string>& names() const { return order_; }
  size_t size() const { return order_.size(); }
  int64_t total_elements() const;

  void zero_grads();

 private:
  std::map<std::string, Parameter<T>> params_;
  std::vector<std::string> order_;
};

/// Fills weights uniformly in [-sqrt(1/fan_in), +sqrt(1/fan_in)].
template <typename T>
void init_uniform_fan_in(Parameter<T>& p, int64_t fan_in, Rng& rng);

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;
extern template void init_uniform_fan_in<float>(Parameter<float>&, int64_t, Rng&);
extern template void init_uniform_fan_in<double>(Parameter<double>&, int64_t, Rng&);

// ---------------------------------------------------------------------------
// Archive format, shared by checkpoints and feature exports: a JSON manifest
// followed by (name, shape, raw little-endian data) entries.
// ---------------------------------------------------------------------------

struct ArchiveEntry {
  std::string name;
  Shape shape;
  std::vector<double> data;  // held as double in memory; dtype on disk per manifest
};

struct Archive {
  std::string manifest_json;  // format version, dtype, name list, extras
  std::vector<ArchiveEntry> entries;
};

void save_archive(const Archive& a, const std::string& path);
Archive load_archive(const std::string& path);

/// Dtype tag recorded in manifests: "float32" or "float64".
template <typename T>
const char* dtype_name();

}  // namespace hiore
