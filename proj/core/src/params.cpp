#include "hiore/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "archive format assumes a little-endian host");

namespace hiore {

template <typename T>
Parameter<T>& ParameterStore<T>::create(const std::string& name, Shape shape) {
  if (params_.count(name)) throw ConfigError("parameter already registered: " + name);
  Parameter<T> p;
  p.name = name;
  p.value = Tensor<T>(shape);
  p.grad = Tensor<T>(std::move(shape));
  auto [it, ok] = params_.emplace(name, std::move(p));
  (void)ok;
  order_.push_back(name);
  return it->second;
}

template <typename T>
Parameter<T>& ParameterStore<T>::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

template <typename T>
const Parameter<T>& ParameterStore<T>::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

template <typename T>
bool ParameterStore<T>::has(const std::string& name) const {
  return params_.count(name) > 0;
}

template <typename T>
std::vector<Parameter<T>*> ParameterStore<T>::all() {
  std::vector<Parameter<T>*> out;
  out.reserve(order_.size());
  for (const auto& n : order_) out.push_back(&params_.at(n));
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> ParameterStore<T>::all() const {
  std::vector<const Parameter<T>*> out;
  out.reserve(order_.size());
  for (const auto& n : order_) out.push_back(&params_.at(n));
  return out;
}

template <typename T>
int64_t ParameterStore<T>::total_elements() const {
  int64_t total = 0;
  for (const auto& n : order_) total += params_.at(n).value.numel();
  return total;
}

template <typename T>
void ParameterStore<T>::zero_grads() {
  for (auto& [name, p] : params_) p.grad.zero();
}

template <typename T>
void init_uniform_fan_in(Parameter<T>& p, int64_t fan_in, Rng& rng) {
  double bound = std::sqrt(1.0 / static_cast<double>(std::max<int64_t>(fan_in, 1)));
  for (auto& v : p.value.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template void init_uniform_fan_in<float>(Parameter<float>&, int64_t, Rng&);
template void init_uniform_fan_in<double>(Parameter<double>&, int64_t, Rng&);

template <>
const char* dtype_name<float>() {
  return "float32";
}
template <>
const char* dtype_name<double>() {
  return "float64";
}

// ---------------------------------------------------------------------------
// Archive I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'H', 'I', 'O', 'R', 'A', 'R', 'C', 'H'};
constexpr uint32_t kVersion = 1;

template <typename V>
void write_pod(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw IoError("archive: truncated file");
  return v;
}

std::string archive_dtype(const std::string& manifest_json) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(manifest_json);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("archive: bad manifest JSON: ") + e.what());
  }
  if (!m.contains("dtype") || !m["dtype"].is_string())
    throw IoError("archive: manifest missing dtype");
  std::string d = m["dtype"].get<std::string>();
  if (d != "float32" && d != "float64") throw IoError("archive: unsupported dtype " + d);
  if (!m.contains("format_version")) throw IoError("archive: manifest missing format_version");
  return d;
}

}  // namespace

void save_archive(const Archive& a, const std::string& path) {
  std::string dtype = archive_dtype(a.manifest_json);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(os, kVersion);
  write_pod<uint64_t>(os, a.manifest_json.size());
  os.write(a.manifest_json.data(), static_cast<std::streamsize>(a.manifest_json.size()));
  write_pod<uint64_t>(os, a.entries.size());
  for (const ArchiveEntry& e : a.entries) {
    write_pod<uint64_t>(os, e.name.size());
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod<uint32_t>(os, static_cast<uint32_t>(e.shape.size()));
    for (int64_t d : e.shape) write_pod<int64_t>(os, d);
    if (static_cast<int64_t>(e.data.size()) != shape_numel(e.shape))
      throw IoError("archive: entry data does not match shape: " + e.name);
    if (dtype == "float32") {
      write_pod<uint64_t>(os, e.data.size() * sizeof(float));
      for (double v : e.data) write_pod<float>(os, static_cast<float>(v));
    } else {
      write_pod<uint64_t>(os, e.data.size() * sizeof(double));
      for (double v : e.data) write_pod<double>(os, v);
    }
  }
  if (!os) throw IoError("archive: write failed: " + path);
}

Archive load_archive(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("archive: bad magic in " + path);
  uint32_t version = read_pod<uint32_t>(is);
  if (version != kVersion)
    throw IoError("archive: unsupported format version " + std::to_string(version));
  uint64_t mlen = read_pod<uint64_t>(is);
  Archive a;
  a.manifest_json.resize(mlen);
  is.read(a.manifest_json.data(), static_cast<std::streamsize>(mlen));
  if (!is) throw IoError("archive: truncated manifest");
  std::string dtype = archive_dtype(a.manifest_json);
  uint64_t n = read_pod<uint64_t>(is);
  a.entries.resize(n);
  for (uint64_t i = 0; i < n; ++i) {
    ArchiveEntry& e = a.entries[i];
    uint64_t nlen = read_pod<uint64_t>(is);
    e.name.resize(nlen);
    is.read(e.name.data(), static_cast<std::streamsize>(nlen));
    uint32_t ndim = read_pod<uint32_t>(is);
    e.shape.resize(ndim);
    for (uint32_t d = 0; d < ndim; ++d) e.shape[d] = read_pod<int64_t>(is);
    uint64_t bytes = read_pod<uint64_t>(is);
    int64_t count = shape_numel(e.shape);
    size_t elem = dtype == "float32" ? sizeof(float) : sizeof(double);
    if (bytes != static_cast<uint64_t>(count) * elem)
      throw IoError("archive: entry size mismatch for " + e.name);
    e.data.resize(static_cast<size_t>(count));
    if (dtype == "float32") {
      for (int64_t k = 0; k < count; ++k) e.data[static_cast<size_t>(k)] = read_pod<float>(is);
    } else {
      for (int64_t k = 0; k < count; ++k) e.data[static_cast<size_t>(k)] = read_pod<double>(is);
    }
  }
  return a;
}

}  // namespace hiore
