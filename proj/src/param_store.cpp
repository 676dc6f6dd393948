#include "js3c/param_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "js3c/errors.hpp"

namespace js3c {

Param& ParamStore::add(const std::string& name, ad::Tensor value,
                       Partition partition, double lr_mult) {
  require(!name.empty(), "param store: empty name");
  require(index_.count(name) == 0, "param store: duplicate parameter " + name);
  index_[name] = params_.size();
  order_.push_back(name);
  Param p;
  p.m = ad::Tensor::zeros(value.shape);
  p.v = ad::Tensor::zeros(value.shape);
  p.value = std::move(value);
  p.partition = partition;
  p.lr_mult = lr_mult;
  params_.push_back(std::move(p));
  return params_.back();
}

Param& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  require(it != index_.end(), "param store: unknown parameter " + name);
  return params_[it->second];
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), "param store: unknown parameter " + name);
  return params_[it->second];
}

long ParamStore::total_elements() const {
  long n = 0;
  for (const Param& p : params_) n += p.value.numel();
  return n;
}

double lr_schedule(double base_lr, long epoch) {
  require(epoch >= 0, "lr schedule: negative epoch");
  return base_lr * std::pow(0.7, static_cast<double>(epoch / 5));
}

void adam_step(ParamStore& store, const std::map<std::string, ad::Tensor>& grads,
               const AdamConfig& cfg) {
  for (const auto& [name, g] : grads) {
    Param& p = store.at(name);
    require(g.same_shape(p.value), "adam: gradient shape mismatch for " + name);
    p.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step));
    const double lr = cfg.lr * p.lr_mult;
    for (long i = 0; i < p.value.numel(); ++i) {
      const double gi = g.data[i];
      p.m.data[i] = cfg.beta1 * p.m.data[i] + (1.0 - cfg.beta1) * gi;
      p.v.data[i] = cfg.beta2 * p.v.data[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = p.m.data[i] / bc1;
      const double vhat = p.v.data[i] / bc2;
      p.value.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

namespace {

constexpr char kMagic[4] = {'J', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw format_error("checkpoint: truncated file");
  return v;
}

void put_doubles(std::ofstream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void get_doubles(std::ifstream& is, std::vector<double>& v) {
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!is) throw format_error("checkpoint: truncated tensor payload");
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  put(os, kVersion);
  put(os, static_cast<std::uint32_t>(store.size()));
  for (const std::string& name : store.names()) {
    const Param& p = store.at(name);
    put(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put(os, static_cast<std::uint8_t>(p.partition));
    put(os, p.lr_mult);
    put(os, static_cast<std::uint32_t>(p.value.shape.size()));
    for (long d : p.value.shape) put(os, static_cast<std::uint64_t>(d));
    put_doubles(os, p.value.data);
    put(os, static_cast<std::uint64_t>(p.step));
    put_doubles(os, p.m.data);
    put_doubles(os, p.v.data);
  }
  os.flush();
  if (!os) throw io_error("checkpoint: short write to " + path);
}

ParamStore load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw format_error("checkpoint: bad magic in " + path);
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) throw format_error("checkpoint: unsupported version");
  const auto count = get<std::uint32_t>(is);
  ParamStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw format_error("checkpoint: truncated name");
    const auto part = get<std::uint8_t>(is);
    if (part > 1) throw format_error("checkpoint: bad partition flag");
    const auto lr_mult = get<double>(is);
    const auto ndim = get<std::uint32_t>(is);
    std::vector<long> shape(ndim);
    for (auto& d : shape) d = static_cast<long>(get<std::uint64_t>(is));
    ad::Tensor value(shape);
    get_doubles(is, value.data);
    Param& p = store.add(name, std::move(value), static_cast<Partition>(part), lr_mult);
    p.step = static_cast<long>(get<std::uint64_t>(is));
    get_doubles(is, p.m.data);
    get_doubles(is, p.v.data);
  }
  return store;
}

}  // namespace js3c
