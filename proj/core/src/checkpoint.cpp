#include "eaf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace eaf {

namespace {

constexpr char kMagic[8] = {'E', 'A', 'F', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::map<std::string, Tensor>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t e : t.shape()) write_raw<std::uint64_t>(out, e);
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const auto count = read_raw<std::uint32_t>(in);
  std::map<std::string, Tensor> params;
  for (std::uint32_t p = 0; p < count; ++p) {
    const auto name_len = read_raw<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = read_raw<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& e : shape) {
      e = static_cast<std::size_t>(read_raw<std::uint64_t>(in));
      n *= e;
    }
    std::vector<double> data(n);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor '" + name + "'");
    params.emplace(name, Tensor(std::move(shape), std::move(data)));
  }
  return params;
}

void restore_params(std::map<std::string, Tensor>& dst,
                    const std::map<std::string, Tensor>& loaded) {
  for (auto& [name, t] : dst) {
    const auto it = loaded.find(name);
    if (it == loaded.end()) {
      throw std::runtime_error("checkpoint: missing parameter '" + name + "'");
    }
    if (it->second.shape() != t.shape()) {
      throw std::runtime_error("checkpoint: shape mismatch for parameter '" +
                               name + "'");
    }
    t.mutable_data() = it->second.data();
  }
}

}  // namespace eaf
