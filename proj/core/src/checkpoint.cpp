#include "slotbench/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace slotbench {

namespace {

constexpr std::array<char, 16> kMagic = {'S', 'L', 'O', 'T', 'B', 'E', 'N', 'C',
                                         'H', '-', 'C', 'K', 'P', 'T', '\0', '\0'};

template <typename T>
void put_le(std::ostream& os, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw std::runtime_error("checkpoint truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

void put_string(std::ostream& os, const std::string& s) {
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto n = get_le<std::uint32_t>(is);
  if (n > (1u << 20)) throw std::runtime_error("checkpoint name too long");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw std::runtime_error("checkpoint truncated");
  return s;
}

}  // namespace

const NamedNetwork* Checkpoint::find_network(const std::string& name) const {
  for (const NamedNetwork& n : networks) {
    if (n.name == name) return &n;
  }
  return nullptr;
}

const NamedNetwork& Checkpoint::network(const std::string& name) const {
  if (const NamedNetwork* n = find_network(name)) return *n;
  throw std::runtime_error("checkpoint has no network '" + name + "'");
}

bool Checkpoint::has_scalar(const std::string& name) const {
  return std::any_of(scalars.begin(), scalars.end(),
                     [&](const auto& kv) { return kv.first == name; });
}

double Checkpoint::scalar(const std::string& name) const {
  for (const auto& [k, v] : scalars) {
    if (k == name) return v;
  }
  throw std::runtime_error("checkpoint has no scalar '" + name + "'");
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kCheckpointVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.scalars.size()));
  for (const auto& [name, value] : ckpt.scalars) {
    put_string(os, name);
    put_le<double>(os, value);
  }
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.networks.size()));
  for (const NamedNetwork& net : ckpt.networks) {
    if (net.values.size() != net.spec.param_count()) {
      throw std::runtime_error("network '" + net.name + "' parameter count mismatch");
    }
    put_string(os, net.name);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.spec.input_dim));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.spec.output_dim));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.spec.hidden.size()));
    for (int h : net.spec.hidden) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(h));
    put_le<std::uint64_t>(os, net.values.size());
    for (double v : net.values) put_le<double>(os, v);
  }
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::array<char, 16> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw std::runtime_error("not a slotbench checkpoint: " + path.string());
  }
  const auto version = get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto n_scalars = get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_scalars; ++i) {
    std::string name = get_string(is);
    ckpt.scalars.emplace_back(std::move(name), get_le<double>(is));
  }
  const auto n_nets = get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_nets; ++i) {
    NamedNetwork net;
    net.name = get_string(is);
    net.spec.input_dim = static_cast<int>(get_le<std::uint32_t>(is));
    net.spec.output_dim = static_cast<int>(get_le<std::uint32_t>(is));
    const auto n_hidden = get_le<std::uint32_t>(is);
    if (n_hidden > 64) throw std::runtime_error("checkpoint has implausible layer count");
    net.spec.hidden.clear();
    for (std::uint32_t h = 0; h < n_hidden; ++h) {
      net.spec.hidden.push_back(static_cast<int>(get_le<std::uint32_t>(is)));
    }
    net.spec.validate();
    const auto count = get_le<std::uint64_t>(is);
    if (count != net.spec.param_count()) {
      throw std::runtime_error("network '" + net.name + "' header/parameter count mismatch");
    }
    net.values.resize(count);
    for (double& v : net.values) v = get_le<double>(is);
    ckpt.networks.push_back(std::move(net));
  }
  return ckpt;
}

}  // namespace slotbench
