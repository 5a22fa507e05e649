#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "slotbench/neural.hpp"

namespace slotbench {

/// On-disk layout (all integers and reals little-endian):
///   16-byte magic "SLOTBENCH-CKPT\0\0", u32 version,
///   u32 scalar count, { u32 name length, name bytes, f64 value } ...,
///   u32 network count, { u32 name length, name bytes, u32 input_dim, u32 output_dim,
///                        u32 hidden count, u32 hidden widths..., u64 param count,
///                        f64 params... } ...
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedNetwork {
  std::string name;
  MlpSpec spec;
  std::vector<double> values;
};

struct Checkpoint {
  std::vector<std::pair<std::string, double>> scalars;
  std::vector<NamedNetwork> networks;

  const NamedNetwork& network(const std::string& name) const;
  const NamedNetwork* find_network(const std::string& name) const;
  double scalar(const std::string& name) const;
  bool has_scalar(const std::string& name) const;
};

/// Throws std::runtime_error on I/O failure.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws std::runtime_error on I/O failure, bad magic, or an unsupported version.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace slotbench
