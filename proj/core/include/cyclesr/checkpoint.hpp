#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "cyclesr/nets.hpp"

namespace cyclesr {

/// Missing, truncated, corrupt or mismatched checkpoint data.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const std::string& text);

using NamedModules = std::vector<std::pair<std::string, torch::nn::Module*>>;

struct WeightsMeta {
  ModelSpec spec;
  int epoch = 0;
  std::int64_t step = 0;
  std::vector<std::string> networks;
};

/// Writes <dir>/weights.bin (raw little-endian tensor bytes: parameters, then
/// buffers, network by network) and <dir>/weights.json (model spec, tensor
/// names, shapes, dtypes, byte offsets, step, epoch and an FNV-1a checksum of
/// the binary).
void write_weights(const std::filesystem::path& dir, const NamedModules& nets, const WeightsMeta& meta);

/// Reads and validates the sidecar (the binary's size and checksum included).
WeightsMeta read_weights_meta(const std::filesystem::path& dir);

/// Copies the stored tensors into `nets`. Every listed network must be in the
/// checkpoint with identical tensor names and shapes; nothing is modified
/// unless all of them validate.
void read_weights(const std::filesystem::path& dir, const NamedModules& nets);

/// Rebuilds the SR network from the checkpoint's model spec, loads its
/// weights and switches it to eval mode.
NetworkPtr load_sr_network(const std::filesystem::path& dir);

}  // namespace cyclesr
