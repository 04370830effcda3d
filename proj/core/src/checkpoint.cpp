#include "cyclesr/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

namespace cyclesr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::uint64_t fnv1a(const std::vector<char>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("cannot open '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TensorRef {
  std::string name;
  torch::Tensor tensor;
};

std::vector<TensorRef> state_tensors(torch::nn::Module& m) {
  std::vector<TensorRef> out;
  for (const auto& p : m.named_parameters()) out.push_back({p.key(), p.value()});
  for (const auto& b : m.named_buffers()) out.push_back({b.key(), b.value()});
  return out;
}

std::string dtype_name(const torch::Tensor& t) { return std::string(c10::toString(t.scalar_type())); }

json spec_json(const ModelSpec& s) {
  return {{"translator", {{"n_res_blocks", s.translator.n_res_blocks}, {"base_width", s.translator.base_width}}},
          {"discriminator", {{"n_layers", s.discriminator.n_layers}, {"base_width", s.discriminator.base_width}}},
          {"hr_discriminator",
           {{"n_layers", s.hr_discriminator.n_layers}, {"base_width", s.hr_discriminator.base_width}}},
          {"sr",
           {{"variant", to_string(s.sr.variant)},
            {"depth", s.sr.depth},
            {"width", s.sr.width},
            {"scale", s.sr.scale}}}};
}

ModelSpec spec_from(const json& j) {
  ModelSpec s;
  s.translator.n_res_blocks = j.at("translator").at("n_res_blocks").get<int>();
  s.translator.base_width = j.at("translator").at("base_width").get<int>();
  s.discriminator.n_layers = j.at("discriminator").at("n_layers").get<int>();
  s.discriminator.base_width = j.at("discriminator").at("base_width").get<int>();
  s.hr_discriminator.n_layers = j.at("hr_discriminator").at("n_layers").get<int>();
  s.hr_discriminator.base_width = j.at("hr_discriminator").at("base_width").get<int>();
  s.sr.variant = parse_sr_variant(j.at("sr").at("variant").get<std::string>());
  s.sr.depth = j.at("sr").at("depth").get<int>();
  s.sr.width = j.at("sr").at("width").get<int>();
  s.sr.scale = j.at("sr").at("scale").get<int>();
  validate(s);
  return s;
}

struct Sidecar {
  json doc;
  std::vector<char> blob;
};

Sidecar load_sidecar(const fs::path& dir) {
  const fs::path meta_path = dir / "weights.json";
  const fs::path bin_path = dir / "weights.bin";
  if (!fs::is_directory(dir)) throw CheckpointError(fmt::format("checkpoint '{}' does not exist", dir.string()));
  Sidecar s;
  try {
    std::ifstream in(meta_path);
    if (!in) throw CheckpointError(fmt::format("checkpoint '{}' has no weights.json", dir.string()));
    s.doc = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError(fmt::format("corrupt '{}': {}", meta_path.string(), e.what()));
  }
  s.blob = read_file(bin_path);
  try {
    if (s.doc.at("format").get<int>() != kFormatVersion) {
      throw CheckpointError(fmt::format("'{}': unsupported format version", meta_path.string()));
    }
    if (s.doc.at("bytes").get<std::size_t>() != s.blob.size()) {
      throw CheckpointError(fmt::format("'{}' is truncated or padded ({} bytes, expected {})", bin_path.string(),
                                        s.blob.size(), s.doc.at("bytes").get<std::size_t>()));
    }
    if (s.doc.at("checksum").get<std::string>() != fmt::format("{:016x}", fnv1a(s.blob))) {
      throw CheckpointError(fmt::format("'{}' fails its checksum", bin_path.string()));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(fmt::format("corrupt '{}': {}", meta_path.string(), e.what()));
  }
  return s;
}

}  // namespace

std::string model_spec_to_json(const ModelSpec& spec) { return spec_json(spec).dump(); }

ModelSpec model_spec_from_json(const std::string& text) {
  try {
    return spec_from(json::parse(text));
  } catch (const json::exception& e) {
    throw CheckpointError(fmt::format("invalid model spec: {}", e.what()));
  }
}

void write_weights(const fs::path& dir, const NamedModules& nets, const WeightsMeta& meta) {
  fs::create_directories(dir);
  std::vector<char> blob;
  json networks = json::object();
  json order = json::array();
  for (const auto& [name, module] : nets) {
    json tensors = json::array();
    for (auto& [tname, tensor] : state_tensors(*module)) {
      const torch::Tensor t = tensor.detach().cpu().contiguous();
      const auto* bytes = static_cast<const char*>(t.data_ptr());
      const std::size_t n = t.numel() * t.element_size();
      tensors.push_back({{"name", tname}, {"shape", t.sizes().vec()}, {"dtype", dtype_name(t)},
                         {"offset", blob.size()}, {"bytes", n}});
      blob.insert(blob.end(), bytes, bytes + n);
    }
    networks[name] = tensors;
    order.push_back(name);
  }
  const json doc = {{"format", kFormatVersion},
                    {"model_spec", spec_json(meta.spec)},
                    {"epoch", meta.epoch},
                    {"step", meta.step},
                    {"order", order},
                    {"networks", networks},
                    {"bytes", blob.size()},
                    {"checksum", fmt::format("{:016x}", fnv1a(blob))}};
  {
    std::ofstream out(dir / "weights.bin", std::ios::binary | std::ios::trunc);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw CheckpointError(fmt::format("cannot write '{}'", (dir / "weights.bin").string()));
  }
  std::ofstream out(dir / "weights.json", std::ios::trunc);
  out << doc.dump(2) << '\n';
  if (!out) throw CheckpointError(fmt::format("cannot write '{}'", (dir / "weights.json").string()));
}

WeightsMeta read_weights_meta(const fs::path& dir) {
  const Sidecar s = load_sidecar(dir);
  try {
    WeightsMeta meta;
    meta.spec = spec_from(s.doc.at("model_spec"));
    meta.epoch = s.doc.at("epoch").get<int>();
    meta.step = s.doc.at("step").get<std::int64_t>();
    meta.networks = s.doc.at("order").get<std::vector<std::string>>();
    return meta;
  } catch (const json::exception& e) {
    throw CheckpointError(fmt::format("corrupt checkpoint '{}': {}", dir.string(), e.what()));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(fmt::format("corrupt checkpoint '{}': {}", dir.string(), e.what()));
  }
}

void read_weights(const fs::path& dir, const NamedModules& nets) {
  const Sidecar s = load_sidecar(dir);
  struct Copy {
    torch::Tensor dst;
    std::size_t offset;
    std::size_t bytes;
  };
  std::vector<Copy> plan;
  try {
    const json& stored = s.doc.at("networks");
    for (const auto& [name, module] : nets) {
      if (!stored.contains(name)) {
        throw CheckpointError(fmt::format("checkpoint '{}' has no network '{}'", dir.string(), name));
      }
      const json& entries = stored.at(name);
      auto tensors = state_tensors(*module);
      if (entries.size() != tensors.size()) {
        throw CheckpointError(fmt::format("network '{}': checkpoint has {} tensors, model has {}", name,
                                          entries.size(), tensors.size()));
      }
      for (std::size_t i = 0; i < tensors.size(); ++i) {
        const json& e = entries[i];
        const auto& t = tensors[i];
        if (e.at("name").get<std::string>() != t.name || e.at("shape").get<std::vector<std::int64_t>>() != t.tensor.sizes().vec() ||
            e.at("dtype").get<std::string>() != dtype_name(t.tensor)) {
          throw CheckpointError(fmt::format("network '{}': tensor '{}' does not match the model", name,
                                            e.at("name").get<std::string>()));
        }
        const std::size_t offset = e.at("offset").get<std::size_t>();
        const std::size_t bytes = e.at("bytes").get<std::size_t>();
        if (bytes != static_cast<std::size_t>(t.tensor.numel() * t.tensor.element_size()) || offset + bytes > s.blob.size()) {
          throw CheckpointError(fmt::format("network '{}': tensor '{}' has a bad byte range", name, t.name));
        }
        plan.push_back({t.tensor, offset, bytes});
      }
    }
  } catch (const json::exception& e) {
    throw CheckpointError(fmt::format("corrupt checkpoint '{}': {}", dir.string(), e.what()));
  }
  torch::NoGradGuard no_grad;
  for (const auto& c : plan) {
    torch::Tensor staging = torch::empty_like(c.dst, torch::MemoryFormat::Contiguous);
    std::memcpy(staging.data_ptr(), s.blob.data() + c.offset, c.bytes);
    c.dst.copy_(staging);
  }
}

NetworkPtr load_sr_network(const fs::path& dir) {
  const WeightsMeta meta = read_weights_meta(dir);
  NetworkPtr net = build_sr_network(meta.spec, 0);
  read_weights(dir, {{"g_l2h", net.get()}});
  net->eval();
  return net;
}

}  // namespace cyclesr
