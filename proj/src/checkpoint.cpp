#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "azarnet/model.hpp"

namespace azarnet {

using nlohmann::json;

namespace {

json config_json(const ModelConfig& c) {
  return json{{"input_shape", c.input_shape},
              {"conv_filters", c.conv_filters},
              {"dropout_rates", c.dropout_rates},
              {"gru_units", c.gru_units},
              {"bottleneck", c.bottleneck},
              {"classes", c.classes},
              {"leaky_alpha", c.leaky_alpha},
              {"bn_momentum", c.bn_momentum},
              {"bn_epsilon", c.bn_epsilon},
              {"l1", c.l1},
              {"l2", c.l2},
              {"activity_l1", c.activity_l1},
              {"activity_l2", c.activity_l2},
              {"seed", c.seed}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  j.at("input_shape").get_to(c.input_shape);
  j.at("conv_filters").get_to(c.conv_filters);
  j.at("dropout_rates").get_to(c.dropout_rates);
  j.at("gru_units").get_to(c.gru_units);
  j.at("bottleneck").get_to(c.bottleneck);
  j.at("classes").get_to(c.classes);
  j.at("leaky_alpha").get_to(c.leaky_alpha);
  j.at("bn_momentum").get_to(c.bn_momentum);
  j.at("bn_epsilon").get_to(c.bn_epsilon);
  j.at("l1").get_to(c.l1);
  j.at("l2").get_to(c.l2);
  j.at("activity_l1").get_to(c.activity_l1);
  j.at("activity_l2").get_to(c.activity_l2);
  j.at("seed").get_to(c.seed);
  return c;
}

}  // namespace

std::string config_to_json(const ModelConfig& cfg) { return config_json(cfg).dump(2); }

ModelConfig config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config JSON: ") + e.what());
  }
}

void save_checkpoint(Model& model, const std::string& path) {
  std::vector<std::uint8_t> blobs;
  json directory = json::array();
  for (auto& p : model.parameters()) {
    const auto bytes = encode_tensor(*p.ref.value);
    directory.push_back({{"name", p.name}, {"offset", blobs.size()}, {"size", bytes.size()}});
    blobs.insert(blobs.end(), bytes.begin(), bytes.end());
  }
  const json header{{"format", "azarnet-checkpoint"},
                    {"version", kCheckpointVersion},
                    {"config", config_json(model.config())},
                    {"class_names", model.class_names()},
                    {"tensors", directory}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(kCheckpointMagic, 8);
  const std::uint64_t len = text.size();
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((len >> (8 * i)) & 0xFF));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(blobs.data()), static_cast<std::streamsize>(blobs.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw CheckpointError(path + ": not an azarnet checkpoint (bad magic, expected " +
                          std::string(kCheckpointMagic) + ")");
  }
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= std::uint64_t(bytes[8 + i]) << (8 * i);
  if (len > bytes.size() - 16) throw CheckpointError(path + ": header truncated");

  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::exception& e) {
    throw CheckpointError(path + ": corrupt header: " + e.what());
  }
  const std::size_t blob_start = 16 + len;

  try {
    const int version = header.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError(path + ": unsupported checkpoint version " + std::to_string(version) +
                            " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
    }
    Model model(config_from(header.at("config")));
    if (header.at("class_names").get<std::vector<std::string>>() != model.class_names()) {
      throw CheckpointError(path + ": class names do not match the model config");
    }

    std::map<std::string, std::pair<std::size_t, std::size_t>> dir;
    for (const auto& entry : header.at("tensors")) {
      dir[entry.at("name").get<std::string>()] = {entry.at("offset").get<std::size_t>(),
                                                  entry.at("size").get<std::size_t>()};
    }
    for (auto& p : model.parameters()) {
      const auto it = dir.find(p.name);
      if (it == dir.end()) throw CheckpointError(path + ": missing tensor '" + p.name + "'");
      const auto [offset, size] = it->second;
      if (offset > bytes.size() - blob_start || size > bytes.size() - blob_start - offset) {
        throw CheckpointError(path + ": tensor '" + p.name + "' lies outside the file");
      }
      Tensor t;
      try {
        t = decode_tensor(std::span<const std::uint8_t>(bytes.data() + blob_start + offset, size));
      } catch (const CorruptFileError& e) {
        throw CheckpointError(path + ": corrupt tensor '" + p.name + "': " + e.what());
      }
      if (t.shape() != p.ref.value->shape()) {
        throw CheckpointError(path + ": tensor '" + p.name + "' has shape " + shape_to_string(t.shape()) +
                              ", model expects " + shape_to_string(p.ref.value->shape()));
      }
      *p.ref.value = std::move(t);
    }
    return model;
  } catch (const json::exception& e) {
    throw CheckpointError(path + ": malformed header: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(path + ": invalid model config: " + e.what());
  }
}

}  // namespace azarnet
