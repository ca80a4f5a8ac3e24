#include "aemcarl/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace aemcarl {

namespace {

constexpr std::array<char, 8> kMagic{'A', 'E', 'M', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"aem",
       {{"input_dim", c.aem.input_dim},
        {"hidden", c.aem.hidden},
        {"mlp_hidden", c.aem.mlp_hidden},
        {"max_iters", c.aem.max_iters},
        {"eps", c.aem.eps},
        {"shared_weights", c.aem.shared_weights},
        {"fixed_n", c.aem.fixed_n},
        {"persistent_hidden", c.aem.persistent_hidden}}},
      {"tf",
       {{"input_dim", c.tf.input_dim},
        {"model_dim", c.tf.model_dim},
        {"heads", c.tf.heads},
        {"ff_dim", c.tf.ff_dim},
        {"residual", c.tf.residual}}},
      {"head_hidden", c.head_hidden},
      {"agent_fields", c.agent_fields},
      {"seed", c.seed},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  const auto& a = j.at("aem");
  c.aem.input_dim = a.at("input_dim").get<Eigen::Index>();
  c.aem.hidden = a.at("hidden").get<Eigen::Index>();
  c.aem.mlp_hidden = a.at("mlp_hidden").get<Eigen::Index>();
  c.aem.max_iters = a.at("max_iters").get<int>();
  c.aem.eps = a.at("eps").get<double>();
  c.aem.shared_weights = a.at("shared_weights").get<bool>();
  c.aem.fixed_n = a.at("fixed_n").get<int>();
  c.aem.persistent_hidden = a.at("persistent_hidden").get<bool>();
  const auto& t = j.at("tf");
  c.tf.input_dim = t.at("input_dim").get<Eigen::Index>();
  c.tf.model_dim = t.at("model_dim").get<Eigen::Index>();
  c.tf.heads = t.at("heads").get<int>();
  c.tf.ff_dim = t.at("ff_dim").get<Eigen::Index>();
  c.tf.residual = t.at("residual").get<bool>();
  c.head_hidden = j.at("head_hidden").get<std::vector<Eigen::Index>>();
  c.agent_fields = j.at("agent_fields").get<Eigen::Index>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void save_checkpoint(const std::string& path, ValueNetwork& net, const nlohmann::json& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");

  const nlohmann::json header{{"model", to_json(net.config())}, {"meta", meta}};
  const std::string text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  const auto params = net.parameters();
  write_pod(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    write_pod(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_pod(out, std::uint32_t{2});
    write_pod(out, static_cast<std::uint64_t>(p->value.rows()));
    write_pod(out, static_cast<std::uint64_t>(p->value.cols()));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(p->value.size())));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("checkpoint: bad magic in " + path);
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto header_len = read_pod<std::uint64_t>(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  const auto header = nlohmann::json::parse(text);

  LoadedCheckpoint loaded{ValueNetwork(model_config_from_json(header.at("model"))),
                          header.value("meta", nlohmann::json::object())};
  auto params = loaded.net.parameters();
  const auto count = read_pod<std::uint32_t>(in);
  if (count != params.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
  for (auto* p : params) {
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (name != p->name) throw std::runtime_error("checkpoint: expected " + p->name + ", found " + name);
    const auto rank = read_pod<std::uint32_t>(in);
    if (rank != 2) throw std::runtime_error("checkpoint: unsupported rank for " + name);
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    if (rows != static_cast<std::uint64_t>(p->value.rows()) ||
        cols != static_cast<std::uint64_t>(p->value.cols())) {
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    }
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) throw std::runtime_error("checkpoint: truncated data for " + name);
  }
  return loaded;
}

}  // namespace aemcarl
