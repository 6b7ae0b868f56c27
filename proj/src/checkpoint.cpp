#include "saga/checkpoint.hpp"

#include "saga/config.hpp"
#include "saga/errors.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <map>
#include <sstream>

namespace saga {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'A', 'G', 'A', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ValidationError("truncated checkpoint");
  return v;
}

std::filesystem::path config_path(const std::filesystem::path& ckpt) {
  auto p = ckpt;
  p += ".cfg";
  return p;
}

}  // namespace

std::string encoder_config_text(const EncoderConfig& cfg) {
  std::ostringstream out;
  out << "[model]\n"
      << "input_dim = " << cfg.input_dim << "\n"
      << "max_len = " << cfg.max_len << "\n"
      << "hidden_dim = " << cfg.hidden_dim << "\n"
      << "n_blocks = " << cfg.n_blocks << "\n"
      << "n_heads = " << cfg.n_heads << "\n"
      << "ff_dim = " << cfg.ff_dim << "\n"
      << "gru_dim = " << cfg.gru_dim << "\n"
      << "n_classes = " << cfg.n_classes << "\n";
  return out.str();
}

EncoderConfig parse_encoder_config(const std::string& text) {
  const auto kv = KeyValueConfig::parse(text);
  EncoderConfig cfg;
  cfg.input_dim = static_cast<int>(kv.get_int("model.input_dim"));
  cfg.max_len = static_cast<int>(kv.get_int("model.max_len"));
  cfg.hidden_dim = static_cast<int>(kv.get_int("model.hidden_dim"));
  cfg.n_blocks = static_cast<int>(kv.get_int("model.n_blocks"));
  cfg.n_heads = static_cast<int>(kv.get_int("model.n_heads"));
  cfg.ff_dim = static_cast<int>(kv.get_int("model.ff_dim"));
  cfg.gru_dim = static_cast<int>(kv.get_int("model.gru_dim"));
  cfg.n_classes = static_cast<int>(kv.get_int("model.n_classes"));
  validate(cfg);
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint '" + path.string() + "'");
  std::uint32_t count = 0;
  for_each_tensor([&](const std::string&, const Matrix&) { ++count; }, params);
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, count);
  for_each_tensor(
      [&](const std::string& name, const Matrix& m) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
        for (Index r = 0; r < m.rows(); ++r)
          for (Index c = 0; c < m.cols(); ++c) put<float>(out, static_cast<float>(m(r, c)));
      },
      params);
  std::ofstream cfg(config_path(path));
  cfg << encoder_config_text(params.config);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream cfg_in(config_path(path));
  if (!cfg_in) throw ValidationError("missing model config '" + config_path(path).string() + "'");
  std::stringstream cfg_text;
  cfg_text << cfg_in.rdbuf();
  ModelParams params = ModelParams::zeros(parse_encoder_config(cfg_text.str()));

  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint '" + path.string() + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ValidationError("not a checkpoint: " + path.string());

  std::map<std::string, Matrix> tensors;
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(get<std::uint32_t>(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    Matrix m(rows, cols);
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = get<float>(in);
    tensors.emplace(std::move(name), std::move(m));
  }
  for_each_tensor(
      [&](const std::string& name, Matrix& m) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ValidationError("checkpoint lacks tensor '" + name + "'");
        if (it->second.rows() != m.rows() || it->second.cols() != m.cols())
          throw ValidationError("checkpoint tensor '" + name + "' has the wrong shape");
        m = it->second;
      },
      params);
  return params;
}

}  // namespace saga
