#include "saga/container.hpp"

#include "saga/errors.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace saga {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'A', 'G', 'A', 'W', 'I', 'N', '1'};

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ValidationError("truncated container: " + path.string());
  return v;
}

}  // namespace

std::filesystem::path labels_path(const std::filesystem::path& container) {
  auto p = container;
  p.replace_extension(".labels");
  return p;
}

void write_windows(const std::filesystem::path& container, const WindowSet& set) {
  const auto d = static_cast<Index>(set.layout.size());
  for (const auto& w : set.windows)
    if (w.values.rows() != set.window_length || w.values.cols() != d)
      throw ValidationError("write_windows: window shape does not match the set header");

  std::ofstream out(container, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + container.string() + "'");
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.window_length));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  put<std::uint64_t>(out, set.windows.size());
  for (const auto& ch : set.layout) put<std::uint8_t>(out, static_cast<std::uint8_t>(static_cast<int>(ch.kind) * 3 + ch.axis));
  for (const auto& w : set.windows)
    for (Index r = 0; r < w.values.rows(); ++r)
      for (Index c = 0; c < d; ++c) put<float>(out, static_cast<float>(w.values(r, c)));

  std::ofstream labels(labels_path(container));
  for (const auto& w : set.windows) {
    if (w.label) labels << *w.label << '\n';
    else labels << "-\n";
  }
}

WindowSet read_windows(const std::filesystem::path& container) {
  std::ifstream in(container, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + container.string() + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ValidationError("not a window container: " + container.string());

  WindowSet set;
  set.window_length = get<std::uint32_t>(in, container);
  const auto d = get<std::uint32_t>(in, container);
  const auto count = get<std::uint64_t>(in, container);
  for (std::uint32_t c = 0; c < d; ++c) {
    const auto code = get<std::uint8_t>(in, container);
    if (code > 8) throw ValidationError("bad channel code in " + container.string());
    set.layout.push_back({static_cast<SensorKind>(code / 3), code % 3});
  }

  std::vector<std::optional<int>> labels(count);
  if (std::ifstream lf(labels_path(container)); lf) {
    std::string line;
    for (std::uint64_t i = 0; i < count; ++i) {
      if (!std::getline(lf, line)) throw ParseError("label sidecar is shorter than the container", i + 1);
      if (line != "-") labels[i] = std::stoi(line);
    }
  }

  set.windows.resize(count);
  std::vector<float> buf(static_cast<std::size_t>(set.window_length) * d);
  for (std::uint64_t i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float))))
      throw ValidationError("truncated container: " + container.string());
    auto& w = set.windows[i];
    w.values.resize(set.window_length, d);
    for (Index r = 0; r < set.window_length; ++r)
      for (Index c = 0; c < d; ++c) w.values(r, c) = buf[static_cast<std::size_t>(r * d + c)];
    w.label = labels[i];
  }
  return set;
}

}  // namespace saga
