#include "saga/imu_io.hpp"

#include "saga/errors.hpp"
#include "saga/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace saga {

ChannelLayout default_layout(bool with_magnetometer) {
  ChannelLayout layout;
  for (auto kind : {SensorKind::Accelerometer, SensorKind::Gyroscope, SensorKind::Magnetometer}) {
    if (kind == SensorKind::Magnetometer && !with_magnetometer) break;
    for (int axis = 0; axis < 3; ++axis) layout.push_back({kind, axis});
  }
  return layout;
}

std::vector<Index> columns_of(const ChannelLayout& layout, SensorKind kind) {
  std::vector<Index> cols;
  for (std::size_t c = 0; c < layout.size(); ++c)
    if (layout[c].kind == kind) cols.push_back(static_cast<Index>(c));
  return cols;
}

std::string to_string(SensorKind kind) {
  switch (kind) {
    case SensorKind::Accelerometer: return "acc";
    case SensorKind::Gyroscope: return "gyro";
    case SensorKind::Magnetometer: return "mag";
  }
  return "?";
}

std::string to_string(const Channel& channel) {
  return to_string(channel.kind) + "." + static_cast<char>('x' + channel.axis);
}

namespace {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

Channel parse_channel(const std::string& spec, std::size_t line) {
  const auto dot = spec.find('.');
  if (dot == std::string::npos || dot + 2 != spec.size())
    throw ParseError("channel must look like acc.x, got '" + spec + "'", line);
  const auto sensor = spec.substr(0, dot);
  Channel ch;
  if (sensor == "acc") ch.kind = SensorKind::Accelerometer;
  else if (sensor == "gyro") ch.kind = SensorKind::Gyroscope;
  else if (sensor == "mag") ch.kind = SensorKind::Magnetometer;
  else throw ParseError("unknown sensor '" + sensor + "'", line);
  const char axis = spec.back();
  if (axis < 'x' || axis > 'z') throw ParseError("unknown axis in '" + spec + "'", line);
  ch.axis = axis - 'x';
  return ch;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

}  // namespace

ChannelLayout CsvSchema::layout() const {
  ChannelLayout l;
  for (const auto& [name, ch] : channels) l.push_back(ch);
  return l;
}

void validate_layout(const ChannelLayout& layout) {
  if (layout.empty()) throw ValidationError("channel layout is empty");
  for (auto kind : {SensorKind::Accelerometer, SensorKind::Gyroscope, SensorKind::Magnetometer}) {
    std::array<int, 3> seen{};
    for (const auto& ch : layout)
      if (ch.kind == kind) ++seen[static_cast<std::size_t>(ch.axis)];
    const int total = seen[0] + seen[1] + seen[2];
    if (total != 0 && !(seen[0] == 1 && seen[1] == 1 && seen[2] == 1))
      throw ValidationError("sensor " + to_string(kind) + " must provide exactly one x, y and z channel");
  }
}

CsvSchema parse_schema(const std::string& text) {
  CsvSchema schema;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  bool have_rate = false;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError("empty key or value", line_no);
    if (key == "rate_hz") {
      if (!parse_double(value, schema.rate_hz) || schema.rate_hz <= 0.0)
        throw ParseError("rate_hz must be a positive number", line_no);
      have_rate = true;
    } else if (key == "label_column") {
      schema.label_column = value;
    } else if (key == "subject_column") {
      schema.subject_column = value;
    } else if (key == "session_column") {
      schema.session_column = value;
    } else {
      schema.channels.emplace_back(key, parse_channel(value, line_no));
    }
  }
  if (!have_rate) throw ValidationError("schema: missing field 'rate_hz'");
  validate_layout(schema.layout());
  return schema;
}

CsvSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("schema: cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_schema(buf.str());
}

std::vector<RawRecording> parse_recordings(std::istream& in, const CsvSchema& schema) {
  validate_layout(schema.layout());
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw EmptyInputError("csv: empty input");

  auto find_col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> channel_cols;
  for (const auto& [name, ch] : schema.channels) {
    auto col = find_col(name);
    if (!col) throw ParseError("header lacks column '" + name + "'", 1);
    channel_cols.push_back(*col);
  }
  const auto label_col = find_col(schema.label_column);
  const auto subject_col = find_col(schema.subject_column);
  const auto session_col = find_col(schema.session_column);

  struct Group {
    std::optional<std::string> subject, session;
    std::optional<int> label;
    std::vector<std::vector<double>> rows;
  };
  std::vector<Group> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> open_group;  // key -> index into groups

  const std::size_t d = channel_cols.size();
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()),
                       line_no);
    std::vector<double> row(d);
    for (std::size_t c = 0; c < d; ++c)
      if (!parse_double(cells[channel_cols[c]], row[c]))
        throw ParseError("non-numeric value '" + cells[channel_cols[c]] + "' in column '" + header[channel_cols[c]] +
                             "'",
                         line_no);
    std::optional<int> label;
    if (label_col && !cells[*label_col].empty()) {
      double v = 0.0;
      if (!parse_double(cells[*label_col], v) || v != std::floor(v) || v < 0)
        throw ParseError("label must be a non-negative integer, got '" + cells[*label_col] + "'", line_no);
      label = static_cast<int>(v);
    }
    std::optional<std::string> subject, session;
    if (subject_col) subject = cells[*subject_col];
    if (session_col) session = cells[*session_col];

    const auto key = std::make_pair(subject.value_or(""), session.value_or(""));
    auto it = open_group.find(key);
    if (it == open_group.end() || groups[it->second].label != label) {
      groups.push_back({subject, session, label, {}});
      open_group[key] = groups.size() - 1;
      it = open_group.find(key);
    }
    groups[it->second].rows.push_back(std::move(row));
  }
  if (groups.empty()) throw EmptyInputError("csv: no data rows");

  std::vector<RawRecording> out;
  out.reserve(groups.size());
  for (auto& g : groups) {
    RawRecording rec;
    rec.samples.resize(static_cast<Index>(g.rows.size()), static_cast<Index>(d));
    for (std::size_t r = 0; r < g.rows.size(); ++r)
      for (std::size_t c = 0; c < d; ++c) rec.samples(static_cast<Index>(r), static_cast<Index>(c)) = g.rows[r][c];
    rec.rate_hz = schema.rate_hz;
    rec.layout = schema.layout();
    rec.label = g.label;
    rec.subject = g.subject;
    rec.session = g.session;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<RawRecording> load_recordings(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("csv: cannot open '" + path.string() + "'");
  return parse_recordings(in, schema);
}

RawRecording normalize(const RawRecording& rec, std::size_t* zero_norm_count) {
  if (static_cast<Index>(rec.layout.size()) != rec.dims())
    throw ValidationError("normalize: layout does not match sample width");
  RawRecording out = rec;
  for (Index c : columns_of(rec.layout, SensorKind::Accelerometer)) out.samples.col(c) /= kStandardGravity;

  const auto mag = columns_of(rec.layout, SensorKind::Magnetometer);
  std::size_t zeros = 0;
  if (!mag.empty()) {
    for (Index r = 0; r < out.size(); ++r) {
      double sq = 0.0;
      for (Index c : mag) sq += out.samples(r, c) * out.samples(r, c);
      if (sq == 0.0) {
        ++zeros;
        continue;
      }
      const double norm = std::sqrt(sq);
      for (Index c : mag) out.samples(r, c) /= norm;
    }
  }
  if (zero_norm_count) *zero_norm_count = zeros;
  return out;
}

RawRecording resample(const RawRecording& rec, double target_hz) {
  if (!(target_hz > 0.0)) throw ValidationError("resample: target rate must be positive");
  if (target_hz > rec.rate_hz) throw ValidationError("resample: upsampling is not supported");
  const Index n = rec.size();
  const double ratio = rec.rate_hz / target_hz;
  const Index m = static_cast<Index>(std::floor(static_cast<double>(n) * target_hz / rec.rate_hz + 1e-9));

  const double k = std::round(ratio);
  const bool integer_ratio = std::abs(ratio - k) < 1e-9;

  RawRecording out = rec;
  out.rate_hz = target_hz;
  out.samples.resize(m, rec.dims());
  for (Index j = 0; j < m; ++j) {
    Index src = 0;
    if (integer_ratio) {
      src = j * static_cast<Index>(k);
    } else {
      // nearest source index to time j / target_hz; exact halves go to the earlier sample
      src = static_cast<Index>(std::ceil(static_cast<double>(j) * ratio - 0.5));
    }
    src = std::clamp<Index>(src, 0, n - 1);
    out.samples.row(j) = rec.samples.row(src);
  }
  return out;
}

WindowList slice_windows(const RawRecording& rec, Index window_length) {
  if (window_length < 2) throw ValidationError("slice_windows: window length must be >= 2");
  WindowList out;
  const Index count = rec.size() / window_length;
  out.reserve(static_cast<std::size_t>(count));
  for (Index w = 0; w < count; ++w)
    out.push_back({rec.samples.middleRows(w * window_length, window_length), rec.label});
  return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
  const auto dn = static_cast<double>(n);
  const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * dn + 1e-9));
  const auto n_valid = static_cast<std::size_t>(std::floor(ratios.valid * dn + 1e-9));
  return {n_train, n_valid, n - n_train - n_valid};
}

DatasetSplit split_dataset(const WindowList& windows, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.valid <= 0 || ratios.test <= 0)
    throw ValidationError("split_dataset: ratios must be positive");
  if (std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9)
    throw ValidationError("split_dataset: ratios must sum to 1");
  if (windows.size() < 3) throw InsufficientDataError("split_dataset: need at least 3 windows");

  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto [n_train, n_valid, n_test] = split_sizes(windows.size(), ratios);
  DatasetSplit split;
  split.seed = seed;
  split.train_index.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.valid_index.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                           order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  split.test_index.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), order.end());
  for (auto i : split.train_index) split.train.push_back(windows[i]);
  for (auto i : split.valid_index) split.valid.push_back(windows[i]);
  for (auto i : split.test_index) split.test.push_back(windows[i]);
  return split;
}

std::vector<std::size_t> subsample_label_indices(const WindowList& train, double rate, std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ValidationError("subsample_labels: rate must lie in (0, 1]");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!train[i].label) throw ValidationError("subsample_labels: window " + std::to_string(i) + " has no label");
    by_class[*train[i].label].push_back(i);
  }
  std::vector<std::size_t> picked;
  for (auto& [cls, members] : by_class) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(cls)}));
    std::shuffle(members.begin(), members.end(), rng);
    const auto take = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(members.size()) - 1e-9));
    picked.insert(picked.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

WindowList subsample_labels(const WindowList& train, double rate, std::uint64_t seed) {
  WindowList out;
  for (auto i : subsample_label_indices(train, rate, seed)) out.push_back(train[i]);
  return out;
}

}  // namespace saga
