#include "saga/container.hpp"
#include "saga/errors.hpp"
#include "saga/imu_io.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace saga;

namespace {

const char* kSchemaAG =
    "rate_hz = 100\n"
    "ax = acc.x\nay = acc.y\naz = acc.z\n"
    "gx = gyro.x\ngy = gyro.y\ngz = gyro.z\n";

std::string csv_rows(int n, int label = 0, const std::string& subject = "s1") {
  std::ostringstream os;
  for (int i = 0; i < n; ++i)
    os << i << "," << 2 * i << "," << 9.80665 << "," << 0.1 * i << ",0,1.7," << label << "," << subject << ",r1\n";
  return os.str();
}

const char* kHeader = "ax,ay,az,gx,gy,gz,label,subject,session\n";

RawRecording ramp(Index n, double rate, Index dims = 6) {
  RawRecording r;
  r.samples.resize(n, dims);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < dims; ++c) r.samples(i, c) = static_cast<double>(i) + 1000.0 * static_cast<double>(c);
  r.rate_hz = rate;
  r.layout = default_layout(dims == 9);
  return r;
}

WindowList labelled_windows(const std::vector<int>& per_class) {
  WindowList out;
  int id = 0;
  for (std::size_t c = 0; c < per_class.size(); ++c)
    for (int i = 0; i < per_class[c]; ++i) out.push_back({Matrix::Constant(2, 1, id++), static_cast<int>(c)});
  return out;
}

int window_id(const SampleWindow& w) { return static_cast<int>(w.values(0, 0)); }

}  // namespace

TEST(Schema, ParsesChannelsInFileOrder) {
  const auto schema = parse_schema(kSchemaAG);
  EXPECT_DOUBLE_EQ(schema.rate_hz, 100.0);
  ASSERT_EQ(schema.channels.size(), 6u);
  EXPECT_EQ(schema.layout(), default_layout());
  EXPECT_EQ(schema.label_column, "label");
}

TEST(Schema, RejectsIncompleteTriples) {
  EXPECT_THROW(parse_schema("rate_hz = 50\nax = acc.x\nay = acc.y\n"), ValidationError);
  EXPECT_THROW(parse_schema("ax = acc.x\nay = acc.y\naz = acc.z\n"), ValidationError);
  EXPECT_THROW(parse_schema("rate_hz = 50\nax = acc.w\n"), ValidationError);
}

TEST(LoadRecordings, SixHundredRowsGiveOneRecording) {
  std::istringstream in(std::string(kHeader) + csv_rows(600));
  const auto recs = parse_recordings(in, parse_schema(kSchemaAG));
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].dims(), 6);
  EXPECT_EQ(recs[0].size(), 600);
  EXPECT_EQ(recs[0].label, 0);
  EXPECT_DOUBLE_EQ(recs[0].samples(599, 1), 1198.0);
}

TEST(LoadRecordings, NonNumericCellCitesLine) {
  std::string body = std::string(kHeader) + csv_rows(30);
  std::istringstream lines(body);
  std::ostringstream edited;
  std::string line;
  for (int n = 1; std::getline(lines, line); ++n) edited << (n == 17 ? "1,2,oops,4,5,6,0,s1,r1" : line) << "\n";
  std::istringstream in(edited.str());
  try {
    parse_recordings(in, parse_schema(kSchemaAG));
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 17u);
    EXPECT_NE(std::string(e.what()).find("17"), std::string::npos);
  }
}

TEST(LoadRecordings, EmptyFileIsAnError) {
  std::istringstream in("");
  EXPECT_THROW(parse_recordings(in, parse_schema(kSchemaAG)), EmptyInputError);
}

TEST(LoadRecordings, GroupsBySubjectAndSession) {
  std::istringstream in(std::string(kHeader) + csv_rows(10, 0, "a") + csv_rows(7, 0, "b") + csv_rows(5, 0, "a"));
  const auto recs = parse_recordings(in, parse_schema(kSchemaAG));
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].subject, "a");
  EXPECT_EQ(recs[0].size(), 15);
  EXPECT_EQ(recs[1].size(), 7);
  // order preserved inside the group
  EXPECT_DOUBLE_EQ(recs[0].samples(10, 0), 0.0);
}

TEST(LoadRecordings, LabelChangeSplitsGroup) {
  std::istringstream in(std::string(kHeader) + csv_rows(4, 1) + csv_rows(6, 2));
  const auto recs = parse_recordings(in, parse_schema(kSchemaAG));
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].label, 1);
  EXPECT_EQ(recs[1].label, 2);
  EXPECT_EQ(recs[1].size(), 6);
}

TEST(Normalize, AccelByGravityMagToUnitGyroUntouched) {
  RawRecording r;
  r.layout = default_layout(true);
  r.rate_hz = 20;
  r.samples.resize(2, 9);
  r.samples.row(0) << 9.80665, 0, -9.80665, 1.7, -2, 0, 3, 4, 0;
  r.samples.row(1) << 0, 0, 0, 0, 0, 0, 0, 0, 0;
  std::size_t zeros = 0;
  const auto n = normalize(r, &zeros);
  EXPECT_DOUBLE_EQ(n.samples(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(n.samples(0, 2), -1.0);
  EXPECT_DOUBLE_EQ(n.samples(0, 3), 1.7);
  EXPECT_DOUBLE_EQ(n.samples(0, 6), 0.6);
  EXPECT_DOUBLE_EQ(n.samples(0, 7), 0.8);
  EXPECT_DOUBLE_EQ(n.samples(0, 8), 0.0);
  EXPECT_TRUE(n.samples.row(1).isZero(0.0));
  EXPECT_EQ(zeros, 1u);
  EXPECT_EQ(n.samples.rows(), 2);
  EXPECT_EQ(n.samples.cols(), 9);
}

TEST(Normalize, MagnetometerRowsHaveUnitOrZeroNorm) {
  RawRecording r = ramp(50, 20, 9);
  r.samples.row(7).tail(3).setZero();
  const auto n = normalize(r);
  for (Index i = 0; i < n.size(); ++i) {
    const double norm = n.samples.row(i).tail(3).norm();
    EXPECT_TRUE(norm == 0.0 || std::abs(norm - 1.0) < 1e-12) << "row " << i;
  }
}

TEST(Resample, IntegerRatioDecimates) {
  const auto out = resample(ramp(500, 100), 20);
  ASSERT_EQ(out.size(), 100);
  EXPECT_DOUBLE_EQ(out.rate_hz, 20.0);
  for (Index j = 0; j < out.size(); ++j) EXPECT_DOUBLE_EQ(out.samples(j, 0), 5.0 * static_cast<double>(j));
}

TEST(Resample, FractionalRatioMatchesNearestTimeOracle) {
  const Index n = 137;
  const auto in = ramp(n, 50);
  const auto out = resample(in, 20);
  ASSERT_EQ(out.size(), static_cast<Index>(std::floor(static_cast<double>(n) * 20.0 / 50.0)));
  for (Index j = 0; j < out.size(); ++j) {
    // brute force: closest source time to j/20, earliest on ties
    const double t = static_cast<double>(j) / 20.0;
    Index best = 0;
    for (Index i = 1; i < n; ++i)
      if (std::abs(static_cast<double>(i) / 50.0 - t) < std::abs(static_cast<double>(best) / 50.0 - t) - 1e-12)
        best = i;
    EXPECT_DOUBLE_EQ(out.samples(j, 0), in.samples(best, 0)) << "j=" << j;
  }
}

TEST(Resample, UpsamplingRejected) { EXPECT_THROW(resample(ramp(100, 100), 200), ValidationError); }

TEST(SliceWindows, CountsAndRemainder) {
  EXPECT_EQ(slice_windows(ramp(600, 20), 120).size(), 5u);
  EXPECT_TRUE(slice_windows(ramp(119, 20), 120).empty());
  const auto one = slice_windows(ramp(125, 20), 120);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one[0].values(119, 0), 119.0);
  EXPECT_THROW(slice_windows(ramp(10, 20), 1), ValidationError);
}

TEST(SliceWindows, ConcatenationIsPrefixAndLabelInherited) {
  auto rec = ramp(517, 20);
  rec.label = 3;
  const auto ws = slice_windows(rec, 50);
  ASSERT_EQ(ws.size(), 10u);
  for (std::size_t k = 0; k < ws.size(); ++k) {
    EXPECT_EQ(ws[k].label, 3);
    EXPECT_EQ(ws[k].values, rec.samples.middleRows(static_cast<Index>(k) * 50, 50));
  }
}

TEST(Split, SizesFloorWithRemainderToTest) {
  EXPECT_EQ(split_sizes(10, {}), (std::array<std::size_t, 3>{6, 2, 2}));
  EXPECT_EQ(split_sizes(9166, {}), (std::array<std::size_t, 3>{5499, 1833, 1834}));
}

TEST(Split, PartitionsAndIsDeterministic) {
  const auto ws = labelled_windows({7, 9, 11});
  const auto a = split_dataset(ws, {}, 42);
  const auto b = split_dataset(ws, {}, 42);
  EXPECT_EQ(a.train_index, b.train_index);
  EXPECT_EQ(a.test_index, b.test_index);
  std::multiset<int> ids;
  for (const auto* part : {&a.train, &a.valid, &a.test})
    for (const auto& w : *part) ids.insert(window_id(w));
  std::multiset<int> expected;
  for (const auto& w : ws) expected.insert(window_id(w));
  EXPECT_EQ(ids, expected);
  EXPECT_EQ(std::set<int>(ids.begin(), ids.end()).size(), ws.size());
  const auto sizes = split_sizes(ws.size(), {});
  EXPECT_EQ(a.train.size(), sizes[0]);
  EXPECT_EQ(a.valid.size(), sizes[1]);
  EXPECT_EQ(a.test.size(), sizes[2]);
}

TEST(Split, TooFewWindows) {
  EXPECT_THROW(split_dataset(labelled_windows({2}), {}, 0), InsufficientDataError);
  EXPECT_THROW(split_dataset(labelled_windows({5}), {0.5, 0.2, 0.2}, 0), ValidationError);
}

TEST(SubsampleLabels, StratifiedCeiling) {
  const auto ws = labelled_windows(std::vector<int>(10, 100));
  const auto sub = subsample_labels(ws, 0.1, 3);
  ASSERT_EQ(sub.size(), 100u);
  std::vector<int> per(10, 0);
  for (const auto& w : sub) ++per[static_cast<std::size_t>(*w.label)];
  for (int c : per) EXPECT_EQ(c, 10);

  EXPECT_EQ(subsample_labels(labelled_windows({95}), 0.05, 0).size(), 5u);
  EXPECT_EQ(subsample_labels(ws, 1.0, 9).size(), ws.size());
}

TEST(SubsampleLabels, IdempotentAndMonotone) {
  const auto ws = labelled_windows({13, 40, 7, 22});
  const auto all = subsample_labels(ws, 1.0, 5);
  EXPECT_EQ(subsample_labels(all, 1.0, 5).size(), all.size());
  std::vector<int> prev;
  for (double rate : {0.05, 0.1, 0.15, 0.2, 0.5, 1.0}) {
    std::vector<int> ids;
    for (const auto& w : subsample_labels(ws, rate, 5)) ids.push_back(window_id(w));
    std::sort(ids.begin(), ids.end());
    EXPECT_TRUE(std::includes(ids.begin(), ids.end(), prev.begin(), prev.end())) << "rate " << rate;
    prev = ids;
  }
}

TEST(SubsampleLabels, RequiresLabels) {
  WindowList ws = labelled_windows({4});
  ws[1].label.reset();
  EXPECT_THROW(subsample_labels(ws, 0.5, 0), ValidationError);
}

TEST(Container, RoundTripWithLabels) {
  const auto dir = std::filesystem::temp_directory_path() / "saga_container_test";
  std::filesystem::create_directories(dir);
  WindowSet set{4, default_layout(), {}};
  for (int i = 0; i < 3; ++i) {
    SampleWindow w{Matrix::Constant(4, 6, 0.25 * i), std::nullopt};
    if (i != 1) w.label = i;
    set.windows.push_back(w);
  }
  write_windows(dir / "x.win", set);
  const auto back = read_windows(dir / "x.win");
  EXPECT_EQ(back.window_length, 4);
  EXPECT_EQ(back.layout, set.layout);
  ASSERT_EQ(back.windows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.windows[i].values, set.windows[i].values);
    EXPECT_EQ(back.windows[i].label, set.windows[i].label);
  }
  std::filesystem::remove_all(dir);
}
