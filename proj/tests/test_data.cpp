#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>
#include <sstream>

#include "mindisc/data.hpp"
#include "mindisc/losses.hpp"
#include "support.hpp"

namespace mindisc {
namespace {

Dataset parse(const std::string& text, CsvOptions opts = {}) {
  std::istringstream in(text);
  return parse_csv(in, opts, "mem");
}

double arc_residual(double x, double y, int label) {
  // Distance from the unit circle centred at (0,0) or (1,0.5).
  const double cx = label == 0 ? 0.0 : 1.0;
  const double cy = label == 0 ? 0.0 : 0.5;
  return std::abs(std::hypot(x - cx, y - cy) - 1.0);
}

TEST(TwoMoons, NoiselessPointsLieOnArcs) {
  const Dataset d = gen_two_moons(4, 0.0, 0.0, 3);
  ASSERT_EQ(d.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    const int y = (*d.labels)[i];
    EXPECT_LT(arc_residual(d.features(i, 0), d.features(i, 1), y), 1e-12);
    // Upper arc for class 0, lower arc for class 1.
    if (y == 0) EXPECT_GE(d.features(i, 1), -1e-12);
    else EXPECT_LE(d.features(i, 1), 0.5 + 1e-12);
  }
}

TEST(TwoMoons, FullTurnIsIdentity) {
  const Dataset a = gen_two_moons(50, 0.1, 0.0, 8);
  const Dataset b = gen_two_moons(50, 0.1, 360.0, 8);
  for (std::size_t k = 0; k < a.features.size(); ++k) {
    EXPECT_NEAR(a.features.data()[k], b.features.data()[k], 1e-9);
  }
}

TEST(TwoMoons, QuarterTurnMapsXAxisToYAxis) {
  const Matrix r = rotate2d({{1, 0}}, 90.0);
  EXPECT_NEAR(r(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(r(0, 1), 1.0, 1e-12);
}

TEST(TwoMoons, RotationIsAppliedAboutOrigin) {
  const Dataset a = gen_two_moons(30, 0.05, 0.0, 4);
  const Dataset b = gen_two_moons(30, 0.05, 30.0, 4);
  const Matrix expect = rotate2d(a.features, 30.0);
  EXPECT_EQ(b.features, expect);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(TwoMoons, BalancedDeterministicAndValidated) {
  for (std::size_t n : {2u, 7u, 100u, 501u}) {
    const Dataset d = gen_two_moons(n, 0.2, 15.0, 5);
    std::size_t ones = 0;
    for (int y : *d.labels) ones += static_cast<std::size_t>(y);
    const auto zeros = n - ones;
    EXPECT_LE(std::max(ones, zeros) - std::min(ones, zeros), 1u);
    EXPECT_EQ(d.features, gen_two_moons(n, 0.2, 15.0, 5).features);
    EXPECT_NO_THROW(d.validate());
  }
  EXPECT_NE(gen_two_moons(10, 0.2, 0, 1).features, gen_two_moons(10, 0.2, 0, 2).features);
  EXPECT_THROW(gen_two_moons(1, 0.1, 0, 1), Error);
  EXPECT_THROW(gen_two_moons(10, -0.1, 0, 1), Error);
}

TEST(TwoMoons, NoiselessLabelsAreRecoverable) {
  // Leave-one-out nearest neighbour. Nearest-centroid cannot separate the
  // interleaved arcs: the tip (1, 0) of arc 0 sits next to arc 1's centroid.
  const Dataset d = gen_two_moons(400, 0.0, 0.0, 12);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double best = INFINITY;
    int pred = -1;
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (i == j) continue;
      const double dx = d.features(i, 0) - d.features(j, 0);
      const double dy = d.features(i, 1) - d.features(j, 1);
      if (dx * dx + dy * dy < best) {
        best = dx * dx + dy * dy;
        pred = (*d.labels)[j];
      }
    }
    correct += pred == (*d.labels)[i] ? 1 : 0;
  }
  EXPECT_EQ(correct, d.size());
}

TEST(GaussianShift, NoShiftIsIdenticallyDistributed) {
  const auto pair = gen_gaussian_shift(500, 2, {0.0, 0.0}, 1.0, 3, 21);
  const double mmd = mmd2_loss(pair.source.features, pair.target.features,
                               median_bandwidths(pair.source.features, pair.target.features, 5))
                         .value;
  EXPECT_LT(mmd, 0.05);
  EXPECT_NE(pair.source.features, pair.target.features);
}

TEST(GaussianShift, CovarianceScaleQuadruplesTrace) {
  const auto pair = gen_gaussian_shift(1000, 3, {0, 0, 0}, 4.0, 2, 22);
  for (int c = 0; c < 2; ++c) {
    auto class_trace = [&](const Dataset& d) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if ((*d.labels)[i] == c) rows.push_back(i);
      }
      const Matrix cov = covariance(gather_rows(d.features, rows));
      double t = 0;
      for (std::size_t j = 0; j < cov.rows(); ++j) t += cov(j, j);
      return t;
    };
    const double ratio = class_trace(pair.target) / class_trace(pair.source);
    EXPECT_NEAR(ratio, 4.0, 0.8);
  }
}

TEST(GaussianShift, MeanShiftMovesTargetMeans) {
  const auto pair = gen_gaussian_shift(2000, 2, {5.0, -3.0}, 1.0, 1, 23);
  const auto ms = column_means(pair.source.features);
  const auto mt = column_means(pair.target.features);
  EXPECT_NEAR(mt[0] - ms[0], 5.0, 0.15);
  EXPECT_NEAR(mt[1] - ms[1], -3.0, 0.15);
}

TEST(GaussianShift, Validation) {
  EXPECT_THROW(gen_gaussian_shift(2, 2, {0, 0}, 1.0, 3, 1), Error);
  EXPECT_THROW(gen_gaussian_shift(10, 2, {0, 0}, 0.0, 3, 1), Error);
  EXPECT_THROW(gen_gaussian_shift(10, 2, {0}, 1.0, 3, 1), Error);
  const auto a = gen_gaussian_shift(30, 2, {1, 1}, 2.0, 3, 9);
  const auto b = gen_gaussian_shift(30, 2, {1, 1}, 2.0, 3, 9);
  EXPECT_EQ(a.source.features, b.source.features);
  EXPECT_EQ(a.target.features, b.target.features);
}

TEST(Csv, MinimalLabeledParse) {
  const Dataset d = parse("1.0,2.0,0\n3.0,4.0,1\n", {true, false, 2});
  EXPECT_EQ(d.features, (Matrix{{1, 2}, {3, 4}}));
  EXPECT_EQ(*d.labels, (std::vector<int>{0, 1}));
  EXPECT_EQ(d.num_classes, 2u);
}

TEST(Csv, UnlabeledFlagKeepsLastColumn) {
  const Dataset d = parse("1.0,2.0,0\n3.0,4.0,1\n", {false, false, 0});
  EXPECT_EQ(d.features, (Matrix{{1, 2, 0}, {3, 4, 1}}));
  EXPECT_FALSE(d.labels.has_value());
  EXPECT_THROW(d.labeled(), Error);
}

TEST(Csv, NanIsRejectedWithRowAndColumn) {
  try {
    parse("NaN,2.0,0\n3.0,4.0,1\n");
    FAIL();
  } catch (const RowError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteValue);
    EXPECT_EQ(e.row(), 1u);
    EXPECT_EQ(e.column(), 1u);
  }
  try {
    parse("1,2,0\n3.0,inf,1\n");
    FAIL();
  } catch (const RowError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteValue);
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), 2u);
  }
}

TEST(Csv, MalformedRowsAndLabels) {
  auto kind_of = [](const std::string& text, CsvOptions opts) {
    try {
      parse(text, opts);
    } catch (const RowError& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  EXPECT_EQ(kind_of("1,2,0\n3,1\n", {}), ErrorKind::MalformedRow);
  EXPECT_EQ(kind_of("1,abc,0\n", {}), ErrorKind::MalformedRow);
  EXPECT_EQ(kind_of("1,2,0.5\n", {}), ErrorKind::MalformedRow);
  EXPECT_EQ(kind_of("1,2,3\n", {true, false, 2}), ErrorKind::LabelOutOfRange);
  EXPECT_EQ(kind_of("1,2,-1\n", {}), ErrorKind::LabelOutOfRange);
}

TEST(Csv, HeaderAndLineEndings) {
  const Dataset d = parse("x,y,label\r\n1,2,0\r\n\n3,4,1", {true, true, 0});
  EXPECT_EQ(d.features, (Matrix{{1, 2}, {3, 4}}));
  EXPECT_EQ(d.num_classes, 2u);
}

TEST(Csv, MissingFile) {
  try {
    load_csv("/nonexistent/dir/file.csv", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::FileNotFound);
  }
}

TEST(Csv, RoundTripIsExact) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Dataset d;
    d.features = testing::random_matrix(rng, 1 + rng.index(20), 1 + rng.index(5), 1e3);
    d.features(0, 0) = 1e-300;
    d.labels = testing::random_labels(rng, d.features.rows(), 4);
    d.num_classes = 4;
    const Dataset back = parse(to_csv(d), {true, false, 4});
    for (std::size_t k = 0; k < d.features.size(); ++k) {
      EXPECT_NEAR(back.features.data()[k], d.features.data()[k],
                  1e-12 * std::max(1.0, std::abs(d.features.data()[k])));
    }
    EXPECT_EQ(back.features, d.features);
    EXPECT_EQ(back.labels, d.labels);
  }
}

TEST(Csv, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "mindisc_data_test.csv").string();
  const Dataset d = gen_two_moons(25, 0.1, 10, 2);
  write_csv(path, d);
  const Dataset back = load_csv(path, {});
  EXPECT_EQ(back.features, d.features);
  EXPECT_EQ(back.labels, d.labels);
  std::filesystem::remove(path);
}

Dataset index_dataset(std::size_t n, bool labeled) {
  Dataset d;
  d.features = Matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) d.features(i, 0) = static_cast<double>(i);
  if (labeled) d.labels = std::vector<int>(n, 0);
  d.num_classes = 1;
  return d;
}

TEST(Batches, EpochPartitionsEqualDomains) {
  const Dataset s = index_dataset(10, true), t = index_dataset(10, false);
  BatchIterator it(s.labeled(), t.unlabeled(), 5, 3);
  EXPECT_EQ(it.batches_per_epoch(), 2u);
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::set<double> src, tgt;
    for (int b = 0; b < 2; ++b) {
      const BatchPair p = it.next();
      ASSERT_EQ(p.source_features.rows(), 5u);
      ASSERT_EQ(p.target_features.rows(), 5u);
      ASSERT_EQ(p.source_labels.size(), 5u);
      for (double v : p.source_features.data()) src.insert(v);
      for (double v : p.target_features.data()) tgt.insert(v);
    }
    EXPECT_EQ(src.size(), 10u);
    EXPECT_EQ(tgt.size(), 10u);
  }
}

TEST(Batches, UnequalDomainsKeepEqualBatchSizesAndReshuffle) {
  const Dataset s = index_dataset(23, true), t = index_dataset(7, false);
  BatchIterator it(s.labeled(), t.unlabeled(), 3, 5);
  EXPECT_EQ(it.batches_per_epoch(), 2u);
  const auto e0 = it.indices_at(0).second;
  bool reshuffled = false;
  for (std::size_t step = 0; step < 40; ++step) {
    const auto [src, tgt] = it.indices_at(step);
    EXPECT_EQ(src.size(), 3u);
    EXPECT_EQ(tgt.size(), 3u);
    std::set<std::size_t> uniq(src.begin(), src.end());
    EXPECT_EQ(uniq.size(), 3u);
    if (step % 2 == 0 && step > 0) reshuffled |= tgt != e0;
  }
  EXPECT_TRUE(reshuffled);
}

TEST(Batches, DeterministicAndSeekable) {
  const Dataset s = gen_two_moons(40, 0.1, 0, 1), t = gen_two_moons(40, 0.1, 30, 2);
  BatchIterator a(s.labeled(), t.unlabeled(), 8, 77);
  BatchIterator b(s.labeled(), t.unlabeled(), 8, 77);
  std::vector<BatchPair> seq;
  for (int i = 0; i < 17; ++i) {
    const BatchPair pa = a.next(), pb = b.next();
    EXPECT_EQ(pa.source_features, pb.source_features);
    EXPECT_EQ(pa.target_features, pb.target_features);
    EXPECT_EQ(pa.source_labels, pb.source_labels);
    seq.push_back(pa);
  }
  BatchIterator c(s.labeled(), t.unlabeled(), 8, 77);
  c.seek(11);
  EXPECT_EQ(c.next().source_features, seq[11].source_features);
  c.seek(3);
  EXPECT_EQ(c.next().target_features, seq[3].target_features);

  BatchIterator other(s.labeled(), t.unlabeled(), 8, 78);
  EXPECT_NE(other.next().source_features, seq[0].source_features);
}

TEST(Batches, Validation) {
  const Dataset s = index_dataset(10, true), t = index_dataset(10, false), empty = index_dataset(0, false);
  EXPECT_THROW(BatchIterator(s.labeled(), t.unlabeled(), 1, 1), Error);
  EXPECT_THROW(BatchIterator(s.labeled(), empty.unlabeled(), 2, 1), Error);
  EXPECT_THROW(BatchIterator(s.labeled(), t.unlabeled(), 11, 1), Error);
}

}  // namespace
}  // namespace mindisc
