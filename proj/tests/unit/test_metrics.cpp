#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "orthoai/errors.hpp"
#include "orthoai/metrics.hpp"

using namespace orthoai;
using namespace orthoai::metrics;

namespace {

using LabelVec = std::vector<std::uint8_t>;

// 14 teeth (classes 1..14), 100 points each, plus 60 gingiva points.
LabelVec fourteen_teeth() {
  LabelVec gt(60, 0);
  for (int c = 1; c <= 14; ++c) gt.insert(gt.end(), 100, static_cast<std::uint8_t>(c));
  return gt;
}

}  // namespace

TEST(Confusion, ToyThreeClass) {
  const LabelVec gt{0, 0, 0, 1, 1, 2, 2, 2};
  const LabelVec pred{0, 0, 1, 1, 2, 2, 2, 0};
  ConfusionMatrix cm;
  cm.add(pred, gt);
  EXPECT_EQ(cm.at(0, 1), 1u);
  EXPECT_EQ(cm.at(2, 0), 1u);
  EXPECT_EQ(cm.total(), 8u);
  EXPECT_EQ(cm.correct(), 5u);
  EXPECT_DOUBLE_EQ(*cm.iou(0), 0.5);
  EXPECT_DOUBLE_EQ(*cm.iou(1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(*cm.iou(2), 0.5);
  EXPECT_FALSE(cm.iou(3).has_value());
  EXPECT_NEAR(*cm.mean_iou(false), 4.0 / 9.0, 1e-15);
  EXPECT_NEAR(*cm.mean_iou(true), 5.0 / 12.0, 1e-15);

  const auto r = segmentation_metrics(pred, gt, TirConfig{.fraction = 0.1, .floor = 1});
  EXPECT_NEAR(r.acc, 5.0 / 8.0, 1e-15);
  EXPECT_NEAR(r.miou, 4.0 / 9.0, 1e-15);
  EXPECT_NEAR(r.tiou, 5.0 / 12.0, 1e-15);
  EXPECT_EQ(r.tir, 1.0);
}

TEST(Confusion, LengthMismatch) {
  ConfusionMatrix cm;
  const LabelVec a{0, 1}, b{0};
  try {
    cm.add(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LengthMismatch);
  }
}

TEST(Confusion, IouMatchesBruteForce) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 300;
    const int classes = 2 + static_cast<int>(rng() % 31);
    LabelVec gt(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gt[i] = static_cast<std::uint8_t>(rng() % static_cast<unsigned>(classes));
      pred[i] = static_cast<std::uint8_t>(rng() % static_cast<unsigned>(classes));
    }
    ConfusionMatrix cm;
    cm.add(pred, gt);
    for (int c = 0; c < kClasses; ++c) ASSERT_EQ(cm.iou(c), oracle::brute_iou(pred, gt, c));
  }
}

TEST(Segmentation, PerfectAndAllGingiva) {
  const auto gt = fourteen_teeth();
  const auto perfect = segmentation_metrics(gt, gt);
  EXPECT_EQ(perfect.miou, 1.0);
  EXPECT_EQ(perfect.tiou, 1.0);
  EXPECT_EQ(perfect.acc, 1.0);
  EXPECT_EQ(perfect.tir, 1.0);

  const LabelVec zeros(gt.size(), 0);
  const auto r = segmentation_metrics(zeros, gt);
  EXPECT_EQ(r.tir, 0.0);
  EXPECT_NEAR(r.acc, 60.0 / 1460.0, 1e-15);
  EXPECT_EQ(r.teeth_total, 14u);
}

TEST(Tir, TwelveOfFourteen) {
  const auto gt = fourteen_teeth();
  LabelVec pred(gt.size(), 0);
  // the first 10 points of each tooth correct: exactly 0.1 * 100 -> identified
  std::size_t offset = 60;
  for (int c = 1; c <= 14; ++c) {
    const int correct = c <= 12 ? 10 : 9;
    for (int i = 0; i < correct; ++i) pred[offset + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(c);
    offset += 100;
  }
  const auto t = identify_teeth(pred, gt);
  EXPECT_EQ(t.identified, 12u);
  EXPECT_EQ(t.total, 14u);
  EXPECT_NEAR(*tooth_identification_rate(pred, gt), 12.0 / 14.0, 1e-15);
}

TEST(Tir, FloorBoundary) {
  LabelVec gt(30, 3);
  LabelVec pred(30, 0);
  for (int i = 0; i < 4; ++i) pred[static_cast<std::size_t>(i)] = 3;
  EXPECT_EQ(*tooth_identification_rate(pred, gt), 0.0);
  pred[4] = 3;
  EXPECT_EQ(*tooth_identification_rate(pred, gt), 1.0);
  const LabelVec gingiva(10, 0);
  EXPECT_FALSE(tooth_identification_rate(gingiva, gingiva).has_value());
}

TEST(Tir, InvariantToGingivaPredictions) {
  const auto gt = fourteen_teeth();
  std::mt19937_64 rng(4);
  LabelVec pred = gt;
  for (std::size_t i = 60; i < pred.size(); ++i) {
    if (rng() % 3 == 0) pred[i] = static_cast<std::uint8_t>(rng() % 33);
  }
  const double base = *tooth_identification_rate(pred, gt);
  for (int trial = 0; trial < 20; ++trial) {
    LabelVec p2 = pred;
    for (std::size_t i = 0; i < 60; ++i) p2[i] = static_cast<std::uint8_t>(rng() % 33);
    EXPECT_EQ(*tooth_identification_rate(p2, gt), base);
  }
}

TEST(Segmentation, PooledAndPerScan) {
  const LabelVec gt1{0, 1, 1, 1, 1, 1}, gt2{0, 0, 2, 2, 2, 2};
  const LabelVec p1{0, 1, 1, 1, 1, 1}, p2{2, 2, 0, 0, 0, 0};
  const std::vector<LabelVec> preds{p1, p2}, gts{gt1, gt2};
  const TirConfig cfg{.fraction = 0.1, .floor = 1};
  const auto pooled = segmentation_metrics(preds, gts, Averaging::Pooled, cfg);
  const auto per = segmentation_metrics(preds, gts, Averaging::PerScan, cfg);
  EXPECT_NEAR(pooled.acc, 6.0 / 12.0, 1e-15);
  EXPECT_NEAR(per.acc, (1.0 + 0.0) / 2.0, 1e-15);
  EXPECT_NEAR(pooled.tir, 0.5, 1e-15);
  EXPECT_EQ(pooled.scans, 2u);
  for (const auto* r : {&pooled, &per}) {
    for (double v : {r->miou, r->tiou, r->acc, r->tir}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_NE(pooled.to_json().find("\"pooled\""), std::string::npos);
}

TEST(Sufficiency, Cases) {
  GroundTruthTooth gt;
  gt.label = cases::FdiLabel::from_code(21);
  gt.centroid = {1, 2, 3};
  gt.frame.origin = gt.centroid;
  lifting::ToothEstimate est;
  est.label = gt.label;
  est.centroid = gt.centroid;
  est.axes = gt.frame;
  EXPECT_TRUE(clinical_sufficiency(est, gt).sufficient);

  auto off = est;
  off.centroid = gt.centroid + geometry::Vec3{2.5, 0, 0};
  const auto s = clinical_sufficiency(off, gt);
  EXPECT_FALSE(s.sufficient);
  EXPECT_EQ(s.reasons, std::vector<std::string>{"centroid"});

  auto rot = est;
  rot.centroid = gt.centroid + geometry::Vec3{0, 0.1, 0};
  rot.axes = geometry::Rotation::about_axis({1, 0, 0}, 9.0 * M_PI / 180).apply(gt.frame);
  const auto r = clinical_sufficiency(rot, gt);
  EXPECT_TRUE(r.sufficient);
  EXPECT_NEAR(r.axis_error_deg, 9.0, 1e-9);

  auto wrong = est;
  wrong.label = cases::FdiLabel::from_code(11);
  wrong.axes = geometry::Rotation::about_axis({0, 0, 1}, 11.0 * M_PI / 180).apply(gt.frame);
  EXPECT_EQ(clinical_sufficiency(wrong, gt).reasons, (std::vector<std::string>{"label", "axes"}));
}
