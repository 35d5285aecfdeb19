#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "msl/eval.hpp"
#include "oracles.hpp"
#include "synth.hpp"

namespace msl {
namespace {

Detection det(double x1, double y1, double x2, double y2, int c, double s)
{
  return {{x1, y1, x2, y2}, c, s};
}

GroundTruth gt(double x1, double y1, double x2, double y2, int c)
{
  return {{x1, y1, x2, y2}, c};
}

TEST(Match, PicksHighestIouAndRespectsClass)
{
  const std::vector<GroundTruth> gts = {gt(0, 0, 10, 10, 0), gt(2, 0, 12, 10, 0),
                                        gt(0, 0, 10, 10, 1)};
  const std::vector<Detection> preds = {det(2, 0, 12, 10, 0, 0.9), det(0, 0, 10, 10, 0, 0.8),
                                        det(0, 0, 10, 10, 0, 0.7), det(50, 50, 60, 60, 1, 0.6)};
  const MatchResult m = match(preds, gts, 0.5);
  EXPECT_EQ(m.pred_to_gt, (std::vector<int>{1, 0, -1, -1}));
  EXPECT_EQ(m.gt_to_pred, (std::vector<int>{1, 0, -1}));
  EXPECT_EQ(m.true_positives(), 2U);
}

TEST(Match, ThresholdIsInclusiveAndTiesGoToLowestIndex)
{
  // IoU exactly 0.5: 10x10 box against 10x20 box sharing the top half.
  const std::vector<GroundTruth> gts = {gt(0, 0, 10, 20, 0), gt(0, 0, 10, 20, 0)};
  const std::vector<Detection> preds = {det(0, 0, 10, 10, 0, 0.9)};
  EXPECT_EQ(match(preds, gts, 0.5).pred_to_gt[0], 0);
  EXPECT_EQ(match(preds, gts, 0.5000001).pred_to_gt[0], -1);
}

TEST(Match, AgreesWithBruteForceGreedy)
{
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto scene = testing::random_eval_scene(rng, 3, 1, 10);
    const auto& preds = scene.preds[0];
    const auto& gts = scene.gts[0];
    const MatchResult m = match(preds, gts, 0.5);
    std::vector<bool> used(gts.size(), false);
    for (std::size_t p = 0; p < preds.size(); ++p) {
      long double best = 0.5L;
      int best_g = -1;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (used[g] || gts[g].class_id != preds[p].class_id) continue;
        const long double o = testing::ref_iou(preds[p].box, gts[g].box);
        if (o >= best && (best_g < 0 || o > best)) {
          best = o;
          best_g = static_cast<int>(g);
        }
      }
      if (best_g >= 0) used[static_cast<std::size_t>(best_g)] = true;
      ASSERT_EQ(m.pred_to_gt[p], best_g) << trial;
    }
  }
}

std::optional<double> ap_of(std::initializer_list<bool> flags, std::size_t n_gt)
{
  const std::vector<char> storage(flags.begin(), flags.end());
  auto arr = std::make_unique<bool[]>(storage.size());
  for (std::size_t i = 0; i < storage.size(); ++i) arr[i] = storage[i] != 0;
  return average_precision(std::span<const bool>(arr.get(), storage.size()), n_gt);
}

TEST(AveragePrecision, WorkedExamples)
{
  // TP, FP, TP with two objects: 0.5 * 1 + 0.5 * 2/3.
  EXPECT_NEAR(*ap_of({true, false, true}, 2), 5.0 / 6.0, 1e-15);
  EXPECT_DOUBLE_EQ(*ap_of({true, true}, 2), 1.0);
  EXPECT_DOUBLE_EQ(*ap_of({true}, 2), 0.5);
  EXPECT_DOUBLE_EQ(*ap_of({false, false}, 2), 0.0);
  EXPECT_DOUBLE_EQ(*ap_of({}, 3), 0.0);
  // The envelope lifts every hit to the final precision of 3/4.
  EXPECT_NEAR(*ap_of({false, true, true, true}, 3), 3.0 / 4.0, 1e-15);
  EXPECT_FALSE(ap_of({}, 0));
  EXPECT_EQ(ap_of({false}, 0), 0.0);
}

TEST(Map, PerfectPredictionsScoreOne)
{
  std::vector<std::vector<GroundTruth>> gts = {{gt(0, 0, 10, 10, 0), gt(20, 20, 40, 40, 1)},
                                               {gt(5, 5, 50, 50, 1)}};
  std::vector<std::vector<Detection>> preds(2);
  for (std::size_t i = 0; i < gts.size(); ++i) {
    for (const auto& g : gts[i]) preds[i].push_back({g.box, g.class_id, 0.9});
  }
  const auto t = coco_iou_thresholds();
  const MapResult r = map_at(preds, gts, 3, t);
  ASSERT_EQ(r.map.size(), 10U);
  for (double m : r.map) EXPECT_DOUBLE_EQ(m, 1.0);
  EXPECT_FALSE(r.ap[0][2]);  // class 2 has neither
  const auto mean = r.class_mean_ap();
  EXPECT_DOUBLE_EQ(*mean[0], 1.0);
  EXPECT_FALSE(mean[2]);
}

TEST(Map, ThresholdsAreCocoGrid)
{
  const auto t = coco_iou_thresholds();
  ASSERT_EQ(t.size(), 10U);
  EXPECT_DOUBLE_EQ(t.front(), 0.5);
  EXPECT_NEAR(t.back(), 0.95, 1e-12);
}

TEST(Map, MatchesIndependentEvaluator)
{
  std::mt19937_64 rng(8);
  const auto thresholds = coco_iou_thresholds();
  for (int trial = 0; trial < 300; ++trial) {
    const auto scene = testing::random_eval_scene(rng, 4);
    const MapResult got = map_at(scene.preds, scene.gts, 4, thresholds);
    const testing::RefMap want = testing::ref_map(scene.preds, scene.gts, 4, thresholds);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      EXPECT_NEAR(got.map[t], want.map[t], 1e-9) << trial;
      for (int c = 0; c < 4; ++c) {
        ASSERT_EQ(got.ap[t][c].has_value(), want.ap[t][c].has_value());
        if (got.ap[t][c]) {
          EXPECT_NEAR(*got.ap[t][c], *want.ap[t][c], 1e-9);
        }
      }
    }
  }
}

TEST(Map, InvariantUnderMonotoneScoreTransform)
{
  std::mt19937_64 rng(12);
  const std::vector<double> t = {0.5};
  for (int trial = 0; trial < 100; ++trial) {
    auto scene = testing::random_eval_scene(rng, 3);
    const double before = map_at(scene.preds, scene.gts, 3, t).map[0];
    for (auto& img : scene.preds) {
      for (auto& d : img) d.score = 1.0 / (1.0 + std::exp(-8.0 * (d.score - 0.3)));
    }
    EXPECT_NEAR(map_at(scene.preds, scene.gts, 3, t).map[0], before, 1e-12);
  }
}

TEST(Map, DuplicatedDatasetKeepsScore)
{
  std::mt19937_64 rng(13);
  const std::vector<double> t = {0.5, 0.75};
  for (int trial = 0; trial < 100; ++trial) {
    auto scene = testing::random_eval_scene(rng, 3);
    // Distinct scores keep the doubled ranking interleaved pairwise.
    double s = 1.0;
    for (auto& img : scene.preds) {
      for (auto& d : img) d.score = (s -= 1e-3);
    }
    const MapResult once = map_at(scene.preds, scene.gts, 3, t);
    auto preds = scene.preds;
    auto gts = scene.gts;
    preds.insert(preds.end(), scene.preds.begin(), scene.preds.end());
    gts.insert(gts.end(), scene.gts.begin(), scene.gts.end());
    const MapResult twice = map_at(preds, gts, 3, t);
    for (std::size_t k = 0; k < t.size(); ++k) {
      EXPECT_NEAR(twice.map[k], once.map[k], 1e-12) << trial;
      for (int c = 0; c < 3; ++c) {
        ASSERT_EQ(once.ap[k][c].has_value(), twice.ap[k][c].has_value());
        if (once.ap[k][c]) {
          EXPECT_NEAR(*twice.ap[k][c], *once.ap[k][c], 1e-12);
        }
      }
    }
  }
}

TEST(Map, RejectsMismatchedInput)
{
  const std::vector<double> t = {0.5};
  EXPECT_THROW(map_at({{}}, {}, 2, t), std::invalid_argument);
  EXPECT_THROW(map_at({{det(0, 0, 1, 1, 5, 0.5)}}, {{}}, 2, t), std::invalid_argument);
}

TEST(Confusion, PerfectDiagonal)
{
  std::vector<std::vector<GroundTruth>> gts = {{gt(0, 0, 10, 10, 0), gt(20, 20, 40, 40, 2)}};
  std::vector<std::vector<Detection>> preds = {{det(0, 0, 10, 10, 0, 0.9),
                                                det(20, 20, 40, 40, 2, 0.8)}};
  const ConfusionMatrix cm = confusion_matrix(preds, gts, 3);
  EXPECT_EQ(cm.at(0, 0), 1U);
  EXPECT_EQ(cm.at(2, 2), 1U);
  EXPECT_EQ(std::accumulate(cm.counts.begin(), cm.counts.end(), std::uint64_t{0}), 2U);
}

TEST(Confusion, MissedObjectLandsInBackgroundRow)
{
  std::vector<std::vector<GroundTruth>> gts = {{gt(0, 0, 10, 10, 3)}};
  std::vector<std::vector<Detection>> preds = {{det(100, 100, 110, 110, 1, 0.9),
                                                det(0, 0, 10, 10, 2, 0.1)}};
  const ConfusionMatrix cm = confusion_matrix(preds, gts, 5);
  EXPECT_EQ(cm.at(cm.background(), 3), 1U);  // low-score pred is ignored
  EXPECT_EQ(cm.at(1, cm.background()), 1U);
  EXPECT_EQ(std::accumulate(cm.counts.begin(), cm.counts.end(), std::uint64_t{0}), 2U);
}

TEST(Confusion, WrongClassIsOffDiagonal)
{
  std::vector<std::vector<GroundTruth>> gts = {{gt(0, 0, 10, 10, 0)}};
  std::vector<std::vector<Detection>> preds = {{det(0, 0, 10, 9, 1, 0.9)}};
  const ConfusionMatrix cm = confusion_matrix(preds, gts, 2);
  EXPECT_EQ(cm.at(1, 0), 1U);
  EXPECT_EQ(cm.at(0, 0), 0U);
}

TEST(Confusion, MatchesReferenceAndColumnsNormalize)
{
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 300; ++trial) {
    const auto scene = testing::random_eval_scene(rng, 4);
    const ConfusionMatrix cm = confusion_matrix(scene.preds, scene.gts, 4);
    ASSERT_EQ(cm.counts, testing::ref_confusion(scene.preds, scene.gts, 4, 0.25, 0.45)) << trial;
    // Every GT lands in exactly one cell of its column.
    std::vector<std::uint64_t> per_class(5, 0);
    for (const auto& img : scene.gts) {
      for (const auto& g : img) ++per_class[static_cast<std::size_t>(g.class_id)];
    }
    const auto norm = cm.normalized();
    for (int col = 0; col < 4; ++col) {
      std::uint64_t sum = 0;
      double nsum = 0.0;
      for (int row = 0; row <= 4; ++row) {
        sum += cm.at(row, col);
        nsum += norm[static_cast<std::size_t>(row) * 5 + col];
      }
      EXPECT_EQ(sum, per_class[static_cast<std::size_t>(col)]);
      EXPECT_NEAR(nsum, sum > 0 ? 1.0 : 0.0, 1e-12);
    }
  }
}

}  // namespace
}  // namespace msl
