#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "msl/report.hpp"
#include "synth.hpp"
#include "tempdir.hpp"

namespace msl {
namespace {

TEST(TrainingLog, ParsesRowsByHeaderName)
{
  const auto curve = parse_training_log(
      "epoch,train/box_loss,metrics/mAP50(B),metrics/mAP50-95(B),unknown\n"
      "1,1.5,0.10,0.05,x\n"
      "2,1.2,,0.09,y\n"
      "3,1.0,0.40,0.20,z\n");
  ASSERT_EQ(curve.epochs.size(), 3U);
  EXPECT_EQ(curve.epochs[0].epoch, 1);
  EXPECT_EQ(curve.epochs[0].train_box_loss, 1.5);
  EXPECT_EQ(curve.epochs[1].map50, std::nullopt);
  EXPECT_EQ(curve.epochs[2].map50_95, 0.20);
  EXPECT_EQ(curve.epochs[2].recall, std::nullopt);
}

TEST(TrainingLog, PaddedHeadersAndCrlf)
{
  const auto curve = parse_training_log(
      "   epoch,   metrics/recall(B) , val/cls_loss\r\n    1,  0.5 ,  2.0\r\n\r\n");
  ASSERT_EQ(curve.epochs.size(), 1U);
  EXPECT_EQ(curve.epochs[0].recall, 0.5);
  EXPECT_EQ(curve.epochs[0].val_cls_loss, 2.0);
}

TEST(TrainingLog, CommittedFixture)
{
  const std::string text =
      testing::read_file(std::filesystem::path(MSL_TEST_DATA) / "results.csv");
  const auto curve = parse_training_log(text);
  ASSERT_EQ(curve.epochs.size(), 30U);
  EXPECT_EQ(curve.epochs.back().epoch, 30);
  EXPECT_NEAR(*curve.epochs.back().map50, 0.98771, 1e-9);
  EXPECT_NEAR(*curve.epochs.front().train_cls_loss, 4.0, 1e-9);
  for (std::size_t i = 1; i < curve.epochs.size(); ++i) {
    EXPECT_GE(*curve.epochs[i].map50, *curve.epochs[i - 1].map50);
    EXPECT_LE(*curve.epochs[i].val_box_loss, *curve.epochs[i - 1].val_box_loss);
  }
}

TEST(TrainingLog, Errors)
{
  try {
    parse_training_log("epoch,train/box_loss\n1,0.5\n2,abc\n");
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_EQ(e.kind(), CsvError::Kind::NonNumericCell);
    EXPECT_EQ(e.row(), 2);
    EXPECT_EQ(e.column(), "train/box_loss");
  }
  try {
    parse_training_log("epoch,train/box_loss\n1,0.5,9\n");
    FAIL();
  } catch (const CsvError& e) {
    EXPECT_EQ(e.kind(), CsvError::Kind::MalformedCsv);
    EXPECT_EQ(e.row(), 1);
  }
  EXPECT_THROW(parse_training_log(""), CsvError);
  EXPECT_THROW(parse_training_log("foo,bar\n1,2\n"), CsvError);
  EXPECT_THROW(parse_training_log("epoch\n2\n1\n"), CsvError);
}

EvalReport sample_report(std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  const auto scene = testing::random_eval_scene(rng, 3);
  return evaluate(scene.preds, scene.gts, {"ka", "ga", "cha"});
}

TEST(Evaluate, PerfectPredictions)
{
  std::vector<std::vector<GroundTruth>> gts = {{{{0, 0, 10, 10}, 0}, {{20, 20, 40, 40}, 1}}};
  std::vector<std::vector<Detection>> preds = {{{{0, 0, 10, 10}, 0, 0.9},
                                                {{20, 20, 40, 40}, 1, 0.8}}};
  const EvalReport r = evaluate(preds, gts, {"a", "b"});
  EXPECT_EQ(r.schema_version, 1);
  EXPECT_DOUBLE_EQ(r.map50, 1.0);
  EXPECT_DOUBLE_EQ(r.map50_95, 1.0);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_EQ(r.counts, (EvalCounts{1, 2, 2, 2}));
  EXPECT_EQ(r.confusion.at(0, 0), 1U);
  EXPECT_EQ(r.confusion.at(1, 1), 1U);
}

TEST(Evaluate, OperatingPointCounts)
{
  std::vector<std::vector<GroundTruth>> gts = {{{{0, 0, 10, 10}, 0}, {{50, 50, 60, 60}, 0}}};
  std::vector<std::vector<Detection>> preds = {{{{0, 0, 10, 10}, 0, 0.9},
                                                {{100, 100, 110, 110}, 0, 0.8},
                                                {{50, 50, 60, 60}, 0, 0.1}}};
  const EvalReport r = evaluate(preds, gts, {"a"});
  EXPECT_EQ(r.counts.predictions, 2U);  // 0.1 is below the operating point
  EXPECT_EQ(r.counts.true_positives, 1U);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
}

TEST(Report, JsonRoundTripAndDeterminism)
{
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EvalReport r = sample_report(seed);
    const std::string a = report_to_json(r);
    EXPECT_EQ(a, report_to_json(sample_report(seed)));
    const EvalReport back = report_from_json(a);
    EXPECT_TRUE(back == r) << seed;
    EXPECT_EQ(report_to_json(back), a);
  }
}

TEST(Report, JsonShape)
{
  const auto j = nlohmann::json::parse(report_to_json(sample_report(3)));
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["names"].size(), 3U);
  EXPECT_EQ(j["confusion_matrix"].size(), 4U);
  EXPECT_EQ(j["confusion_matrix"][0].size(), 4U);
  EXPECT_EQ(j["ap50"].size(), 3U);
}

TEST(Report, RejectsOtherSchemaVersions)
{
  auto j = nlohmann::json::parse(report_to_json(sample_report(1)));
  j["schema_version"] = 2;
  EXPECT_THROW(report_from_json(j.dump()), std::runtime_error);
  j["schema_version"] = 1;
  j.erase("counts");
  EXPECT_THROW(report_from_json(j.dump()), std::runtime_error);
  EXPECT_THROW(report_from_json("[1,2"), std::runtime_error);
}

TEST(Report, ConfusionCsv)
{
  EvalReport r;
  r.nc = 2;
  r.names = {"ka", "ga"};
  r.confusion.nc = 2;
  r.confusion.counts = {3, 0, 1, 1, 2, 0, 0, 2, 0};
  EXPECT_EQ(confusion_matrix_csv(r),
            "predicted\\true,ka,ga,background\n"
            "ka,3,0,1\n"
            "ga,1,2,0\n"
            "background,0,2,0\n");
  EXPECT_EQ(confusion_matrix_csv(r, true),
            "predicted\\true,ka,ga,background\n"
            "ka,0.7500,0.0000,1.0000\n"
            "ga,0.2500,0.5000,0.0000\n"
            "background,0.0000,0.5000,0.0000\n");
}

TEST(Report, PerClassAndCurveCsv)
{
  EvalReport r;
  r.nc = 2;
  r.names = {"ka", "ga"};
  r.ap50 = {0.5, std::nullopt};
  r.ap50_95 = {0.25, std::nullopt};
  EXPECT_EQ(per_class_ap_csv(r), "class,name,ap50,ap50_95\n0,ka,0.500000,0.250000\n1,ga,,\n");

  const auto curve = parse_training_log("epoch,train/box_loss,metrics/mAP50(B)\n1,1.5,0.1\n");
  EXPECT_EQ(loss_curve_csv(curve),
            "epoch,train_box_loss,train_cls_loss,train_dfl_loss,val_box_loss,val_cls_loss,"
            "val_dfl_loss\n1,1.500000,,,,,\n");
  EXPECT_EQ(metric_curve_csv(curve), "epoch,precision,recall,map50,map50_95\n1,,,0.100000,\n");
}

TEST(Report, EmitWritesAllFiles)
{
  testing::TempDir dir;
  const EvalReport r = sample_report(5);
  const auto curve = parse_training_log("epoch,metrics/mAP50(B)\n1,0.1\n2,0.2\n");
  const auto without = emit_report(r, dir / "a");
  EXPECT_EQ(without.size(), 4U);
  const auto with = emit_report(r, dir / "b", &curve);
  ASSERT_EQ(with.size(), 6U);
  for (const auto& p : with) EXPECT_TRUE(std::filesystem::exists(p)) << p;
  EXPECT_EQ(testing::read_file(dir / "b" / "report.json"), report_to_json(r));
  EXPECT_EQ(testing::read_file(dir / "b" / "metric_curves.csv"), metric_curve_csv(curve));

  testing::write_file(dir / "blocker", "file");
  EXPECT_THROW(emit_report(r, dir / "blocker" / "sub"), std::runtime_error);
}

}  // namespace
}  // namespace msl
