#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "oracles.hpp"

using namespace evidential;
using namespace evidential::cli;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::path(::testing::TempDir()) / ("evidential_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  const auto text = slurp(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

FitOptions quick_fit(LayerKind layer) {
  FitOptions f;
  f.layer = layer;
  f.epochs = 20;
  f.learning_rate = 1e-2;
  return f;
}

}  // namespace

TEST(CliGenData, MoonsSizesAndDeterminism) {
  const auto dir = scratch("gen");
  std::ostringstream log;
  GenDataOptions o;
  o.out_dir = dir.string();
  o.n_train = 40;
  o.n_test = 30;
  o.ood = true;
  o.n_ood = 10;
  cmd_gen_data(o, log);
  EXPECT_EQ(line_count(dir / "train.csv"), 41u);
  EXPECT_EQ(line_count(dir / "test.csv"), 31u);
  EXPECT_EQ(line_count(dir / "ood.csv"), 11u);
  const auto first = slurp(dir / "train.csv");
  cmd_gen_data(o, log);
  EXPECT_EQ(slurp(dir / "train.csv"), first);
  o.seed = 1;
  cmd_gen_data(o, log);
  EXPECT_NE(slurp(dir / "train.csv"), first);
}

TEST(CliGenData, Segmentation) {
  const auto dir = scratch("gen_seg");
  std::ostringstream log;
  GenDataOptions o;
  o.task = "seg";
  o.out_dir = dir.string();
  o.width = 16;
  o.height = 12;
  o.train_images = 2;
  o.test_images = 3;
  o.blobs = 1;
  cmd_gen_data(o, log);
  EXPECT_EQ(line_count(dir / "train.csv"), 2u * 16 * 12 + 1);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(line_count(dir / ("test_" + std::to_string(i) + ".csv")), 16u * 12 + 1);
  o.task = "images";
  EXPECT_THROW(cmd_gen_data(o, log), Error);
}

TEST(CliTrain, ZeroEpochsWritesInitialCheckpoint) {
  const auto dir = scratch("train0");
  std::ostringstream log;
  GenDataOptions g;
  g.out_dir = dir.string();
  cmd_gen_data(g, log);
  TrainOptions t;
  t.fit = quick_fit(LayerKind::Enn);
  t.fit.epochs = 0;
  t.out_dir = dir.string();
  cmd_train(t, log);
  const auto data = load_set((dir / "train.csv").string());
  const MoonsRunSettings run{LayerKind::Enn, InitKind::KMeans, 6, 1e-3, 0, 1e-2};
  EXPECT_EQ(load_checkpoint((dir / "checkpoint.csv").string()), init_moons_model(run, data, derive_seed(0, 3)));
  EXPECT_EQ(slurp(dir / "history.csv"), "epoch,loss,train_err,val_err,mean_ignorance\n");
}

TEST(CliTrain, Deterministic) {
  const auto dir = scratch("train_det");
  std::ostringstream log;
  GenDataOptions g;
  g.out_dir = dir.string();
  cmd_gen_data(g, log);
  TrainOptions t;
  t.fit = quick_fit(LayerKind::Rbf);
  t.fit.features = 2;
  t.fit.hidden = 8;
  t.out_dir = dir.string();
  t.val_path = (dir / "test.csv").string();
  cmd_train(t, log);
  const auto checkpoint = slurp(dir / "checkpoint.csv");
  const auto history = slurp(dir / "history.csv");
  EXPECT_EQ(line_count(dir / "history.csv"), 41u);
  cmd_train(t, log);
  EXPECT_EQ(slurp(dir / "checkpoint.csv"), checkpoint);
  EXPECT_EQ(slurp(dir / "history.csv"), history);
}

TEST(CliSweep, SinglePointMatchesTrainThenEval) {
  const auto dir = scratch("sweep_one");
  std::ostringstream log;
  SweepOptions s;
  s.models = {LayerKind::Rbf};
  s.lambdas = {1e-2};
  s.seeds = {3};
  s.base = quick_fit(LayerKind::Rbf);
  s.out_dir = dir.string();
  const auto rows = run_sweep(s);
  ASSERT_EQ(rows.size(), 1u);

  GenDataOptions g;
  g.seed = 3;
  g.out_dir = dir.string();
  g.ood = true;
  cmd_gen_data(g, log);
  TrainOptions t;
  t.fit = s.base;
  t.fit.lambda = 1e-2;
  t.fit.seed = 3;
  t.out_dir = dir.string();
  cmd_train(t, log);
  EvalOptions e;
  e.checkpoint = (dir / "checkpoint.csv").string();
  e.data = {(dir / "test.csv").string()};
  e.ood_path = (dir / "ood.csv").string();
  const auto report = eval_report(e);
  EXPECT_EQ(report[1].first, "error_rate");
  EXPECT_EQ(report[1].second, rows[0].test_error);
  EXPECT_EQ(report[2].second, rows[0].test_ignorance);
  EXPECT_EQ(report[4].second, rows[0].ood_ignorance);
}

TEST(CliSweep, ParallelMatchesSerial) {
  SweepOptions s;
  s.lambdas = {1e-3, 1e-1};
  s.seeds = {0, 1};
  s.base = quick_fit(LayerKind::Enn);
  s.data.train_size = 60;
  s.data.test_size = 50;
  s.data.ood_size = 20;
  s.jobs = 1;
  std::ostringstream serial, parallel;
  const auto a = run_sweep(s);
  write_sweep_csv(serial, a);
  s.jobs = 4;
  const auto b = run_sweep(s);
  write_sweep_csv(parallel, b);
  EXPECT_EQ(serial.str(), parallel.str());
  ASSERT_EQ(a.size(), 8u);
  EXPECT_EQ(a[0].point.layer, LayerKind::Enn);
  EXPECT_EQ(a[0].point.seed, 0u);
  EXPECT_EQ(a[1].point.seed, 1u);
  EXPECT_EQ(a[2].point.lambda, 1e-1);
  EXPECT_EQ(a[4].point.layer, LayerKind::Rbf);
  EXPECT_EQ(serial.str().substr(0, serial.str().find('\n')),
            "model,I,H,lambda,seed,test_error,mean_ignorance,ood_ignorance");
}

TEST(CliSweep, SpecFile) {
  SweepOptions s;
  std::stringstream spec(
      "# grid\n"
      "models = rbf\n"
      "lambdas = 0.5, 0.25\n"
      "seeds = 4,5,6\n"
      "I = 3\n"
      "epochs = 7\n"
      "lr = 0.05\n"
      "n_train = 80\n");
  apply_sweep_spec(spec, s);
  EXPECT_EQ(s.models, std::vector<LayerKind>{LayerKind::Rbf});
  EXPECT_EQ(s.lambdas, (std::vector<double>{0.5, 0.25}));
  EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{4, 5, 6}));
  EXPECT_EQ(s.prototypes, std::vector<std::size_t>{3});
  EXPECT_EQ(s.base.epochs, 7u);
  EXPECT_EQ(s.base.learning_rate, 0.05);
  EXPECT_EQ(s.data.train_size, 80u);
  EXPECT_EQ(sweep_grid(s).size(), 6u);

  for (const char* bad : {"colour = red\n", "lambdas = 1, x\n", "models = svm\n", "no equals sign\n"}) {
    std::stringstream ss(bad);
    SweepOptions t;
    EXPECT_THROW(apply_sweep_spec(ss, t), Error) << bad;
  }
  SweepOptions dup;
  dup.seeds = {1, 1};
  EXPECT_THROW(validate(dup), Error);
  SweepOptions negative;
  negative.lambdas = {-1.0};
  EXPECT_THROW(validate(negative), Error);
  SweepOptions empty;
  empty.models.clear();
  EXPECT_THROW(validate(empty), Error);
}

TEST(CliEval, ReportSchema) {
  const auto dir = scratch("eval");
  std::ostringstream log;
  GenDataOptions g;
  g.out_dir = dir.string();
  cmd_gen_data(g, log);
  TrainOptions t;
  t.fit = quick_fit(LayerKind::Enn);
  t.out_dir = dir.string();
  cmd_train(t, log);
  EvalOptions e;
  e.checkpoint = (dir / "checkpoint.csv").string();
  e.data = {(dir / "test.csv").string()};
  e.out_dir = dir.string();
  cmd_eval(e, log);
  std::istringstream report(slurp(dir / "report.csv"));
  std::string line;
  std::vector<std::string> names;
  std::getline(report, line);
  EXPECT_EQ(line, "metric,value");
  while (std::getline(report, line)) names.push_back(line.substr(0, line.find(',')));
  EXPECT_EQ(names, (std::vector<std::string>{"loss", "error_rate", "mean_ignorance", "ece"}));
  e.data.push_back(e.data.front());
  EXPECT_THROW(eval_report(e), Error);
}

TEST(CliEval, Segmentation) {
  const auto dir = scratch("eval_seg");
  std::ostringstream log;
  GenDataOptions g;
  g.task = "seg";
  g.width = 16;
  g.height = 16;
  g.blobs = 1;
  g.test_images = 2;
  g.out_dir = dir.string();
  cmd_gen_data(g, log);
  TrainOptions t;
  t.fit = quick_fit(LayerKind::Enn);
  t.fit.loss = LossKind::Dice;
  t.fit.init = InitKind::Random;
  t.fit.features = 2;
  t.out_dir = dir.string();
  cmd_train(t, log);
  EvalOptions e;
  e.checkpoint = (dir / "checkpoint.csv").string();
  e.task = "seg";
  e.width = 16;
  e.height = 16;
  e.data = {(dir / "test_0.csv").string(), (dir / "test_1.csv").string()};
  const auto report = eval_report(e);
  ASSERT_EQ(report.size(), 5u);
  EXPECT_EQ(report[0].first, "dice");
  for (const auto& [name, value] : report) {
    EXPECT_GE(value, 0.0) << name;
    EXPECT_LE(value, 1.0) << name;
  }
  e.width = 8;
  EXPECT_THROW(eval_report(e), Error);
}

TEST(CliContours, GridAndDimensionCheck) {
  const auto dir = scratch("contours");
  std::ostringstream log;
  const Model two{std::nullopt, rbf_init_random(3, 2, 1)};
  save_checkpoint((dir / "two.csv").string(), two);
  ContourOptions c;
  c.checkpoint = (dir / "two.csv").string();
  c.out_dir = dir.string();
  cmd_contours(c, log);
  EXPECT_EQ(line_count(dir / "contours.csv"), 200u * 200 + 1);

  const Model three{std::nullopt, rbf_init_random(3, 3, 1)};
  save_checkpoint((dir / "three.csv").string(), three);
  c.checkpoint = (dir / "three.csv").string();
  try {
    cmd_contours(c, log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}
