#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace evidential;
using namespace evidential::cli;

namespace {

// Flags shared by train and sweep; `layer` and `init` are parsed after CLI11 is done.
struct ModelFlags {
  std::string layer = "enn";
  std::string init = "kmeans";
  std::string loss;
};

void add_model_flags(CLI::App* app, ModelFlags& m, FitOptions& f) {
  app->add_option("--model", m.layer, "evidential layer")->check(CLI::IsMember({"enn", "rbf"}));
  app->add_option("--init", m.init, "prototype initialization")->check(CLI::IsMember({"random", "kmeans"}));
  app->add_option("--loss", m.loss, "training loss (default: sse for enn, ce for rbf)")
      ->check(CLI::IsMember({"sse", "ce", "dice"}));
  app->add_option("--H", f.features, "feature count; 0 trains the layer on the raw inputs");
  app->add_option("--hidden", f.hidden, "hidden width of the feature network");
  app->add_option("--epochs", f.epochs, "epochs (per stage for four-stage init)");
  app->add_option("--lr", f.learning_rate, "initial learning rate");
  app->add_option("--batch-size", f.batch_size, "minibatch size; 0 for full batch");
}

void resolve(const ModelFlags& m, FitOptions& f) {
  f.layer = parse_layer_kind(m.layer);
  f.init = parse_init_kind(m.init);
  if (!m.loss.empty()) f.loss = parse_loss_kind(m.loss);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidential classifiers: data generation, training, sweeps and evaluation"};
  app.require_subcommand(1);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "write synthetic datasets as CSV");
  gen_cmd->add_option("--task", gen.task, "dataset")->check(CLI::IsMember({"moons", "seg"}));
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--out-dir", gen.out_dir);
  gen_cmd->add_option("--n-train", gen.n_train);
  gen_cmd->add_option("--n-test", gen.n_test);
  gen_cmd->add_option("--noise", gen.noise);
  gen_cmd->add_flag("--ood", gen.ood, "also write an out-of-distribution class");
  gen_cmd->add_option("--n-ood", gen.n_ood);
  gen_cmd->add_option("--width", gen.width);
  gen_cmd->add_option("--height", gen.height);
  gen_cmd->add_option("--blobs", gen.blobs);
  gen_cmd->add_option("--train-images", gen.train_images);
  gen_cmd->add_option("--test-images", gen.test_images);

  TrainOptions tr;
  ModelFlags tr_flags;
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint.csv and history.csv");
  add_model_flags(train_cmd, tr_flags, tr.fit);
  train_cmd->add_option("--seed", tr.fit.seed);
  train_cmd->add_option("--out-dir", tr.out_dir);
  train_cmd->add_option("--I", tr.fit.prototypes, "number of prototypes");
  train_cmd->add_option("--lambda", tr.fit.lambda, "regularization coefficient");
  train_cmd->add_option("--data", tr.train_path, "training CSV (default: <out-dir>/train.csv)");
  train_cmd->add_option("--val", tr.val_path, "validation CSV used for model selection");

  SweepOptions sw;
  ModelFlags sw_flags;
  std::string spec_path;
  std::vector<std::string> sw_models;
  auto* sweep_cmd = app.add_subcommand("sweep", "train over a model x I x H x lambda x seed grid on half moons");
  add_model_flags(sweep_cmd, sw_flags, sw.base);
  sweep_cmd->add_option("--spec", spec_path, "key = value file; overrides the flags")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out-dir", sw.out_dir);
  sweep_cmd->add_option("--jobs", sw.jobs, "worker threads");
  sweep_cmd->add_option("--models", sw_models)->delimiter(',')->check(CLI::IsMember({"enn", "rbf"}));
  sweep_cmd->add_option("--lambda", sw.lambdas, "lambda grid")->delimiter(',');
  sweep_cmd->add_option("--seed", sw.seeds, "seed grid")->delimiter(',');
  sweep_cmd->add_option("--I", sw.prototypes, "prototype-count grid")->delimiter(',');
  sweep_cmd->add_option("--H-grid", sw.features, "feature-count grid")->delimiter(',');

  EvalOptions ev;
  std::string ev_loss;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint and write report.csv");
  eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  eval_cmd->add_option("--data", ev.data, "test CSV; one per image for --task seg")->required();
  eval_cmd->add_option("--ood", ev.ood_path, "out-of-distribution CSV");
  eval_cmd->add_option("--task", ev.task)->check(CLI::IsMember({"class", "seg"}));
  eval_cmd->add_option("--width", ev.width);
  eval_cmd->add_option("--height", ev.height);
  eval_cmd->add_option("--loss", ev_loss)->check(CLI::IsMember({"sse", "ce", "dice"}));
  eval_cmd->add_option("--lambda", ev.lambda);
  eval_cmd->add_option("--bins", ev.bins, "calibration bins");
  eval_cmd->add_option("--out-dir", ev.out_dir);

  ContourOptions ct;
  auto* contour_cmd = app.add_subcommand("contours", "write the output masses on a 2-D grid to contours.csv");
  contour_cmd->add_option("--checkpoint", ct.checkpoint)->required();
  contour_cmd->add_option("--out-dir", ct.out_dir);
  contour_cmd->add_option("--resolution", ct.resolution, "grid points per axis");
  contour_cmd->add_option("--x-range", ct.x_range)->expected(2);
  contour_cmd->add_option("--y-range", ct.y_range)->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << to_string(ErrorCode::InvalidArgument) << ": " << e.what() << '\n';
    return 2;
  }

  try {
    if (*gen_cmd) {
      cmd_gen_data(gen, std::cout);
    } else if (*train_cmd) {
      resolve(tr_flags, tr.fit);
      cmd_train(tr, std::cout);
    } else if (*sweep_cmd) {
      resolve(sw_flags, sw.base);
      if (!sw_models.empty()) {
        sw.models.clear();
        for (const auto& m : sw_models) sw.models.push_back(parse_layer_kind(m));
      }
      if (!spec_path.empty()) {
        std::ifstream spec(spec_path);
        apply_sweep_spec(spec, sw);
      }
      cmd_sweep(sw, std::cout);
    } else if (*eval_cmd) {
      if (!ev_loss.empty()) ev.loss = parse_loss_kind(ev_loss);
      cmd_eval(ev, std::cout);
    } else if (*contour_cmd) {
      cmd_contours(ct, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
