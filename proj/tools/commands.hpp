#pragma once

// Command implementations behind the `evidential` executable. Each command
// takes a plain options struct, writes its files under `out_dir`, and
// reports a summary on the given stream.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "evidential/evidential.hpp"

namespace evidential::cli {

namespace fs = std::filesystem;

inline fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  detail::require(!ec, ErrorCode::Io, "cannot create directory " + dir);
  return fs::path(dir);
}

inline std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  detail::require(out.good(), ErrorCode::Io, "cannot write " + path.string());
  out.precision(17);
  return out;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataOptions {
  std::string task = "moons";
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::size_t n_train = 300;
  std::size_t n_test = 1000;
  double noise = kDefaultMoonNoise;
  bool ood = false;
  std::size_t n_ood = 200;
  std::size_t width = 64;
  std::size_t height = 64;
  std::size_t blobs = 3;
  std::size_t train_images = 2;
  std::size_t test_images = 4;
};

inline void cmd_gen_data(const GenDataOptions& o, std::ostream& log) {
  const auto dir = prepare_dir(o.out_dir);
  if (o.task == "moons") {
    const auto data = make_moons_data(o.seed, {o.n_train, o.n_test, o.n_ood, o.noise});
    save_set((dir / "train.csv").string(), data.train);
    save_set((dir / "test.csv").string(), data.test);
    if (o.ood) save_set((dir / "ood.csv").string(), data.ood);
    log << "wrote " << data.train.size() << " train, " << data.test.size() << " test"
        << (o.ood ? ", " + std::to_string(data.ood.size()) + " ood" : std::string()) << " samples to "
        << dir.string() << '\n';
    return;
  }
  if (o.task == "seg") {
    const auto data = make_seg_data(o.seed, {o.width, o.height, o.blobs, o.train_images, o.test_images});
    save_set((dir / "train.csv").string(), stack_pixels(data.train));
    for (std::size_t i = 0; i < data.test.size(); ++i)
      save_set((dir / ("test_" + std::to_string(i) + ".csv")).string(), pixels_as_samples(data.test[i]));
    log << "wrote " << data.train.size() << " train and " << data.test.size() << " test images (" << o.width << 'x'
        << o.height << ") to " << dir.string() << '\n';
    return;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown task '" + o.task + "'");
}

// ---------------------------------------------------------------------------
// Model fitting shared by train and sweep.

struct FitOptions {
  LayerKind layer = LayerKind::Enn;
  InitKind init = InitKind::KMeans;
  std::size_t prototypes = 6;
  std::size_t features = 0;  // H; 0 puts the layer directly on the inputs
  std::size_t hidden = 16;
  double lambda = 1e-3;
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  std::optional<LossKind> loss;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;

  LossKind loss_kind() const { return loss.value_or(default_loss(layer)); }
};

struct FitResult {
  Model model;
  TrainHistory history;
  std::size_t best_epoch = 0;
};

/// With a feature network, k-means initialization runs the four-stage
/// protocol, each stage for `epochs` epochs, and the returned history covers
/// stages 3 and 4.
inline FitResult fit(const FitOptions& o, const LabeledSet& data, const LabeledSet* validation = nullptr) {
  TrainConfig config;
  config.epochs = o.epochs;
  config.learning_rate = o.learning_rate;
  config.lambda = o.lambda;
  config.loss = o.loss_kind();
  config.batch_size = o.batch_size;
  config.seed = derive_seed(o.seed, 4);

  if (o.features == 0) {
    const MoonsRunSettings run{o.layer, o.init, o.prototypes, o.lambda, o.epochs, o.learning_rate};
    const Model init = init_moons_model(run, data, derive_seed(o.seed, 3));
    auto r = train(init, data, validation, config);
    return {std::move(r.model), std::move(r.history), r.best_epoch};
  }

  const Architecture arch{{data.dim(), o.hidden, o.features}, o.layer, o.prototypes, 2};
  if (o.init == InitKind::Random) {
    auto r = train(init_model_random(arch, derive_seed(o.seed, 5)), data, validation, config);
    return {std::move(r.model), std::move(r.history), r.best_epoch};
  }
  auto staged = FourStageConfig::defaults(o.layer, o.lambda, o.epochs);
  staged.pretrain.learning_rate = o.learning_rate;
  staged.seed = derive_seed(o.seed, 7);
  for (TrainConfig* t : {&staged.pretrain, &staged.layer_only, &staged.finetune}) {
    t->loss = config.loss;
    t->batch_size = o.batch_size;
    t->seed = config.seed;
  }
  auto r = four_stage_init(data, arch, staged, validation);
  FitResult out{std::move(r.model), std::move(r.stage3), 0};
  for (auto rec : r.stage4.records) {
    rec.epoch += o.epochs;
    out.history.records.push_back(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  FitOptions fit;
  std::string train_path;  // defaults to <out_dir>/train.csv
  std::string val_path;
  std::string out_dir = ".";
};

inline void cmd_train(const TrainOptions& o, std::ostream& log) {
  const auto dir = prepare_dir(o.out_dir);
  const auto data = load_set(o.train_path.empty() ? (dir / "train.csv").string() : o.train_path);
  std::optional<LabeledSet> val;
  if (!o.val_path.empty()) val = load_set(o.val_path);
  const auto result = fit(o.fit, data, val ? &*val : nullptr);

  save_checkpoint((dir / "checkpoint.csv").string(), result.model);
  auto history = open_output(dir / "history.csv");
  write_history_csv(history, result.history);

  const auto ev = evaluate(result.model, data.points, data.labels, o.fit.loss_kind(), o.fit.lambda, false);
  log << "model=" << to_string(o.fit.layer) << " init=" << to_string(o.fit.init) << " I=" << o.fit.prototypes
      << " H=" << o.fit.features << " lambda=" << o.fit.lambda << " epochs=" << o.fit.epochs
      << " best_epoch=" << result.best_epoch << " loss=" << ev.loss << " train_error=" << ev.error_rate
      << " mean_ignorance=" << ev.mean_ignorance << '\n';
}

// ---------------------------------------------------------------------------
// sweep

inline FitOptions moons_defaults() {
  FitOptions f;
  f.epochs = 1000;
  f.learning_rate = 1e-2;
  return f;
}

struct SweepOptions {
  std::vector<LayerKind> models{LayerKind::Enn, LayerKind::Rbf};
  std::vector<double> lambdas{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<std::size_t> prototypes{6};
  std::vector<std::size_t> features{0};
  FitOptions base = moons_defaults();
  MoonsDataSettings data;
  std::string out_dir = ".";
  std::size_t jobs = 1;
};

namespace parsing {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> items;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

template <class T>
T parse_number(const std::string& key, const std::string& s) {
  std::istringstream in(s);
  T v{};
  in >> v;
  detail::require(in && in.eof(), ErrorCode::Parse, key + ": not a number: '" + s + "'");
  return v;
}

template <class T>
std::vector<T> parse_numbers(const std::string& key, const std::string& value) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) out.push_back(parse_number<T>(key, item));
  return out;
}

}  // namespace parsing

/// Reads `key = value[, value...]` lines into `o`; `#` starts a comment.
inline void apply_sweep_spec(std::istream& is, SweepOptions& o) {
  using parsing::parse_number;
  using parsing::parse_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = parsing::trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    detail::require(eq != std::string::npos, ErrorCode::Parse,
                                "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = parsing::trim(line.substr(0, eq));
    const std::string value = parsing::trim(line.substr(eq + 1));
    if (key == "models") {
      o.models.clear();
      for (const auto& m : parsing::split_list(value)) o.models.push_back(parse_layer_kind(m));
    } else if (key == "lambdas") {
      o.lambdas = parse_numbers<double>(key, value);
    } else if (key == "seeds") {
      o.seeds = parse_numbers<std::uint64_t>(key, value);
    } else if (key == "I") {
      o.prototypes = parse_numbers<std::size_t>(key, value);
    } else if (key == "H") {
      o.features = parse_numbers<std::size_t>(key, value);
    } else if (key == "init") {
      o.base.init = parse_init_kind(value);
    } else if (key == "hidden") {
      o.base.hidden = parse_number<std::size_t>(key, value);
    } else if (key == "epochs") {
      o.base.epochs = parse_number<std::size_t>(key, value);
    } else if (key == "lr") {
      o.base.learning_rate = parse_number<double>(key, value);
    } else if (key == "batch_size") {
      o.base.batch_size = parse_number<std::size_t>(key, value);
    } else if (key == "n_train") {
      o.data.train_size = parse_number<std::size_t>(key, value);
    } else if (key == "n_test") {
      o.data.test_size = parse_number<std::size_t>(key, value);
    } else if (key == "n_ood") {
      o.data.ood_size = parse_number<std::size_t>(key, value);
    } else if (key == "noise") {
      o.data.noise = parse_number<double>(key, value);
    } else {
      throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
}

inline void validate(const SweepOptions& o) {
  detail::require(!o.models.empty() && !o.lambdas.empty() && !o.seeds.empty() && !o.prototypes.empty() &&
                                  !o.features.empty(),
                              ErrorCode::InvalidArgument, "sweep grids must be nonempty");
  auto seeds = o.seeds;
  std::sort(seeds.begin(), seeds.end());
  detail::require(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end(),
                              ErrorCode::InvalidArgument, "sweep seeds must be distinct");
  for (double l : o.lambdas) detail::require(l >= 0.0, ErrorCode::InvalidArgument, "negative lambda");
}

struct SweepPoint {
  LayerKind layer;
  std::size_t prototypes;
  std::size_t features;
  double lambda;
  std::uint64_t seed;
};

struct SweepRow {
  SweepPoint point;
  double test_error = 0.0;
  double test_ignorance = 0.0;
  double ood_ignorance = 0.0;
};

inline std::vector<SweepPoint> sweep_grid(const SweepOptions& o) {
  std::vector<SweepPoint> grid;
  for (auto layer : o.models)
    for (auto I : o.prototypes)
      for (auto H : o.features)
        for (double lambda : o.lambdas)
          for (auto seed : o.seeds) grid.push_back({layer, I, H, lambda, seed});
  return grid;
}

inline SweepRow run_sweep_point(const SweepOptions& o, const SweepPoint& p) {
  const auto data = make_moons_data(p.seed, o.data);
  FitOptions f = o.base;
  f.layer = p.layer;
  f.prototypes = p.prototypes;
  f.features = p.features;
  f.lambda = p.lambda;
  f.seed = p.seed;
  const auto result = fit(f, data.train);
  const auto test = evaluate(result.model, data.test.points, data.test.labels, f.loss_kind(), f.lambda, false);
  return {p, test.error_rate, test.mean_ignorance, mean_ignorance_on(result.model, data.ood)};
}

/// Runs every grid point on `o.jobs` workers; rows come back in grid order.
inline std::vector<SweepRow> run_sweep(const SweepOptions& o) {
  validate(o);
  const auto grid = sweep_grid(o);
  std::vector<SweepRow> rows(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        rows[i] = run_sweep_point(o, grid[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t width = std::clamp<std::size_t>(o.jobs, 1, std::max<std::size_t>(1, grid.size()));
  std::vector<std::jthread> pool;
  for (std::size_t w = 1; w < width; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
  auto old = os.precision(17);
  os << "model,I,H,lambda,seed,test_error,mean_ignorance,ood_ignorance\n";
  for (const auto& r : rows) {
    os << to_string(r.point.layer) << ',' << r.point.prototypes << ',' << r.point.features << ',' << r.point.lambda
       << ',' << r.point.seed << ',' << r.test_error << ',' << r.test_ignorance << ',' << r.ood_ignorance << '\n';
  }
  os.precision(old);
}

inline void cmd_sweep(const SweepOptions& o, std::ostream& log) {
  const auto dir = prepare_dir(o.out_dir);
  const auto rows = run_sweep(o);
  auto out = open_output(dir / "sweep.csv");
  write_sweep_csv(out, rows);

  // Seed-averaged summary per (model, I, H, lambda).
  std::map<std::tuple<int, std::size_t, std::size_t, double>, std::array<double, 3>> sums;
  for (const auto& r : rows) {
    auto& s = sums[{static_cast<int>(r.point.layer), r.point.prototypes, r.point.features, r.point.lambda}];
    s[0] += r.test_error;
    s[1] += r.test_ignorance;
    s[2] += 1.0;
  }
  for (const auto& [key, s] : sums) {
    log << to_string(static_cast<LayerKind>(std::get<0>(key))) << " I=" << std::get<1>(key)
        << " H=" << std::get<2>(key) << " lambda=" << std::get<3>(key) << " mean_test_error=" << s[0] / s[2]
        << " mean_ignorance=" << s[1] / s[2] << '\n';
  }
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::string checkpoint;
  std::vector<std::string> data;  // one file; one per image for segmentation
  std::string ood_path;
  std::string task = "class";
  std::size_t width = 64;
  std::size_t height = 64;
  std::optional<LossKind> loss;
  double lambda = 0.0;
  std::size_t bins = 10;
  std::string out_dir = ".";
};

using Report = std::vector<std::pair<std::string, double>>;

inline Report eval_report(const EvalOptions& o) {
  detail::require(!o.data.empty(), ErrorCode::InvalidArgument, "no evaluation data given");
  const Model model = load_checkpoint(o.checkpoint);
  Report report;

  if (o.task == "seg") {
    std::vector<ToySegTask> tasks;
    for (const auto& path : o.data) {
      const auto set = load_set(path);
      detail::require(set.size() == o.width * o.height && set.dim() == 2, ErrorCode::ShapeMismatch,
                                  path + " is not a " + std::to_string(o.width) + "x" + std::to_string(o.height) +
                                      " two-channel image");
      ToySegTask t{o.width, o.height, {}, {}, set.labels};
      for (std::size_t i = 0; i < set.size(); ++i) {
        t.intensity.push_back(set.points(i, 0));
        t.context.push_back(set.points(i, 1));
      }
      tasks.push_back(std::move(t));
    }
    const auto ev = evaluate_segmentation(model, tasks);
    report = {{"dice", ev.scores.dice},
              {"sensitivity", ev.scores.sensitivity},
              {"precision", ev.scores.precision},
              {"mean_image_dice", ev.mean_dice},
              {"ece_tumor_box", ev.mean_ece}};
    return report;
  }
  detail::require(o.task == "class", ErrorCode::InvalidArgument, "unknown task '" + o.task + "'");
  detail::require(o.data.size() == 1, ErrorCode::InvalidArgument, "classification takes one data file");

  const auto set = load_set(o.data.front());
  const auto ev = evaluate(model, set.points, set.labels, o.loss.value_or(default_loss(model.kind())), o.lambda, false);
  std::vector<double> confidence;
  for (const auto& m : ev.masses) {
    const auto p = pignistic_from_mass(m);
    confidence.push_back(*std::max_element(p.begin(), p.end()));
  }
  const auto calibration = ece(std::span<const double>(confidence), std::span<const std::size_t>(ev.predictions),
                               std::span<const int>(set.labels), o.bins);
  report = {{"loss", ev.loss},
            {"error_rate", ev.error_rate},
            {"mean_ignorance", ev.mean_ignorance},
            {"ece", calibration.ece}};
  if (!o.ood_path.empty()) report.emplace_back("ood_mean_ignorance", mean_ignorance_on(model, load_set(o.ood_path)));
  return report;
}

inline void cmd_eval(const EvalOptions& o, std::ostream& log) {
  const auto dir = prepare_dir(o.out_dir);
  const auto report = eval_report(o);
  auto out = open_output(dir / "report.csv");
  out << "metric,value\n";
  for (const auto& [name, value] : report) {
    out << name << ',' << value << '\n';
    log << name << '=' << value << '\n';
  }
}

// ---------------------------------------------------------------------------
// contours

struct ContourOptions {
  std::string checkpoint;
  std::string out_dir = ".";
  std::size_t resolution = 200;
  std::array<double, 2> x_range{-2.0, 3.0};
  std::array<double, 2> y_range{-2.0, 5.5};
};

inline void write_contours_csv(std::ostream& os, std::span<const ContourCell> grid) {
  auto old = os.precision(17);
  os << "x,y,m1,m2,mOmega\n";
  for (const auto& c : grid) os << c.x << ',' << c.y << ',' << c.mass[0] << ',' << c.mass[1] << ',' << c.mass[2] << '\n';
  os.precision(old);
}

inline void cmd_contours(const ContourOptions& o, std::ostream& log) {
  const Model model = load_checkpoint(o.checkpoint);
  detail::require(model.input_dim() == 2, ErrorCode::DimensionMismatch,
                              "contours need a model with 2 inputs, got " + std::to_string(model.input_dim()));
  detail::require(model.num_classes() == 2, ErrorCode::DimensionMismatch,
                              "contours need a binary model");
  const auto dir = prepare_dir(o.out_dir);
  const auto grid = contour_grid([&](std::span<const double> x) { return model_forward(model, x).mass; }, o.x_range,
                                 o.y_range, o.resolution);
  auto out = open_output(dir / "contours.csv");
  write_contours_csv(out, grid);
  log << "wrote " << grid.size() << " cells to " << (dir / "contours.csv").string() << '\n';
}

}  // namespace evidential::cli
