#pragma once

// End-to-end experiment drivers shared by the command-line tool and the
// acceptance suite: the half-moon model comparison, and the Dice-loss toy
// segmentation task.

#include <cstdint>
#include <optional>
#include <vector>

#include "evidential/data.hpp"
#include "evidential/metrics.hpp"
#include "evidential/model.hpp"
#include "evidential/train.hpp"

namespace evidential {

/// splitmix64 finalizer; derives independent seeds for each random stream of a run.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class InitKind { Random, KMeans };

inline InitKind parse_init_kind(std::string_view s) {
  if (s == "random") return InitKind::Random;
  if (s == "kmeans") return InitKind::KMeans;
  throw Error(ErrorCode::InvalidArgument, "unknown init '" + std::string(s) + "'");
}

inline std::string_view to_string(InitKind k) { return k == InitKind::Random ? "random" : "kmeans"; }

struct MoonsData {
  LabeledSet train;
  LabeledSet test;
  LabeledSet ood;
};

struct MoonsDataSettings {
  std::size_t train_size = 300;
  std::size_t test_size = 1000;
  std::size_t ood_size = 200;
  double noise = kDefaultMoonNoise;
};

inline MoonsData make_moons_data(std::uint64_t seed, const MoonsDataSettings& s = {}) {
  return {gen_half_moons(s.train_size, s.noise, derive_seed(seed, 0)),
          gen_half_moons(s.test_size, s.noise, derive_seed(seed, 1)),
          gen_ood_class(s.ood_size, derive_seed(seed, 2))};
}

/// Stand-alone evidential layer on raw 2-D inputs.
struct MoonsRunSettings {
  LayerKind layer = LayerKind::Enn;
  InitKind init = InitKind::KMeans;
  std::size_t prototypes = 6;
  double lambda = 1e-3;
  std::size_t epochs = 1000;
  double learning_rate = 1e-2;
};

struct MoonsOutcome {
  Model model;
  TrainHistory history;
  double test_error = 0.0;
  double test_ignorance = 0.0;
  double ood_ignorance = 0.0;
};

inline double mean_ignorance_on(const Model& model, const LabeledSet& set) {
  double total = 0.0;
  for (std::size_t n = 0; n < set.size(); ++n) total += model_forward(model, set.points.row(n)).mass.back();
  return total / static_cast<double>(set.size());
}

inline Model init_moons_model(const MoonsRunSettings& run, const LabeledSet& train, std::uint64_t seed) {
  if (run.init == InitKind::KMeans) return init_layer_kmeans(run.layer, train.points, train.labels, run.prototypes, 2, seed);
  return init_layer_random(run.layer, run.prototypes, train.dim(), 2, seed);
}

inline MoonsOutcome run_moons(const MoonsData& data, const MoonsRunSettings& run, std::uint64_t seed) {
  TrainConfig config;
  config.epochs = run.epochs;
  config.learning_rate = run.learning_rate;
  config.lambda = run.lambda;
  config.loss = default_loss(run.layer);
  config.seed = derive_seed(seed, 4);

  const Model init = init_moons_model(run, data.train, derive_seed(seed, 3));
  auto trained = train(init, data.train, nullptr, config);
  MoonsOutcome out{std::move(trained.model), std::move(trained.history)};
  const auto test = evaluate(out.model, data.test.points, data.test.labels, config.loss, run.lambda, false);
  out.test_error = test.error_rate;
  out.test_ignorance = test.mean_ignorance;
  out.ood_ignorance = mean_ignorance_on(out.model, data.ood);
  return out;
}

// ---------------------------------------------------------------------------
// Toy segmentation with the Dice loss.

struct SegDataSettings {
  std::size_t width = 64;
  std::size_t height = 64;
  std::size_t blobs = 3;
  std::size_t train_images = 2;
  std::size_t test_images = 4;
};

struct SegData {
  std::vector<ToySegTask> train;
  std::vector<ToySegTask> test;
};

inline SegData make_seg_data(std::uint64_t seed, const SegDataSettings& s = {}) {
  SegData d;
  for (std::size_t i = 0; i < s.train_images; ++i)
    d.train.push_back(gen_toy_segmentation(s.width, s.height, s.blobs, derive_seed(seed, 100 + i)));
  for (std::size_t i = 0; i < s.test_images; ++i)
    d.test.push_back(gen_toy_segmentation(s.width, s.height, s.blobs, derive_seed(seed, 200 + i)));
  return d;
}

inline LabeledSet stack_pixels(const std::vector<ToySegTask>& tasks) {
  LabeledSet all;
  for (const auto& t : tasks) all = concat(all, pixels_as_samples(t));
  return all;
}

struct SegRunSettings {
  LayerKind layer = LayerKind::Enn;
  std::vector<std::size_t> feature_sizes{2, 16, 2};
  std::size_t prototypes = 10;
  double lambda = 0.0;
  std::size_t epochs = 200;
  double learning_rate = 1e-2;
};

struct SegEvaluation {
  SegScores scores;  // pooled over all test pixels
  double mean_dice = 0.0;  // per-image average
  double mean_ece = 0.0;   // per-image ECE inside the tumor bounding box
};

/// Per-pixel tumor decisions (w2) and pignistic confidence of the decision.
inline void segment(const Model& model, const ToySegTask& task, std::vector<int>& predicted,
                    std::vector<double>& confidence) {
  const auto samples = pixels_as_samples(task);
  predicted.resize(task.pixels());
  confidence.resize(task.pixels());
  for (std::size_t i = 0; i < task.pixels(); ++i) {
    const auto mass = model_forward(model, samples.points.row(i)).mass;
    const auto p = pignistic_from_mass(mass);
    predicted[i] = p[1] > p[0] ? 1 : 0;
    confidence[i] = std::max(p[0], p[1]);
  }
}

inline SegEvaluation evaluate_segmentation(const Model& model, const std::vector<ToySegTask>& tasks) {
  SegEvaluation ev;
  std::vector<int> all_pred, all_truth, predicted;
  std::vector<double> confidence;
  std::size_t ece_images = 0;
  for (const auto& task : tasks) {
    segment(model, task, predicted, confidence);
    all_pred.insert(all_pred.end(), predicted.begin(), predicted.end());
    all_truth.insert(all_truth.end(), task.mask.begin(), task.mask.end());
    ev.mean_dice += seg_scores(predicted, task.mask).dice;
    if (const auto box = tumor_bounding_box(task.mask, task.width, task.height)) {
      std::vector<double> conf;
      std::vector<int> pred, truth;
      for (std::size_t y = box->y0; y <= box->y1; ++y) {
        for (std::size_t x = box->x0; x <= box->x1; ++x) {
          const std::size_t i = y * task.width + x;
          conf.push_back(confidence[i]);
          pred.push_back(predicted[i]);
          truth.push_back(task.mask[i]);
        }
      }
      ev.mean_ece += ece(std::span<const double>(conf), std::span<const int>(pred), std::span<const int>(truth)).ece;
      ++ece_images;
    }
  }
  ev.scores = seg_scores(all_pred, all_truth);
  ev.mean_dice /= static_cast<double>(std::max<std::size_t>(1, tasks.size()));
  ev.mean_ece /= static_cast<double>(std::max<std::size_t>(1, ece_images));
  return ev;
}

struct SegOutcome {
  Model model;
  TrainHistory history;
  SegEvaluation test;
};

/// End-to-end training of feature network + evidential layer with the Dice loss.
inline SegOutcome run_segmentation(const SegData& data, const SegRunSettings& run, std::uint64_t seed) {
  Architecture arch{run.feature_sizes, run.layer, run.prototypes, 2};
  const Model init = init_model_random(arch, derive_seed(seed, 5));
  TrainConfig config;
  config.epochs = run.epochs;
  config.learning_rate = run.learning_rate;
  config.lambda = run.lambda;
  config.loss = LossKind::Dice;
  config.seed = derive_seed(seed, 6);
  auto trained = train(init, stack_pixels(data.train), nullptr, config);
  SegOutcome out{std::move(trained.model), std::move(trained.history), {}};
  out.test = evaluate_segmentation(out.model, data.test);
  return out;
}

// ---------------------------------------------------------------------------
// Four-stage k-means initialization against random initialization of a
// feature network + evidential layer on half-moon data.

struct InitComparisonSettings {
  LayerKind layer = LayerKind::Enn;
  std::vector<std::size_t> feature_sizes{2, 16, 2};
  std::size_t prototypes = 6;
  double lambda = 1e-3;
  std::size_t epochs_per_stage = 100;
  double learning_rate = 1e-3;  // stage 1 and the random-init run
};

struct InitComparison {
  double four_stage_error = 0.0;
  double random_error = 0.0;
};

/// The random-init run trains for as many epochs as the three training stages combined.
inline InitComparison compare_init(const MoonsData& data, const InitComparisonSettings& s, std::uint64_t seed) {
  const Architecture arch{s.feature_sizes, s.layer, s.prototypes, 2};
  const LossKind loss = default_loss(s.layer);

  auto staged = FourStageConfig::defaults(s.layer, s.lambda, s.epochs_per_stage);
  staged.pretrain.learning_rate = s.learning_rate;
  staged.seed = derive_seed(seed, 7);
  const auto four = four_stage_init(data.train, arch, staged);

  TrainConfig config;
  config.epochs = 3 * s.epochs_per_stage;
  config.learning_rate = s.learning_rate;
  config.lambda = s.lambda;
  config.loss = loss;
  const auto random = train(init_model_random(arch, derive_seed(seed, 8)), data.train, nullptr, config);

  return {evaluate(four.model, data.test.points, data.test.labels, loss, s.lambda, false).error_rate,
          evaluate(random.model, data.test.points, data.test.labels, loss, s.lambda, false).error_rate};
}

}  // namespace evidential
