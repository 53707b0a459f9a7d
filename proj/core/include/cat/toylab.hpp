#pragma once

// Desk-scale analog of affinity-initialized finetuning. A "generator" here is
// a per-class color table: the target prediction for class k is
// (affinity row k) . source_table + residual[k], trained by mean squared
// pixel error. Everything is deterministic for a given seed.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cat/affinity.hpp"
#include "cat/label_map.hpp"
#include "cat/matrix.hpp"

namespace cat::toy {

inline constexpr std::size_t kChannels = 3;

enum class AffinitySource {
  estimated,  // confusion affinity from a nearest-color source segmenter
  oracle,     // hard affinity built from the true mapping
};

struct ToyConfig {
  std::size_t source_classes = 12;
  std::size_t target_classes = 8;
  std::size_t width = 16;
  std::size_t height = 16;
  std::size_t tile = 4;  // label maps are tile x tile blocks of one class
  std::size_t source_images = 20;
  std::size_t target_images = 5;  // M, the few-shot budget
  std::size_t unmapped_targets = 0;  // target classes with no source counterpart
  double noise_sigma = 0.05;
  double drift = 0.05;  // bound on ||target appearance - mapped source appearance||
  std::size_t stage1_iters = 300;
  std::size_t stage2_iters = 300;
  double lr = 0.05;
  double convergence_mse = 0.005;  // 2 * noise_sigma^2
  AffinitySource affinity_source = AffinitySource::estimated;

  void validate() const;
};

std::string to_json(const ToyConfig& config);
ToyConfig parse_toy_config(std::string_view json_text);

struct ToyWorld {
  ClassSetPtr source_classes;
  ClassSetPtr target_classes;
  Matrix source_appearance;  // C_S x 3, entries in [0,1]
  Matrix target_appearance;  // C_T x 3
  std::vector<std::optional<std::size_t>> true_mapping;  // target -> source
  double noise_sigma = 0.0;
  double drift = 0.0;
  std::uint64_t seed = 0;
};

struct ToyImage {
  LabelMap labels;
  std::vector<double> pixels;  // pixel-major RGB in [0,1]
};

using ToyDataset = std::vector<ToyImage>;

struct GeneratedWorld {
  ToyWorld world;
  ToyDataset source;
  ToyDataset target;
};

GeneratedWorld gen_world(const ToyConfig& config, std::uint64_t seed);

/// Per-class mean color. Throws if any class has no pixels.
Matrix fit_source(const ToyDataset& dataset, std::size_t class_count);

enum class Stage { training_free, stage1, stage2 };
std::string_view to_string(Stage stage);

struct ToyModel {
  Matrix source_table;     // C_S x 3
  AffinityMatrix affinity;  // C_T x C_S
  Matrix residual;         // C_T x 3, zero at initialization
  Stage stage = Stage::training_free;

  /// C_T x 3 table of predicted class colors.
  Matrix predict() const;
};

ToyModel init_target(const Matrix& source_table, const AffinityMatrix& affinity);
/// Uniform [0,1) entries, row-normalized, drawn from Rng(seed).
ToyModel init_target_random(const Matrix& source_table, ClassSetPtr source_classes,
                            ClassSetPtr target_classes, std::uint64_t seed);

/// Mean over pixels and channels of (prediction - pixel)^2.
double toy_loss(const ToyModel& model, const ToyDataset& dataset);

struct ToyGradients {
  Matrix affinity;
  Matrix residual;
  Matrix source_table;
};

ToyGradients toy_gradients(const ToyModel& model, const ToyDataset& dataset);

/// Euclidean projection of v onto the probability simplex.
void project_to_simplex(std::span<double> v);

struct StagePlan {
  std::size_t stage1_iters = 0;
  std::size_t stage2_iters = 0;
  double lr = 0.05;
};

struct TrainResult {
  ToyModel model;
  std::vector<double> loss_trace;  // loss after each update
};

/// Plain gradient descent. Stage 1 updates affinity and residual, stage 2
/// additionally the source table; affinity rows are projected back onto the
/// simplex after every step. Throws Error(numeric) naming the iteration if
/// the loss stops being finite.
TrainResult train_target(const ToyModel& model, const ToyDataset& dataset,
                         const StagePlan& plan);

/// Labels each pixel with the source class of nearest color, then builds the
/// confusion affinity against the dataset's target labels.
AffinityMatrix estimate_affinity(const Matrix& source_table, ClassSetPtr source_classes,
                                 const ToyDataset& target);

AffinityMatrix oracle_affinity(const ToyWorld& world);

struct RunRecord {
  double training_free_mse = 0.0;  // initial loss with zero residual
  double final_mse = 0.0;
  std::size_t iters_to_threshold = 0;  // total+1 when never reached
  bool reached_threshold = false;
};

struct SeedRecord {
  std::uint64_t seed = 0;
  RunRecord affinity_init;
  RunRecord random_init;
};

struct ExperimentReport {
  ToyConfig config;
  std::vector<SeedRecord> seeds;
  std::size_t initial_mse_wins = 0;     // affinity init strictly lower
  std::size_t convergence_wins = 0;     // affinity init strictly fewer iterations
  std::size_t final_mse_wins = 0;

  std::string to_json() const;
};

SeedRecord run_seed(const ToyConfig& config, std::uint64_t seed);
ExperimentReport run_experiment(const ToyConfig& config,
                                const std::vector<std::uint64_t>& seeds);

}  // namespace cat::toy
