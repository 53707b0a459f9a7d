#include "cat/toylab.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "cat/error.hpp"
#include "cat/parallel.hpp"
#include "cat/rng.hpp"
#include "cat/version.hpp"
#include "json.hpp"

namespace cat::toy {

namespace {

ClassSetPtr make_classes(const std::string& name, const std::string& prefix, std::size_t count) {
  std::vector<ClassEntry> entries;
  for (std::size_t i = 0; i < count; ++i) {
    entries.push_back({static_cast<int>(i), prefix + std::to_string(i)});
  }
  return std::make_shared<const ClassSet>(name, std::move(entries));
}

ToyImage render_image(const ToyConfig& config, const ClassSetPtr& classes,
                      const Matrix& appearance, Rng& rng) {
  const std::size_t tiles_x = (config.width + config.tile - 1) / config.tile;
  const std::size_t tiles_y = (config.height + config.tile - 1) / config.tile;
  std::vector<std::int32_t> tile_class(tiles_x * tiles_y);
  for (auto& c : tile_class) c = static_cast<std::int32_t>(rng.below(classes->size()));

  std::vector<std::int32_t> positions(config.width * config.height);
  std::vector<double> pixels(positions.size() * kChannels);
  for (std::size_t y = 0; y < config.height; ++y) {
    for (std::size_t x = 0; x < config.width; ++x) {
      const std::size_t i = y * config.width + x;
      const auto cls = tile_class[(y / config.tile) * tiles_x + x / config.tile];
      positions[i] = cls;
      for (std::size_t ch = 0; ch < kChannels; ++ch) {
        const double v = appearance(static_cast<std::size_t>(cls), ch) + config.noise_sigma * rng.normal();
        pixels[i * kChannels + ch] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return ToyImage{LabelMap::from_positions(classes, config.width, config.height, positions),
                  std::move(pixels)};
}

// Per-class residual sums sum_{pixels of k} (prediction_k - pixel) and counts.
struct ClassResiduals {
  Matrix sums;
  std::vector<std::uint64_t> counts;
  std::uint64_t pixels = 0;
};

ClassResiduals class_residuals(const Matrix& prediction, const ToyDataset& dataset) {
  ClassResiduals r{Matrix(prediction.rows(), kChannels), std::vector<std::uint64_t>(prediction.rows(), 0), 0};
  for (const auto& img : dataset) {
    const auto positions = img.labels.positions();
    for (std::size_t i = 0; i < positions.size(); ++i) {
      if (positions[i] == kIgnorePosition) continue;
      const auto k = static_cast<std::size_t>(positions[i]);
      for (std::size_t ch = 0; ch < kChannels; ++ch) {
        r.sums(k, ch) += prediction(k, ch) - img.pixels[i * kChannels + ch];
      }
      ++r.counts[k];
      ++r.pixels;
    }
  }
  return r;
}

std::uint64_t mix_seed(std::uint64_t seed) {
  // splitmix64 finalizer; decorrelates the random-affinity stream from the world stream.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

void ToyConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::domain, "invalid toy config: " + what);
  };
  require(source_classes >= 1 && target_classes >= 1, "class counts must be >= 1");
  require(width >= 1 && height >= 1, "image size must be >= 1");
  require(tile >= 1, "tile must be >= 1");
  require(source_images >= 1 && target_images >= 1, "image counts must be >= 1");
  require(unmapped_targets <= target_classes, "unmapped_targets exceeds target_classes");
  require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "noise_sigma must be >= 0");
  require(drift >= 0.0 && std::isfinite(drift), "drift must be >= 0");
  require(lr > 0.0 && std::isfinite(lr), "lr must be > 0");
  require(convergence_mse > 0.0, "convergence_mse must be > 0");
}

std::string to_json(const ToyConfig& c) {
  nlohmann::ordered_json j;
  j["source_classes"] = c.source_classes;
  j["target_classes"] = c.target_classes;
  j["width"] = c.width;
  j["height"] = c.height;
  j["tile"] = c.tile;
  j["source_images"] = c.source_images;
  j["target_images"] = c.target_images;
  j["unmapped_targets"] = c.unmapped_targets;
  j["noise_sigma"] = c.noise_sigma;
  j["drift"] = c.drift;
  j["stage1_iters"] = c.stage1_iters;
  j["stage2_iters"] = c.stage2_iters;
  j["lr"] = c.lr;
  j["convergence_mse"] = c.convergence_mse;
  j["affinity_source"] = c.affinity_source == AffinitySource::estimated ? "estimated" : "oracle";
  return j.dump();
}

ToyConfig parse_toy_config(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::parse, std::string("toy config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::parse, "toy config must be a JSON object");
  ToyConfig c;
  const std::map<std::string, std::function<void(const nlohmann::json&)>> setters = {
      {"source_classes", [&](const auto& v) { c.source_classes = v.template get<std::size_t>(); }},
      {"target_classes", [&](const auto& v) { c.target_classes = v.template get<std::size_t>(); }},
      {"width", [&](const auto& v) { c.width = v.template get<std::size_t>(); }},
      {"height", [&](const auto& v) { c.height = v.template get<std::size_t>(); }},
      {"tile", [&](const auto& v) { c.tile = v.template get<std::size_t>(); }},
      {"source_images", [&](const auto& v) { c.source_images = v.template get<std::size_t>(); }},
      {"target_images", [&](const auto& v) { c.target_images = v.template get<std::size_t>(); }},
      {"unmapped_targets", [&](const auto& v) { c.unmapped_targets = v.template get<std::size_t>(); }},
      {"noise_sigma", [&](const auto& v) { c.noise_sigma = v.template get<double>(); }},
      {"drift", [&](const auto& v) { c.drift = v.template get<double>(); }},
      {"stage1_iters", [&](const auto& v) { c.stage1_iters = v.template get<std::size_t>(); }},
      {"stage2_iters", [&](const auto& v) { c.stage2_iters = v.template get<std::size_t>(); }},
      {"lr", [&](const auto& v) { c.lr = v.template get<double>(); }},
      {"convergence_mse", [&](const auto& v) { c.convergence_mse = v.template get<double>(); }},
      {"affinity_source",
       [&](const auto& v) {
         const auto s = v.template get<std::string>();
         if (s == "estimated") {
           c.affinity_source = AffinitySource::estimated;
         } else if (s == "oracle") {
           c.affinity_source = AffinitySource::oracle;
         } else {
           fail(ErrorKind::parse, "affinity_source must be \"estimated\" or \"oracle\"");
         }
       }},
  };
  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) fail(ErrorKind::parse, "unknown toy config key \"" + key + "\"");
    try {
      it->second(value);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::parse, "toy config key \"" + key + "\": " + e.what());
    }
  }
  c.validate();
  return c;
}

GeneratedWorld gen_world(const ToyConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  GeneratedWorld g;
  ToyWorld& w = g.world;
  w.seed = seed;
  w.noise_sigma = config.noise_sigma;
  w.drift = config.drift;
  w.source_classes = make_classes("toy_source", "s", config.source_classes);
  w.target_classes = make_classes("toy_target", "t", config.target_classes);

  w.source_appearance = Matrix(config.source_classes, kChannels);
  for (double& v : w.source_appearance.data()) v = rng.uniform01();

  // Distinct source partners while they last, then with replacement.
  std::vector<std::size_t> partners(config.source_classes);
  std::iota(partners.begin(), partners.end(), 0);
  for (std::size_t i = partners.size(); i > 1; --i) {
    std::swap(partners[i - 1], partners[rng.below(i)]);
  }
  const std::size_t mapped = config.target_classes - config.unmapped_targets;
  w.true_mapping.assign(config.target_classes, std::nullopt);
  w.target_appearance = Matrix(config.target_classes, kChannels);
  for (std::size_t k = 0; k < config.target_classes; ++k) {
    if (k < mapped) {
      const std::size_t l = k < partners.size() ? partners[k] : rng.below(config.source_classes);
      w.true_mapping[k] = l;
      double dir[kChannels];
      double norm = 0.0;
      for (double& d : dir) {
        d = rng.normal();
        norm += d * d;
      }
      norm = std::sqrt(norm);
      const double radius = config.drift * rng.uniform01();
      for (std::size_t ch = 0; ch < kChannels; ++ch) {
        const double offset = norm > 0.0 ? radius * dir[ch] / norm : 0.0;
        // Clipping to the unit cube never moves the point further from the
        // (in-cube) source appearance, so the drift bound survives.
        w.target_appearance(k, ch) = std::clamp(w.source_appearance(l, ch) + offset, 0.0, 1.0);
      }
    } else {
      for (std::size_t ch = 0; ch < kChannels; ++ch) w.target_appearance(k, ch) = rng.uniform01();
    }
  }

  for (std::size_t i = 0; i < config.source_images; ++i) {
    g.source.push_back(render_image(config, w.source_classes, w.source_appearance, rng));
  }
  for (std::size_t i = 0; i < config.target_images; ++i) {
    g.target.push_back(render_image(config, w.target_classes, w.target_appearance, rng));
  }
  return g;
}

Matrix fit_source(const ToyDataset& dataset, std::size_t class_count) {
  // Running mean: constant inputs reproduce exactly, unlike sum / count.
  Matrix means(class_count, kChannels);
  std::vector<std::uint64_t> counts(class_count, 0);
  for (const auto& img : dataset) {
    const auto positions = img.labels.positions();
    for (std::size_t i = 0; i < positions.size(); ++i) {
      if (positions[i] == kIgnorePosition) continue;
      const auto k = static_cast<std::size_t>(positions[i]);
      if (k >= class_count) fail(ErrorKind::dimension, "label outside the fitted class range");
      const double n = static_cast<double>(++counts[k]);
      for (std::size_t ch = 0; ch < kChannels; ++ch) {
        means(k, ch) += (img.pixels[i * kChannels + ch] - means(k, ch)) / n;
      }
    }
  }
  for (std::size_t k = 0; k < class_count; ++k) {
    if (counts[k] == 0) {
      fail(ErrorKind::domain, "source class " + std::to_string(k) + " has no pixels to fit");
    }
  }
  return means;
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::training_free: return "training_free";
    case Stage::stage1: return "stage1";
    case Stage::stage2: return "stage2";
  }
  return "training_free";
}

Matrix ToyModel::predict() const {
  Matrix p = affinity.rows * source_table;
  auto pd = p.data();
  const auto rd = residual.data();
  for (std::size_t i = 0; i < pd.size(); ++i) pd[i] += rd[i];
  return p;
}

ToyModel init_target(const Matrix& source_table, const AffinityMatrix& affinity) {
  affinity.validate();
  if (affinity.rows.cols() != source_table.rows() || source_table.cols() != kChannels) {
    fail(ErrorKind::dimension, "affinity has " + std::to_string(affinity.rows.cols()) +
                                   " source columns but the source table has " +
                                   std::to_string(source_table.rows()) + " rows");
  }
  ToyModel m;
  m.source_table = source_table;
  m.affinity = affinity;
  m.residual = Matrix(affinity.rows.rows(), kChannels);
  m.stage = Stage::training_free;
  return m;
}

ToyModel init_target_random(const Matrix& source_table, ClassSetPtr source_classes,
                            ClassSetPtr target_classes, std::uint64_t seed) {
  Rng rng(seed);
  AffinityMatrix a;
  a.source_classes = std::move(source_classes);
  a.target_classes = std::move(target_classes);
  a.rows = Matrix(a.target_classes->size(), a.source_classes->size());
  for (double& v : a.rows.data()) v = rng.uniform01();
  a.method = "random";
  return init_target(source_table, normalize_rows(a, ZeroRowPolicy::uniform));
}

double toy_loss(const ToyModel& model, const ToyDataset& dataset) {
  const Matrix prediction = model.predict();
  double sum = 0.0;
  std::uint64_t n = 0;
  for (const auto& img : dataset) {
    const auto positions = img.labels.positions();
    for (std::size_t i = 0; i < positions.size(); ++i) {
      if (positions[i] == kIgnorePosition) continue;
      const auto k = static_cast<std::size_t>(positions[i]);
      for (std::size_t ch = 0; ch < kChannels; ++ch) {
        const double e = prediction(k, ch) - img.pixels[i * kChannels + ch];
        sum += e * e;
      }
      ++n;
    }
  }
  if (n == 0) fail(ErrorKind::domain, "toy loss over an empty dataset");
  return sum / static_cast<double>(n * kChannels);
}

ToyGradients toy_gradients(const ToyModel& model, const ToyDataset& dataset) {
  const ClassResiduals r = class_residuals(model.predict(), dataset);
  if (r.pixels == 0) fail(ErrorKind::domain, "toy gradient over an empty dataset");
  // d loss / d prediction_k = 2 / (N * channels) * sum_{pixels of k} (prediction_k - pixel)
  Matrix g = r.sums;
  const double scale = 2.0 / static_cast<double>(r.pixels * kChannels);
  for (double& v : g.data()) v *= scale;
  ToyGradients out;
  out.residual = g;
  out.affinity = g * model.source_table.transposed();
  out.source_table = model.affinity.rows.transposed() * g;
  return out;
}

void project_to_simplex(std::span<double> v) {
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  for (double& x : v) x = std::max(0.0, x - theta);
}

TrainResult train_target(const ToyModel& model, const ToyDataset& dataset, const StagePlan& plan) {
  if (!(plan.lr > 0.0)) fail(ErrorKind::domain, "learning rate must be > 0");
  TrainResult result{model, {}};
  ToyModel& m = result.model;
  const std::size_t total = plan.stage1_iters + plan.stage2_iters;
  result.loss_trace.reserve(total);
  for (std::size_t it = 0; it < total; ++it) {
    const bool second_stage = it >= plan.stage1_iters;
    m.stage = second_stage ? Stage::stage2 : Stage::stage1;
    const ToyGradients g = toy_gradients(m, dataset);
    auto step = [&](Matrix& param, const Matrix& grad) {
      auto p = param.data();
      const auto d = grad.data();
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= plan.lr * d[i];
    };
    step(m.affinity.rows, g.affinity);
    step(m.residual, g.residual);
    if (second_stage) step(m.source_table, g.source_table);
    for (std::size_t k = 0; k < m.affinity.rows.rows(); ++k) project_to_simplex(m.affinity.rows.row(k));
    m.affinity.mode = AffinityMode::soft;
    m.affinity.normalized = true;

    const double loss = toy_loss(m, dataset);
    if (!std::isfinite(loss)) {
      fail(ErrorKind::numeric, "toy training diverged at iteration " + std::to_string(it));
    }
    result.loss_trace.push_back(loss);
  }
  return result;
}

AffinityMatrix estimate_affinity(const Matrix& source_table, ClassSetPtr source_classes,
                                 const ToyDataset& target) {
  std::vector<LabelMap> gt;
  std::vector<LabelMap> predicted;
  for (const auto& img : target) {
    std::vector<std::int32_t> positions(img.labels.pixel_count());
    for (std::size_t i = 0; i < positions.size(); ++i) {
      std::size_t best = 0;
      double best_d = 0.0;
      for (std::size_t l = 0; l < source_table.rows(); ++l) {
        double d = 0.0;
        for (std::size_t ch = 0; ch < kChannels; ++ch) {
          const double e = source_table(l, ch) - img.pixels[i * kChannels + ch];
          d += e * e;
        }
        if (l == 0 || d < best_d) {
          best = l;
          best_d = d;
        }
      }
      positions[i] = static_cast<std::int32_t>(best);
    }
    gt.push_back(img.labels);
    predicted.push_back(LabelMap::from_positions(source_classes, img.labels.width(),
                                                 img.labels.height(), positions));
  }
  return confusion_affinity(gt, predicted, ZeroRowPolicy::uniform);
}

AffinityMatrix oracle_affinity(const ToyWorld& world) {
  AffinityMatrix a;
  a.source_classes = world.source_classes;
  a.target_classes = world.target_classes;
  a.rows = Matrix(world.target_classes->size(), world.source_classes->size());
  a.method = "manual";
  bool all_mapped = true;
  for (std::size_t k = 0; k < world.true_mapping.size(); ++k) {
    if (world.true_mapping[k]) {
      a.rows(k, *world.true_mapping[k]) = 1.0;
    } else {
      all_mapped = false;
    }
  }
  a = normalize_rows(a, ZeroRowPolicy::uniform);
  a.mode = all_mapped ? AffinityMode::hard : AffinityMode::soft;
  return a;
}

namespace {

RunRecord run_one(const ToyModel& init, const ToyDataset& target, const ToyConfig& config) {
  RunRecord r;
  r.training_free_mse = toy_loss(init, target);
  const TrainResult trained =
      train_target(init, target, StagePlan{config.stage1_iters, config.stage2_iters, config.lr});
  r.final_mse = trained.loss_trace.empty() ? r.training_free_mse : trained.loss_trace.back();
  const std::size_t total = trained.loss_trace.size();
  r.iters_to_threshold = total + 1;
  if (r.training_free_mse <= config.convergence_mse) {
    r.iters_to_threshold = 0;
  } else {
    for (std::size_t i = 0; i < total; ++i) {
      if (trained.loss_trace[i] <= config.convergence_mse) {
        r.iters_to_threshold = i + 1;
        break;
      }
    }
  }
  r.reached_threshold = r.iters_to_threshold <= total;
  return r;
}

nlohmann::ordered_json record_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["training_free_mse"] = r.training_free_mse;
  j["final_mse"] = r.final_mse;
  j["iters_to_threshold"] = r.iters_to_threshold;
  j["reached_threshold"] = r.reached_threshold;
  return j;
}

}  // namespace

SeedRecord run_seed(const ToyConfig& config, std::uint64_t seed) {
  const GeneratedWorld g = gen_world(config, seed);
  const Matrix source_table = fit_source(g.source, config.source_classes);
  const AffinityMatrix affinity =
      config.affinity_source == AffinitySource::oracle
          ? oracle_affinity(g.world)
          : estimate_affinity(source_table, g.world.source_classes, g.target);
  SeedRecord rec;
  rec.seed = seed;
  rec.affinity_init = run_one(init_target(source_table, affinity), g.target, config);
  rec.random_init = run_one(init_target_random(source_table, g.world.source_classes,
                                               g.world.target_classes, mix_seed(seed)),
                            g.target, config);
  return rec;
}

ExperimentReport run_experiment(const ToyConfig& config, const std::vector<std::uint64_t>& seeds) {
  config.validate();
  if (seeds.size() < 2) fail(ErrorKind::domain, "toy experiment needs at least 2 seeds");
  ExperimentReport report;
  report.config = config;
  report.seeds.resize(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) { report.seeds[i] = run_seed(config, seeds[i]); });
  for (const auto& s : report.seeds) {
    if (s.affinity_init.training_free_mse < s.random_init.training_free_mse) ++report.initial_mse_wins;
    if (s.affinity_init.iters_to_threshold < s.random_init.iters_to_threshold) ++report.convergence_wins;
    if (s.affinity_init.final_mse < s.random_init.final_mse) ++report.final_mse_wins;
  }
  return report;
}

std::string ExperimentReport::to_json() const {
  nlohmann::ordered_json j;
  j["tool_version"] = kVersion;
  j["config"] = nlohmann::ordered_json::parse(toy::to_json(config));
  auto& list = j["seeds"] = nlohmann::ordered_json::array();
  for (const auto& s : seeds) {
    list.push_back({{"seed", s.seed},
                    {"affinity_init", record_json(s.affinity_init)},
                    {"random_init", record_json(s.random_init)}});
  }
  j["summary"] = {{"n_seeds", seeds.size()},
                  {"initial_mse_wins", initial_mse_wins},
                  {"convergence_wins", convergence_wins},
                  {"final_mse_wins", final_mse_wins}};
  return j.dump(2) + "\n";
}

}  // namespace cat::toy
