#include "cat/sampling.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "cat/error.hpp"
#include "cat/parallel.hpp"
#include "cat/rng.hpp"

namespace cat {

namespace {

std::vector<double> normalize_counts(const std::vector<std::uint64_t>& counts) {
  const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (total == 0) fail(ErrorKind::numeric, "class distribution over zero labeled pixels");
  std::vector<double> p(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    p[c] = static_cast<double>(counts[c]) / static_cast<double>(total);
  }
  return p;
}

}  // namespace

std::vector<double> empirical_distribution(const std::vector<LabelMap>& maps) {
  if (maps.empty()) fail(ErrorKind::domain, "empirical distribution of an empty map list");
  const auto& classes = maps.front().class_set();
  std::vector<std::uint64_t> counts(classes->size(), 0);
  for (const auto& map : maps) {
    if (!same_classes(map.class_set(), classes)) {
      fail(ErrorKind::dimension, "maps in the distribution use different class sets");
    }
    const auto h = class_histogram(map);
    for (std::size_t c = 0; c < counts.size(); ++c) counts[c] += h[c];
  }
  return normalize_counts(counts);
}

double kl_to_uniform(std::span<const double> p, double epsilon, KlDirection direction) {
  if (!(epsilon > 0.0)) fail(ErrorKind::domain, "KL smoothing epsilon must be > 0");
  if (p.empty()) fail(ErrorKind::domain, "KL of an empty distribution");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) fail(ErrorKind::domain, "distribution has a negative or NaN entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    fail(ErrorKind::domain, "distribution sums to " + std::to_string(sum) + ", not 1");
  }
  const double c = static_cast<double>(p.size());
  const double u = 1.0 / c;
  const double scale = 1.0 + c * epsilon;
  double kl = 0.0;
  for (double v : p) {
    const double smoothed = (v + epsilon) / scale;
    if (direction == KlDirection::uniform_to_empirical) {
      kl += u * std::log(u / smoothed);
    } else {
      kl += smoothed * std::log(smoothed / u);
    }
  }
  return std::max(0.0, kl);
}

SubsetSelection greedy_select(const std::vector<PoolImage>& pool, std::size_t k,
                              std::uint64_t seed, double epsilon, KlDirection direction) {
  if (k < 1 || k > pool.size()) {
    fail(ErrorKind::domain, "subset size " + std::to_string(k) + " outside [1, " +
                                std::to_string(pool.size()) + "]");
  }
  if (!(epsilon > 0.0)) fail(ErrorKind::domain, "KL smoothing epsilon must be > 0");
  const auto& classes = pool.front().map.class_set();
  std::set<std::string_view> ids;
  for (const auto& img : pool) {
    if (!ids.insert(img.id).second) fail(ErrorKind::invariant, "duplicate pool id \"" + img.id + "\"");
    if (!same_classes(img.map.class_set(), classes)) {
      fail(ErrorKind::dimension, "pool image \"" + img.id + "\" uses a different class set");
    }
  }

  std::vector<std::vector<std::uint64_t>> histograms(pool.size());
  parallel_for(pool.size(), [&](std::size_t i) {
    histograms[i] = class_histogram(pool[i].map);
    if (std::accumulate(histograms[i].begin(), histograms[i].end(), std::uint64_t{0}) == 0) {
      fail(ErrorKind::domain, "pool image \"" + pool[i].id + "\" has no labeled pixels");
    }
  });

  SubsetSelection selection;
  selection.seed = seed;
  selection.epsilon = epsilon;
  std::vector<bool> taken(pool.size(), false);
  std::vector<std::uint64_t> running(classes->size(), 0);

  auto accept = [&](std::size_t i, double kl) {
    taken[i] = true;
    for (std::size_t c = 0; c < running.size(); ++c) running[c] += histograms[i][c];
    selection.selected_ids.push_back(pool[i].id);
    selection.per_step_kl.push_back(kl);
  };

  Rng rng(seed);
  const auto first = static_cast<std::size_t>(rng.below(pool.size()));
  accept(first, kl_to_uniform(normalize_counts(histograms[first]), epsilon, direction));

  std::vector<double> candidate_kl(pool.size());
  while (selection.selected_ids.size() < k) {
    parallel_for(pool.size(), [&](std::size_t i) {
      if (taken[i]) return;
      std::vector<std::uint64_t> merged = running;
      for (std::size_t c = 0; c < merged.size(); ++c) merged[c] += histograms[i][c];
      candidate_kl[i] = kl_to_uniform(normalize_counts(merged), epsilon, direction);
    });
    std::size_t best = pool.size();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (taken[i]) continue;
      if (best == pool.size() || candidate_kl[i] < candidate_kl[best] ||
          (candidate_kl[i] == candidate_kl[best] && pool[i].id < pool[best].id)) {
        best = i;
      }
    }
    accept(best, candidate_kl[best]);
  }
  return selection;
}

}  // namespace cat
