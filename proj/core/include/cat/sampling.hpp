#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cat/label_map.hpp"

namespace cat {

inline constexpr double kDefaultKlEpsilon = 1e-8;

enum class KlDirection {
  uniform_to_empirical,  // KL(u || p~), the default
  empirical_to_uniform,  // KL(p~ || u)
};

/// Pooled class histogram of the maps, normalized to sum to one.
std::vector<double> empirical_distribution(const std::vector<LabelMap>& maps);

/// KL divergence between the uniform distribution and p smoothed as
/// (p + eps) / (1 + C*eps).
double kl_to_uniform(std::span<const double> p, double epsilon = kDefaultKlEpsilon,
                     KlDirection direction = KlDirection::uniform_to_empirical);

struct PoolImage {
  std::string id;
  LabelMap map;
};

struct SubsetSelection {
  std::vector<std::string> selected_ids;
  std::vector<double> per_step_kl;  // KL after each acceptance
  std::uint64_t seed = 0;
  double epsilon = kDefaultKlEpsilon;
};

/// First image uniformly at random (Rng::below over pool order), then
/// repeatedly the remaining image whose addition minimizes kl_to_uniform of
/// the pooled distribution. Ties go to the lexicographically smallest id.
SubsetSelection greedy_select(const std::vector<PoolImage>& pool, std::size_t k,
                              std::uint64_t seed, double epsilon = kDefaultKlEpsilon,
                              KlDirection direction = KlDirection::uniform_to_empirical);

}  // namespace cat
