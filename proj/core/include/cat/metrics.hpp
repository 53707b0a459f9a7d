#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "cat/counting.hpp"
#include "cat/feature_table.hpp"
#include "cat/label_map.hpp"
#include "cat/matrix.hpp"

namespace cat {

/// GT x prediction pixel counts over one shared class set.
CountMatrix confusion_counts(const std::vector<LabelMap>& gt,
                             const std::vector<LabelMap>& pred);

enum class MiouScheme {
  present_classes,  // average over classes with TP+FP+FN > 0
  all_classes,      // absent classes contribute 0
};
MiouScheme parse_miou_scheme(std::string_view text);
std::string_view to_string(MiouScheme scheme);

struct MiouResult {
  double miou = 0.0;
  std::vector<double> per_class;  // NaN for absent classes
};

MiouResult miou_detail(const CountMatrix& counts,
                       MiouScheme scheme = MiouScheme::present_classes);
double miou(const CountMatrix& counts, MiouScheme scheme = MiouScheme::present_classes);

struct GaussianStats {
  std::vector<double> mean;
  Matrix cov;  // unbiased, symmetrized
  std::size_t n = 0;
};

GaussianStats gaussian_stats(const FeatureTable& features);

/// ||mu1 - mu2||^2 + Tr(S1) + Tr(S2) - 2 Tr(sqrt(S1^1/2 S2 S1^1/2)).
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

struct KidOptions {
  std::size_t block = 0;   // 0: min(Nx, Ny, 1000)
  std::size_t blocks = 10;
  std::uint64_t seed = 0;
};

struct KidResult {
  double value = 0.0;      // mean of per-block MMD^2
  double std_error = 0.0;  // std dev of blocks / sqrt(blocks)
  std::size_t block = 0;
  std::size_t blocks = 0;
};

/// Polynomial kernel (a.b / D + 1)^3.
double kid_kernel(std::span<const double> a, std::span<const double> b);

/// Unbiased MMD^2 on equally sized samples.
double mmd2_unbiased(const Matrix& x, const Matrix& y);

/// Each block draws `block` rows of x and of y without replacement (seeded)
/// and takes mmd2_unbiased; the result averages the blocks.
KidResult kid_from_tables(const FeatureTable& x, const FeatureTable& y,
                          const KidOptions& options = {});

}  // namespace cat
