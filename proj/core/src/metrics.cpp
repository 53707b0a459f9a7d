#include "cat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cat/error.hpp"
#include "cat/linalg.hpp"
#include "cat/parallel.hpp"
#include "cat/rng.hpp"

namespace cat {

CountMatrix confusion_counts(const std::vector<LabelMap>& gt, const std::vector<LabelMap>& pred) {
  if (!gt.empty() && !pred.empty() &&
      !same_classes(gt.front().class_set(), pred.front().class_set())) {
    fail(ErrorKind::dimension, "ground truth and prediction use different class sets");
  }
  return count_cooccurrences(gt, pred);
}

MiouScheme parse_miou_scheme(std::string_view text) {
  if (text == "present_classes") return MiouScheme::present_classes;
  if (text == "all_classes") return MiouScheme::all_classes;
  fail(ErrorKind::parse, "unknown mIoU scheme \"" + std::string(text) + "\"");
}

std::string_view to_string(MiouScheme scheme) {
  return scheme == MiouScheme::present_classes ? "present_classes" : "all_classes";
}

MiouResult miou_detail(const CountMatrix& counts, MiouScheme scheme) {
  if (counts.rows() != counts.cols()) fail(ErrorKind::dimension, "mIoU needs a square count matrix");
  if (counts.total() == 0) fail(ErrorKind::domain, "mIoU of an all-zero confusion matrix");
  const std::size_t c = counts.rows();
  MiouResult r;
  r.per_class.assign(c, std::numeric_limits<double>::quiet_NaN());
  // Extended-precision sum of the exact ratios; the mean is rounded to double once.
  long double sum = 0.0L;
  std::size_t present = 0;
  for (std::size_t k = 0; k < c; ++k) {
    const std::uint64_t tp = counts(k, k);
    std::uint64_t fn = 0;
    std::uint64_t fp = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (j == k) continue;
      fn += counts(k, j);
      fp += counts(j, k);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    const long double iou = static_cast<long double>(tp) / static_cast<long double>(denom);
    r.per_class[k] = static_cast<double>(iou);
    sum += iou;
    ++present;
  }
  const std::size_t divisor = scheme == MiouScheme::present_classes ? present : c;
  r.miou = static_cast<double>(sum / static_cast<long double>(divisor));
  return r;
}

double miou(const CountMatrix& counts, MiouScheme scheme) { return miou_detail(counts, scheme).miou; }

GaussianStats gaussian_stats(const FeatureTable& features) {
  const std::size_t n = features.size();
  const std::size_t d = features.dim();
  if (n < 2) fail(ErrorKind::domain, "Gaussian statistics need at least 2 samples");
  GaussianStats s;
  s.n = n;
  s.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = features.row(i);
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += row[j];
  }
  for (double& m : s.mean) m /= static_cast<double>(n);

  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = features.rows()(i, j) - s.mean[j];
  s.cov = Matrix(d, d);
  parallel_for(d, [&](std::size_t a) {
    for (std::size_t b = a; b < d; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += centered(i, a) * centered(i, b);
      s.cov(a, b) = acc / static_cast<double>(n - 1);
    }
  });
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < a; ++b) s.cov(a, b) = s.cov(b, a);
  return s;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  const std::size_t d = a.mean.size();
  if (b.mean.size() != d || a.cov.rows() != d || b.cov.rows() != d) {
    fail(ErrorKind::dimension, "Frechet distance between statistics of different dimension");
  }
  double mean_term = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a.mean[j] - b.mean[j];
    mean_term += diff * diff;
  }
  const Matrix root_a = sqrtm_psd(a.cov);
  Matrix sandwich = root_a * b.cov * root_a;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      sandwich(i, j) = sandwich(j, i) = 0.5 * (sandwich(i, j) + sandwich(j, i));
  const double cross = trace(sqrtm_psd(sandwich));
  const double distance = mean_term + trace(a.cov) + trace(b.cov) - 2.0 * cross;
  if (!std::isfinite(distance)) fail(ErrorKind::numeric, "Frechet distance is not finite");
  return std::max(0.0, distance);
}

double kid_kernel(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  const double base = dot / static_cast<double>(a.size()) + 1.0;
  return base * base * base;
}

double mmd2_unbiased(const Matrix& x, const Matrix& y) {
  const std::size_t m = x.rows();
  const std::size_t n = y.rows();
  if (m < 2 || n < 2) fail(ErrorKind::domain, "unbiased MMD needs at least 2 samples per side");
  if (x.cols() != y.cols()) fail(ErrorKind::dimension, "MMD between features of different dimension");
  double kxx = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) kxx += kid_kernel(x.row(i), x.row(j));
  double kyy = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) kyy += kid_kernel(y.row(i), y.row(j));
  double kxy = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) kxy += kid_kernel(x.row(i), y.row(j));
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);
  return 2.0 * kxx / (md * (md - 1.0)) + 2.0 * kyy / (nd * (nd - 1.0)) - 2.0 * kxy / (md * nd);
}

namespace {

Matrix sample_rows(const Matrix& source, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(source.rows());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  Matrix out(count, source.cols());
  for (std::size_t i = 0; i < count; ++i) {
    std::copy(source.row(idx[i]).begin(), source.row(idx[i]).end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

KidResult kid_from_tables(const FeatureTable& x, const FeatureTable& y, const KidOptions& options) {
  if (x.size() == 0 || y.size() == 0) fail(ErrorKind::domain, "KID of an empty feature table");
  if (x.dim() != y.dim()) {
    fail(ErrorKind::dimension, "KID feature dimensions differ (" + std::to_string(x.dim()) +
                                   " vs " + std::to_string(y.dim()) + ")");
  }
  const std::size_t limit = std::min(x.size(), y.size());
  const std::size_t block = options.block == 0 ? std::min<std::size_t>(limit, 1000) : options.block;
  if (block > limit) {
    fail(ErrorKind::domain, "KID block " + std::to_string(block) + " exceeds the smaller table (" +
                                std::to_string(limit) + " rows)");
  }
  if (block < 2) fail(ErrorKind::domain, "KID block must be at least 2");
  if (options.blocks < 1) fail(ErrorKind::domain, "KID needs at least one block");

  Rng rng(options.seed);
  std::vector<std::pair<Matrix, Matrix>> samples;
  samples.reserve(options.blocks);
  for (std::size_t b = 0; b < options.blocks; ++b) {
    Matrix xs = sample_rows(x.rows(), block, rng);
    Matrix ys = sample_rows(y.rows(), block, rng);
    samples.emplace_back(std::move(xs), std::move(ys));
  }
  std::vector<double> values(options.blocks);
  parallel_for(options.blocks, [&](std::size_t b) {
    values[b] = mmd2_unbiased(samples[b].first, samples[b].second);
  });

  KidResult r;
  r.block = block;
  r.blocks = options.blocks;
  r.value = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double var = 0.0;
    for (double v : values) var += (v - r.value) * (v - r.value);
    var /= static_cast<double>(values.size() - 1);
    r.std_error = std::sqrt(var / static_cast<double>(values.size()));
  }
  return r;
}

}  // namespace cat
