#include "cat/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cat/counting.hpp"
#include "cat/error.hpp"
#include "cat/parallel.hpp"

namespace cat {

std::string_view to_string(AffinityMode mode) {
  return mode == AffinityMode::soft ? "soft" : "hard";
}

std::string_view to_string(ZeroRowPolicy policy) {
  switch (policy) {
    case ZeroRowPolicy::uniform: return "uniform";
    case ZeroRowPolicy::error: return "error";
    case ZeroRowPolicy::keep_flagged: return "keep_flagged";
  }
  return "uniform";
}

AffinityMode parse_affinity_mode(std::string_view text) {
  if (text == "soft") return AffinityMode::soft;
  if (text == "hard") return AffinityMode::hard;
  fail(ErrorKind::parse, "unknown affinity mode \"" + std::string(text) + "\"");
}

ZeroRowPolicy parse_zero_row_policy(std::string_view text) {
  if (text == "uniform") return ZeroRowPolicy::uniform;
  if (text == "error") return ZeroRowPolicy::error;
  if (text == "keep_flagged") return ZeroRowPolicy::keep_flagged;
  fail(ErrorKind::parse, "unknown zero-row policy \"" + std::string(text) + "\"");
}

namespace {

constexpr std::string_view kZeroRowFlag = "zero_row";
constexpr std::string_view kFallbackFlag = "vote_fallback";

bool is_zero_row_flagged(const AffinityMatrix& a, std::size_t k) {
  auto it = a.flags.find(k);
  return it != a.flags.end() && it->second == kZeroRowFlag;
}

}  // namespace

void AffinityMatrix::validate() const {
  if (!target_classes || !source_classes) {
    fail(ErrorKind::invariant, "affinity matrix is missing a class set");
  }
  if (rows.rows() != target_classes->size() || rows.cols() != source_classes->size()) {
    fail(ErrorKind::dimension,
         "affinity matrix is " + std::to_string(rows.rows()) + "x" + std::to_string(rows.cols()) +
             " but class sets give " + std::to_string(target_classes->size()) + "x" +
             std::to_string(source_classes->size()));
  }
  for (std::size_t k = 0; k < rows.rows(); ++k) {
    const auto row = rows.row(k);
    for (double v : row) {
      if (!std::isfinite(v)) {
        fail(ErrorKind::numeric, "non-finite affinity in row of \"" +
                                     target_classes->name_at(k) + "\"");
      }
    }
    if (mode == AffinityMode::hard) {
      const auto ones = std::count(row.begin(), row.end(), 1.0);
      const auto zeros = std::count(row.begin(), row.end(), 0.0);
      if (ones != 1 || zeros != static_cast<std::ptrdiff_t>(row.size()) - 1) {
        fail(ErrorKind::invariant, "hard affinity row of \"" + target_classes->name_at(k) +
                                       "\" is not one-hot");
      }
    }
    if (normalized) {
      if (std::any_of(row.begin(), row.end(), [](double v) { return v < 0.0; })) {
        fail(ErrorKind::invariant, "normalized affinity row of \"" +
                                       target_classes->name_at(k) + "\" has a negative entry");
      }
      const double sum = std::accumulate(row.begin(), row.end(), 0.0);
      const bool kept_zero = sum == 0.0 && is_zero_row_flagged(*this, k);
      if (!kept_zero && std::abs(sum - 1.0) > kRowSumTolerance) {
        fail(ErrorKind::invariant, "normalized affinity row of \"" +
                                       target_classes->name_at(k) + "\" sums to " +
                                       std::to_string(sum));
      }
    }
  }
}

std::size_t row_argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t l = 1; l < row.size(); ++l) {
    if (row[l] > row[best]) best = l;
  }
  return best;
}

AffinityMatrix normalize_rows(const AffinityMatrix& a, ZeroRowPolicy policy) {
  AffinityMatrix out = a;
  const std::size_t n_source = out.rows.cols();
  for (std::size_t k = 0; k < out.rows.rows(); ++k) {
    auto row = out.rows.row(k);
    double sum = 0.0;
    for (double v : row) {
      if (!std::isfinite(v) || v < 0.0) {
        fail(ErrorKind::domain, "cannot normalize row of \"" + a.target_classes->name_at(k) +
                                    "\": entries must be finite and >= 0");
      }
      sum += v;
    }
    if (sum > 0.0) {
      for (double& v : row) v /= sum;
      continue;
    }
    switch (policy) {
      case ZeroRowPolicy::error:
        fail(ErrorKind::numeric, "target class \"" + a.target_classes->name_at(k) +
                                     "\" has no affinity to any source class");
      case ZeroRowPolicy::uniform:
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(n_source));
        break;
      case ZeroRowPolicy::keep_flagged:
        break;
    }
    out.flags[k] = std::string(kZeroRowFlag);
  }
  out.normalized = true;
  return out;
}

AffinityMatrix confusion_affinity(const std::vector<LabelMap>& target_gt,
                                  const std::vector<LabelMap>& predicted_source,
                                  ZeroRowPolicy policy) {
  const CountMatrix counts = count_cooccurrences(target_gt, predicted_source);
  AffinityMatrix a;
  a.target_classes = target_gt.front().class_set();
  a.source_classes = predicted_source.front().class_set();
  a.rows = Matrix(counts.rows(), counts.cols());
  for (std::size_t k = 0; k < counts.rows(); ++k)
    for (std::size_t l = 0; l < counts.cols(); ++l)
      a.rows(k, l) = static_cast<double>(counts(k, l));
  a.method = "confusion";
  return normalize_rows(a, policy);
}

PrototypeSet prototype_from_patches(const std::vector<PatchFeatureGrid>& grids,
                                    const std::vector<LabelMap>& maps) {
  if (maps.empty()) fail(ErrorKind::dimension, "no images for prototype estimation");
  if (grids.size() != maps.size()) {
    fail(ErrorKind::dimension, "patch grids and label maps differ in count (" +
                                   std::to_string(grids.size()) + " vs " +
                                   std::to_string(maps.size()) + ")");
  }
  const ClassSetPtr classes = maps.front().class_set();
  const std::size_t n_classes = classes->size();
  const std::size_t dim = grids.front().dim;
  for (std::size_t m = 0; m < maps.size(); ++m) {
    const auto& g = grids[m];
    const auto& map = maps[m];
    g.validate();
    if (!same_classes(map.class_set(), classes)) {
      fail(ErrorKind::dimension, "label map " + std::to_string(m) + " uses a different class set");
    }
    if (g.dim != dim) {
      fail(ErrorKind::dimension, "patch grid '" + g.image_id + "' has dimension " +
                                     std::to_string(g.dim) + ", expected " + std::to_string(dim));
    }
    const std::size_t cover_h = g.grid_h * g.patch_size;
    const std::size_t cover_w = g.grid_w * g.patch_size;
    if (cover_h < map.height() || cover_w < map.width() ||
        cover_h - map.height() >= g.patch_size || cover_w - map.width() >= g.patch_size) {
      fail(ErrorKind::dimension,
           "patch grid '" + g.image_id + "' (" + std::to_string(g.grid_h) + "x" +
               std::to_string(g.grid_w) + " patches of " + std::to_string(g.patch_size) +
               "px) does not match a " + std::to_string(map.width()) + "x" +
               std::to_string(map.height()) + " label map");
    }
  }

  struct Partial {
    std::vector<double> sums;
    std::vector<std::uint64_t> weights;
  };
  std::vector<Partial> partials(maps.size());
  parallel_for(maps.size(), [&](std::size_t m) {
    const auto& g = grids[m];
    const auto& map = maps[m];
    const auto positions = map.positions();
    Partial p{std::vector<double>(n_classes * dim, 0.0), std::vector<std::uint64_t>(n_classes, 0)};
    std::vector<std::uint64_t> in_patch(n_classes);
    for (std::size_t gy = 0; gy < g.grid_h; ++gy) {
      const std::size_t y0 = gy * g.patch_size;
      const std::size_t y1 = std::min(y0 + g.patch_size, map.height());
      for (std::size_t gx = 0; gx < g.grid_w; ++gx) {
        const std::size_t x0 = gx * g.patch_size;
        const std::size_t x1 = std::min(x0 + g.patch_size, map.width());
        std::fill(in_patch.begin(), in_patch.end(), 0);
        for (std::size_t y = y0; y < y1; ++y)
          for (std::size_t x = x0; x < x1; ++x) {
            const auto pos = positions[y * map.width() + x];
            if (pos != kIgnorePosition) ++in_patch[static_cast<std::size_t>(pos)];
          }
        const auto feature = g.patch(gy, gx);
        for (std::size_t c = 0; c < n_classes; ++c) {
          if (in_patch[c] == 0) continue;
          const double w = static_cast<double>(in_patch[c]);
          double* sum = p.sums.data() + c * dim;
          for (std::size_t d = 0; d < dim; ++d) sum[d] += w * feature[d];
          p.weights[c] += in_patch[c];
        }
      }
    }
    partials[m] = std::move(p);
  });

  // Sequential reduction in image order keeps the result thread-count independent.
  std::vector<double> sums(n_classes * dim, 0.0);
  std::vector<std::uint64_t> weights(n_classes, 0);
  for (const auto& p : partials) {
    for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += p.sums[i];
    for (std::size_t c = 0; c < n_classes; ++c) weights[c] += p.weights[c];
  }

  PrototypeSet out;
  Matrix protos(n_classes, dim);
  std::vector<std::string> ids;
  for (std::size_t c = 0; c < n_classes; ++c) {
    ids.push_back(classes->name_at(c));
    if (weights[c] == 0) {
      out.empty.push_back(c);
      continue;
    }
    const double w = static_cast<double>(weights[c]);
    for (std::size_t d = 0; d < dim; ++d) protos(c, d) = sums[c * dim + d] / w;
  }
  out.table = FeatureTable(std::move(ids), std::move(protos));
  return out;
}

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

AffinityMatrix cosine_affinity(const Matrix& source, const Matrix& target,
                               ClassSetPtr source_classes, ClassSetPtr target_classes,
                               std::string method, ZeroRowPolicy policy) {
  if (source.cols() != target.cols()) {
    fail(ErrorKind::dimension, "embedding dimensions differ (" + std::to_string(source.cols()) +
                                   " vs " + std::to_string(target.cols()) + ")");
  }
  std::vector<double> source_norms(source.rows());
  for (std::size_t l = 0; l < source.rows(); ++l) source_norms[l] = norm(source.row(l));

  AffinityMatrix a;
  a.source_classes = std::move(source_classes);
  a.target_classes = std::move(target_classes);
  a.method = std::move(method);
  a.rows = Matrix(target.rows(), source.rows());
  for (std::size_t k = 0; k < target.rows(); ++k) {
    const auto t = target.row(k);
    const double t_norm = norm(t);
    for (std::size_t l = 0; l < source.rows(); ++l) {
      if (t_norm == 0.0 || source_norms[l] == 0.0) continue;
      const auto s = source.row(l);
      double dot = 0.0;
      for (std::size_t d = 0; d < t.size(); ++d) dot += t[d] * s[d];
      a.rows(k, l) = std::max(0.0, dot / (t_norm * source_norms[l]));
    }
  }
  return normalize_rows(a, policy);
}

void expect_rows(const FeatureTable& table, const ClassSet& classes, const char* which) {
  if (table.size() != classes.size()) {
    fail(ErrorKind::dimension, std::string(which) + " table has " + std::to_string(table.size()) +
                                   " rows for " + std::to_string(classes.size()) + " classes");
  }
}

Matrix rows_by_class_name(const FeatureTable& table, const ClassSet& classes, const char* which) {
  Matrix out(classes.size(), table.dim());
  std::vector<bool> filled(classes.size(), false);
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto pos = classes.position_of_name(table.ids()[i]);
    if (!pos) continue;
    if (filled[*pos]) {
      fail(ErrorKind::invariant, std::string(which) + " embeddings name class \"" +
                                     classes.name_at(*pos) + "\" twice");
    }
    filled[*pos] = true;
    std::copy(table.row(i).begin(), table.row(i).end(), out.row(*pos).begin());
  }
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (!filled[c]) {
      fail(ErrorKind::dimension, std::string(which) + " embeddings lack class \"" +
                                     classes.name_at(c) + "\"");
    }
  }
  return out;
}

}  // namespace

AffinityMatrix prototype_affinity(const FeatureTable& source_protos,
                                  const FeatureTable& target_protos, ClassSetPtr source_classes,
                                  ClassSetPtr target_classes, ZeroRowPolicy policy) {
  expect_rows(source_protos, *source_classes, "source prototype");
  expect_rows(target_protos, *target_classes, "target prototype");
  return cosine_affinity(source_protos.rows(), target_protos.rows(), std::move(source_classes),
                         std::move(target_classes), "prototype", policy);
}

AffinityMatrix text_affinity(const FeatureTable& source_names, const FeatureTable& target_names,
                             ClassSetPtr source_classes, ClassSetPtr target_classes,
                             ZeroRowPolicy policy) {
  const Matrix source = rows_by_class_name(source_names, *source_classes, "source");
  const Matrix target = rows_by_class_name(target_names, *target_classes, "target");
  return cosine_affinity(source, target, std::move(source_classes), std::move(target_classes),
                         "text", policy);
}

AffinityMatrix binarize_hard(const AffinityMatrix& a) {
  AffinityMatrix out = a;
  for (std::size_t k = 0; k < out.rows.rows(); ++k) {
    auto row = out.rows.row(k);
    if (std::any_of(row.begin(), row.end(), [](double v) { return std::isnan(v); })) {
      fail(ErrorKind::numeric, "NaN in affinity row of \"" + a.target_classes->name_at(k) + "\"");
    }
    const std::size_t best = row_argmax(row);
    std::fill(row.begin(), row.end(), 0.0);
    row[best] = 1.0;
  }
  out.mode = AffinityMode::hard;
  out.normalized = true;
  return out;
}

std::string_view to_string(AffinityMethod method) {
  switch (method) {
    case AffinityMethod::confusion: return "confusion";
    case AffinityMethod::prototype: return "prototype";
    case AffinityMethod::text: return "text";
  }
  return "confusion";
}

AffinityMethod parse_affinity_method(std::string_view text) {
  if (text == "confusion") return AffinityMethod::confusion;
  if (text == "prototype") return AffinityMethod::prototype;
  if (text == "text") return AffinityMethod::text;
  fail(ErrorKind::parse, "unknown affinity method \"" + std::string(text) +
                             "\" (expected confusion, prototype or text)");
}

FallbackRanking FallbackRanking::from_scores(const std::map<std::string, double>& fid_by_method) {
  std::vector<std::pair<double, AffinityMethod>> ranked;
  for (const auto& [name, score] : fid_by_method) {
    if (!std::isfinite(score)) {
      fail(ErrorKind::domain, "fallback score for " + name + " is not finite");
    }
    ranked.emplace_back(score, parse_affinity_method(name));
  }
  if (ranked.size() != 3) {
    fail(ErrorKind::domain, "fallback scores must cover confusion, prototype and text");
  }
  // Equal scores fall back to the fixed method order.
  std::sort(ranked.begin(), ranked.end());
  FallbackRanking r;
  for (const auto& [score, method] : ranked) r.order_.push_back(method);
  r.scores_ = fid_by_method;
  return r;
}

FallbackRanking FallbackRanking::from_order(const std::vector<std::string>& best_first) {
  FallbackRanking r;
  for (const auto& name : best_first) {
    const auto method = parse_affinity_method(name);
    if (std::find(r.order_.begin(), r.order_.end(), method) != r.order_.end()) {
      fail(ErrorKind::domain, "fallback order names " + name + " twice");
    }
    r.order_.push_back(method);
  }
  if (r.order_.size() != 3) {
    fail(ErrorKind::domain, "fallback order must rank confusion, prototype and text");
  }
  return r;
}

AffinityMatrix combine_majority(const AffinityMatrix& confusion, const AffinityMatrix& prototype,
                                const AffinityMatrix& text, const FallbackRanking& fallback) {
  const AffinityMatrix* inputs[3] = {&confusion, &prototype, &text};
  for (const auto* m : inputs) {
    if (!same_classes(m->target_classes, confusion.target_classes) ||
        !same_classes(m->source_classes, confusion.source_classes)) {
      fail(ErrorKind::dimension, "affinity matrices to combine use different class sets");
    }
    m->validate();
  }
  AffinityMatrix out;
  out.target_classes = confusion.target_classes;
  out.source_classes = confusion.source_classes;
  out.rows = Matrix(confusion.rows.rows(), confusion.rows.cols());
  out.mode = AffinityMode::hard;
  out.method = "combined";
  out.normalized = true;
  const auto best = static_cast<std::size_t>(fallback.best());
  for (std::size_t k = 0; k < out.rows.rows(); ++k) {
    std::size_t votes[3];
    for (std::size_t i = 0; i < 3; ++i) votes[i] = row_argmax(inputs[i]->rows.row(k));
    std::size_t chosen;
    if (votes[0] == votes[1] || votes[0] == votes[2]) {
      chosen = votes[0];
    } else if (votes[1] == votes[2]) {
      chosen = votes[1];
    } else {
      chosen = votes[best];
      out.flags[k] = std::string(kFallbackFlag);
    }
    out.rows(k, chosen) = 1.0;
  }
  return out;
}

}  // namespace cat
