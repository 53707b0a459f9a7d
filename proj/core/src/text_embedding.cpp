#include "cat/text_embedding.hpp"

#include <cmath>

namespace cat {

namespace {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::vector<double> trigram_embedding(std::string_view name) {
  const std::string padded = "^" + normalize_class_name(name) + "$";
  std::vector<double> v(kTrigramDim, 0.0);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    const std::uint64_t h = fnv1a(std::string_view(padded).substr(i, 3), kTrigramSeed);
    const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
    v[h % kTrigramDim] += sign;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

FeatureTable trigram_embed_classes(const ClassSet& classes) {
  Matrix rows(classes.size(), kTrigramDim);
  std::vector<std::string> ids;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    ids.push_back(normalize_class_name(classes.name_at(c)));
    const auto v = trigram_embedding(classes.name_at(c));
    std::copy(v.begin(), v.end(), rows.row(c).begin());
  }
  return FeatureTable(std::move(ids), std::move(rows));
}

}  // namespace cat
