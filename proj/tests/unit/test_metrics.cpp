#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cat/error.hpp"
#include "cat/linalg.hpp"
#include "cat/metrics.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace cat;
using testsupport::make_classes;

namespace {

Matrix random_psd(std::size_t n, std::mt19937_64& gen, std::size_t rank) {
  const Matrix a = testsupport::random_matrix(rank, n, gen);
  return a.transposed() * a;
}

GaussianStats stats(std::vector<double> mean, Matrix cov) {
  GaussianStats s;
  s.mean = std::move(mean);
  s.cov = std::move(cov);
  s.n = 100;
  return s;
}

}  // namespace

TEST(ConfusionCounts, HandExample) {
  const auto cs = make_classes("c", 2);
  const auto counts = confusion_counts({LabelMap(cs, 4, 1, {0, 0, 1, 1})},
                                       {LabelMap(cs, 4, 1, {0, 1, 1, 1})});
  EXPECT_EQ(counts(0, 0), 1u);
  EXPECT_EQ(counts(0, 1), 1u);
  EXPECT_EQ(counts(1, 0), 0u);
  EXPECT_EQ(counts(1, 1), 2u);
  EXPECT_DOUBLE_EQ(miou(counts), 7.0 / 12.0);
  const auto detail = miou_detail(counts);
  EXPECT_DOUBLE_EQ(detail.per_class[0], 0.5);
  EXPECT_DOUBLE_EQ(detail.per_class[1], 2.0 / 3.0);
}

TEST(Miou, PerfectPredictionIsOne) {
  std::mt19937_64 gen(1);
  const auto cs = make_classes("c", 6, 255);
  std::vector<LabelMap> maps;
  for (int i = 0; i < 3; ++i) maps.push_back(testsupport::random_map(cs, 9, 9, gen, 0.1));
  EXPECT_EQ(miou(confusion_counts(maps, maps)), 1.0);
}

TEST(Miou, AbsentClassesDependOnScheme) {
  CountMatrix c(3, 3);
  c(0, 0) = 4;
  c(1, 1) = 4;
  const auto present = miou_detail(c, MiouScheme::present_classes);
  EXPECT_EQ(present.miou, 1.0);
  EXPECT_TRUE(std::isnan(present.per_class[2]));
  EXPECT_DOUBLE_EQ(miou(c, MiouScheme::all_classes), 2.0 / 3.0);
}

TEST(Miou, InvariantUnderClassPermutation) {
  std::mt19937_64 gen(5);
  const auto cs = make_classes("c", 5);
  std::vector<LabelMap> gt;
  std::vector<LabelMap> pr;
  for (int i = 0; i < 4; ++i) {
    gt.push_back(testsupport::random_map(cs, 8, 8, gen));
    pr.push_back(testsupport::random_map(cs, 8, 8, gen));
  }
  const double base = miou(confusion_counts(gt, pr));
  const std::vector<std::int32_t> perm{3, 0, 4, 1, 2};
  auto permute = [&](const std::vector<LabelMap>& maps) {
    std::vector<LabelMap> out;
    for (const auto& m : maps) {
      std::vector<std::int32_t> v;
      for (auto x : m.values()) v.push_back(perm[static_cast<std::size_t>(x)]);
      out.emplace_back(cs, m.width(), m.height(), v);
    }
    return out;
  };
  EXPECT_NEAR(miou(confusion_counts(permute(gt), permute(pr))), base, 1e-15);
}

TEST(GaussianStats, HandExampleAndDegenerate) {
  const FeatureTable t({"a", "b"}, Matrix(2, 2, {0, 0, 2, 0}));
  const auto s = gaussian_stats(t);
  EXPECT_EQ(s.mean, (std::vector<double>{1, 0}));
  EXPECT_EQ(s.cov, Matrix(2, 2, {2, 0, 0, 0}));
  const FeatureTable same({"a", "b", "c"}, Matrix(3, 2, {1, 2, 1, 2, 1, 2}));
  EXPECT_EQ(gaussian_stats(same).cov, Matrix(2, 2));
  EXPECT_THROW(gaussian_stats(FeatureTable({"a"}, Matrix(1, 2))), Error);
}

TEST(GaussianStats, MatchesTwoPassOracle) {
  std::mt19937_64 gen(3);
  const auto t = testsupport::random_table(50, 4, gen, 2.5);
  const auto s = gaussian_stats(t);
  const auto [mean, cov] = oracle::mean_cov(t.rows());
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s.mean[i], mean[i], 1e-10);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(s.cov.data()[i], cov.data()[i], 1e-10);
  EXPECT_EQ(asymmetry(s.cov), 0.0);
}

TEST(Sqrtm, IdentityAndDiagonal) {
  EXPECT_LT(frobenius_norm(sqrtm_psd(Matrix::identity(4)) - Matrix::identity(4)), 1e-14);
  const auto r = sqrtm_psd(Matrix(2, 2, {4, 0, 0, 9}));
  EXPECT_NEAR(r(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(r(1, 1), 3.0, 1e-14);
  EXPECT_NEAR(r(0, 1), 0.0, 1e-14);
}

TEST(Sqrtm, ReconstructsRandomPsd) {
  std::mt19937_64 gen(8);
  for (std::size_t n : {1u, 2u, 5u, 8u, 16u, 32u}) {
    for (std::size_t rank : {n, (n + 1) / 2}) {
      const Matrix m = random_psd(n, gen, rank);
      const Matrix r = sqrtm_psd(m);
      EXPECT_LE(frobenius_norm(r * r - m), 1e-8 * frobenius_norm(m)) << n << "/" << rank;
      EXPECT_LE(asymmetry(r), 1e-12 * frobenius_norm(r));
    }
  }
}

TEST(Sqrtm, RejectsIndefinite) {
  EXPECT_THROW(sqrtm_psd(Matrix(2, 2, {1, 0, 0, -1})), Error);
  EXPECT_THROW(sqrtm_psd(Matrix(2, 2, {1, 2, 0, 1})), Error);
}

TEST(Jacobi, EigenpairsSatisfyDefinition) {
  std::mt19937_64 gen(21);
  const Matrix a = testsupport::random_matrix(9, 9, gen);
  Matrix sym(9, 9);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j) sym(i, j) = a(i, j) + a(j, i);
  const auto e = jacobi_eigen(sym);
  for (std::size_t j = 0; j + 1 < 9; ++j) EXPECT_LE(e.values[j], e.values[j + 1]);
  for (std::size_t j = 0; j < 9; ++j) {
    for (std::size_t i = 0; i < 9; ++i) {
      double av = 0.0;
      for (std::size_t k = 0; k < 9; ++k) av += sym(i, k) * e.vectors(k, j);
      EXPECT_NEAR(av, e.values[j] * e.vectors(i, j), 1e-10);
    }
  }
}

TEST(Frechet, AnalyticCases) {
  const auto a = stats({0, 0, 0}, Matrix::identity(3));
  EXPECT_NEAR(frechet_distance(a, a), 0.0, 1e-10);
  const auto b = stats({1, 0, 0}, Matrix::identity(3));
  EXPECT_NEAR(frechet_distance(a, b), 1.0, 1e-8);
  const auto c = stats({0}, Matrix(1, 1, {1}));
  const auto d = stats({3}, Matrix(1, 1, {4}));
  EXPECT_NEAR(frechet_distance(c, d), 10.0, 1e-8);
  EXPECT_THROW(frechet_distance(a, c), Error);
}

TEST(Frechet, SymmetricAndNonNegativeOnRandomStats) {
  std::mt19937_64 gen(2);
  for (int t = 0; t < 10; ++t) {
    const auto x = gaussian_stats(testsupport::random_table(40, 6, gen));
    const auto y = gaussian_stats(testsupport::random_table(40, 6, gen, 0.3));
    const double xy = frechet_distance(x, y);
    EXPECT_GE(xy, 0.0);
    EXPECT_NEAR(xy, frechet_distance(y, x), 1e-9 * std::max(1.0, xy));
  }
}

TEST(Kid, FullBlockMatchesDoubleSum) {
  std::mt19937_64 gen(4);
  const auto x = testsupport::random_table(60, 8, gen);
  const auto y = testsupport::random_table(60, 8, gen, 0.5);
  EXPECT_NEAR(mmd2_unbiased(x.rows(), y.rows()), oracle::mmd2(x.rows(), y.rows()), 1e-10);
  const auto r = kid_from_tables(x, y, {60, 3, 7});
  EXPECT_NEAR(r.value, oracle::mmd2(x.rows(), y.rows()), 1e-10);
  EXPECT_NEAR(r.std_error, 0.0, 1e-12);
}

TEST(Kid, SeparatedMassesArePositive) {
  const FeatureTable x({"a", "b", "c"}, Matrix(3, 2, {0, 0, 0, 0, 0, 0}));
  const FeatureTable y({"a", "b", "c"}, Matrix(3, 2, {5, 5, 5, 5, 5, 5}));
  EXPECT_GT(kid_from_tables(x, y).value, 0.0);
}

TEST(Kid, SeededBlocksAreReproducible) {
  std::mt19937_64 gen(6);
  const auto x = testsupport::random_table(80, 4, gen);
  const auto y = testsupport::random_table(90, 4, gen);
  const auto a = kid_from_tables(x, y, {20, 10, 5});
  const auto b = kid_from_tables(x, y, {20, 10, 5});
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_EQ(a.block, 20u);
  EXPECT_NE(kid_from_tables(x, y, {20, 10, 6}).value, a.value);
  EXPECT_THROW(kid_from_tables(x, y, {100, 1, 0}), Error);
}
