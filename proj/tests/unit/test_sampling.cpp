#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cat/error.hpp"
#include "cat/parallel.hpp"
#include "cat/sampling.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace cat;
using testsupport::make_classes;

namespace {

LabelMap counts_map(const ClassSetPtr& cs, const std::vector<int>& counts) {
  std::vector<std::int32_t> v;
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (int i = 0; i < counts[c]; ++i) v.push_back(static_cast<std::int32_t>(c));
  return LabelMap(cs, v.size(), 1, v);
}

std::vector<PoolImage> random_pool(std::size_t n, const ClassSetPtr& cs, std::mt19937_64& gen) {
  std::vector<PoolImage> pool;
  std::uniform_int_distribution<int> skew(0, static_cast<int>(cs->size()) - 1);
  for (std::size_t i = 0; i < n; ++i) {
    // skewed maps: a dominant class fills the top half
    auto base = testsupport::random_map(cs, 8, 8, gen);
    std::vector<std::int32_t> v(base.values().begin(), base.values().end());
    const int dom = skew(gen);
    for (std::size_t p = 0; p < 32; ++p) v[p] = dom;
    pool.push_back({"img" + std::to_string(i), LabelMap(cs, 8, 8, v)});
  }
  return pool;
}

}  // namespace

TEST(Empirical, Examples) {
  const auto cs = make_classes("c", 2);
  EXPECT_EQ(empirical_distribution({counts_map(cs, {2, 2})}), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(empirical_distribution({counts_map(cs, {4, 0}), counts_map(cs, {0, 4})}),
            (std::vector<double>{0.5, 0.5}));
}

TEST(Empirical, MatchesHistogramSum) {
  std::mt19937_64 gen(2);
  const auto cs = make_classes("c", 5, 255);
  std::vector<LabelMap> maps;
  for (int i = 0; i < 6; ++i) maps.push_back(testsupport::random_map(cs, 7, 5, gen, 0.2));
  std::vector<double> tally(5, 0.0);
  double total = 0.0;
  for (const auto& m : maps) {
    const auto c = oracle::labeled_counts(m);
    for (std::size_t i = 0; i < 5; ++i) {
      tally[i] += c[i];
      total += c[i];
    }
  }
  const auto p = empirical_distribution(maps);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(p[i], tally[i] / total);
}

TEST(Kl, UniformIsZeroAndClosedFormMatches) {
  EXPECT_NEAR(kl_to_uniform(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 0.0, 1e-12);
  const double eps = 1e-6;
  const double p0 = (1.0 + eps) / (1.0 + 2 * eps);
  const double p1 = eps / (1.0 + 2 * eps);
  const double expected = 0.5 * std::log(0.5 / p0) + 0.5 * std::log(0.5 / p1);
  EXPECT_NEAR(kl_to_uniform(std::vector<double>{1.0, 0.0}, eps), expected, 1e-12);
  const double rev = p0 * std::log(p0 / 0.5) + p1 * std::log(p1 / 0.5);
  EXPECT_NEAR(kl_to_uniform(std::vector<double>{1.0, 0.0}, eps, KlDirection::empirical_to_uniform),
              rev, 1e-12);
}

TEST(Kl, NonNegativeOnRandomSimplexPoints) {
  std::mt19937_64 gen(5);
  std::exponential_distribution<double> e(1.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> p(1 + t % 9);
    double s = 0.0;
    for (auto& v : p) s += (v = e(gen));
    for (auto& v : p) v /= s;
    EXPECT_GE(kl_to_uniform(p), 0.0);
    EXPECT_GE(kl_to_uniform(p, 1e-8, KlDirection::empirical_to_uniform), 0.0);
  }
}

TEST(Kl, RejectsBadInputs) {
  EXPECT_THROW(kl_to_uniform(std::vector<double>{0.5, 0.4}), Error);
  EXPECT_THROW(kl_to_uniform(std::vector<double>{0.5, 0.5}, 0.0), Error);
  EXPECT_THROW(kl_to_uniform(std::vector<double>{}), Error);
}

TEST(Greedy, HandExample) {
  const auto cs = make_classes("c", 2);
  const std::vector<PoolImage> pool{{"a", counts_map(cs, {8, 0})},
                                    {"b", counts_map(cs, {0, 8})},
                                    {"c", counts_map(cs, {4, 4})}};
  // find a seed whose first pick is "a", then the balanced complement must follow
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const auto sel = greedy_select(pool, 2, seed);
    if (sel.selected_ids.front() != "a") continue;
    EXPECT_EQ(sel.selected_ids[1], "b");
    EXPECT_NEAR(sel.per_step_kl[1], 0.0, 1e-12);
    return;
  }
  FAIL() << "no seed in [0,64) picks image a first";
}

TEST(Greedy, FullPoolReturnsEveryId) {
  std::mt19937_64 gen(6);
  const auto cs = make_classes("c", 4);
  const auto pool = random_pool(7, cs, gen);
  const auto sel = greedy_select(pool, pool.size(), 3);
  auto ids = sel.selected_ids;
  std::sort(ids.begin(), ids.end());
  std::vector<std::string> all;
  for (const auto& p : pool) all.push_back(p.id);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(ids, all);
}

TEST(Greedy, EachStepIsOptimalAmongCandidates) {
  std::mt19937_64 gen(10);
  const auto cs = make_classes("c", 5, 255);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto pool = random_pool(10, cs, gen);
    for (bool reverse : {false, true}) {
      const auto dir = reverse ? KlDirection::empirical_to_uniform : KlDirection::uniform_to_empirical;
      const auto sel = greedy_select(pool, 6, seed, kDefaultKlEpsilon, dir);
      std::vector<double> running(5, 0.0);
      std::vector<bool> used(pool.size(), false);
      for (std::size_t step = 0; step < sel.selected_ids.size(); ++step) {
        std::size_t chosen = 0;
        while (pool[chosen].id != sel.selected_ids[step]) ++chosen;
        ASSERT_FALSE(used[chosen]);
        auto with = [&](std::size_t i) {
          auto c = running;
          const auto add = oracle::labeled_counts(pool[i].map);
          for (std::size_t j = 0; j < c.size(); ++j) c[j] += add[j];
          return oracle::kl_uniform_from_counts(c, kDefaultKlEpsilon, reverse);
        };
        const double kl_chosen = with(chosen);
        EXPECT_NEAR(sel.per_step_kl[step], kl_chosen, 1e-12);
        if (step > 0) {
          for (std::size_t i = 0; i < pool.size(); ++i) {
            if (used[i] || i == chosen) continue;
            EXPECT_LE(kl_chosen, with(i) + 1e-12) << "step " << step << " candidate " << pool[i].id;
          }
        }
        used[chosen] = true;
        const auto add = oracle::labeled_counts(pool[chosen].map);
        for (std::size_t j = 0; j < running.size(); ++j) running[j] += add[j];
      }
    }
  }
}

TEST(Greedy, DeterministicAcrossRunsAndThreads) {
  std::mt19937_64 gen(12);
  const auto cs = make_classes("c", 6);
  const auto pool = random_pool(25, cs, gen);
  set_thread_count(1);
  const auto a = greedy_select(pool, 10, 99);
  set_thread_count(8);
  const auto b = greedy_select(pool, 10, 99);
  set_thread_count(1);
  EXPECT_EQ(a.selected_ids, b.selected_ids);
  EXPECT_EQ(a.per_step_kl, b.per_step_kl);
}

TEST(Greedy, RejectsInvalidRequests) {
  const auto cs = make_classes("c", 2, 255);
  const std::vector<PoolImage> pool{{"a", counts_map(cs, {1, 1})},
                                    {"b", LabelMap(cs, 1, 1, {255})}};
  EXPECT_THROW(greedy_select(pool, 0, 1), Error);
  EXPECT_THROW(greedy_select(pool, 3, 1), Error);
  EXPECT_THROW(greedy_select(pool, 1, 1), Error);
  const std::vector<PoolImage> dup{{"a", counts_map(cs, {1, 1})}, {"a", counts_map(cs, {1, 1})}};
  EXPECT_THROW(greedy_select(dup, 1, 1), Error);
}
