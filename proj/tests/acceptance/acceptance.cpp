// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cat/affinity.hpp"
#include "cat/linalg.hpp"
#include "cat/metrics.hpp"
#include "cat/parallel.hpp"
#include "cat/sampling.hpp"
#include "cat/toylab.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace cat;
using testsupport::make_classes;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------- criterion 1

struct ConfusionCase {
  std::vector<LabelMap> gt;
  std::vector<LabelMap> pred;
};

ConfusionCase confusion_case() {
  std::mt19937_64 gen(1);
  const auto t = make_classes("t", 5, 255);
  const auto s = make_classes("s", 7, 255);
  ConfusionCase c;
  for (int i = 0; i < 50; ++i) {
    c.gt.push_back(testsupport::random_map(t, 16, 16, gen, 0.05));
    c.pred.push_back(testsupport::random_map(s, 16, 16, gen, 0.05));
  }
  return c;
}

Outcome criterion1() {
  Outcome o;
  const auto c = confusion_case();
  const auto t0 = Clock::now();
  const auto a = confusion_affinity(c.gt, c.pred);
  const double elapsed = seconds_since(t0);
  const auto want = oracle::confusion(c.gt, c.pred);
  for (std::size_t k = 0; k < want.size(); ++k) {
    double sum = 0.0;
    for (std::size_t l = 0; l < want[k].size(); ++l) {
      o.require(a.rows(k, l) == want[k][l], "entry differs from counting oracle");
      sum += a.rows(k, l);
    }
    o.require(std::abs(sum - 1.0) <= 1e-9, "row sum off by more than 1e-9");
  }
  o.require(elapsed < 1.0, "runtime over 1 s");
  std::ostringstream d;
  d << "50 pairs 16x16, 5x7, exact match, " << elapsed * 1e3 << " ms";
  if (o.pass) o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion2() {
  Outcome o;
  std::mt19937_64 gen(2);
  const auto s = make_classes("s", 5, 255);
  const auto t = make_classes("t", 3, 255);
  double worst = 0.0;
  const auto t0 = Clock::now();
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PatchFeatureGrid> sg;
    std::vector<PatchFeatureGrid> tg;
    std::vector<LabelMap> sm;
    std::vector<LabelMap> tm;
    for (int m = 0; m < 4; ++m) {
      sg.push_back(testsupport::random_grid("s" + std::to_string(m), 4, 4, 4, 8, gen));
      sm.push_back(testsupport::random_map(s, 16, 16, gen, 0.05));
      tg.push_back(testsupport::random_grid("t" + std::to_string(m), 4, 4, 4, 8, gen));
      tm.push_back(testsupport::random_map(t, 16, 16, gen, 0.05));
    }
    const auto sp = prototype_from_patches(sg, sm);
    const auto tp = prototype_from_patches(tg, tm);
    const auto a = prototype_affinity(sp.table, tp.table, s, t);
    const auto want = oracle::cosine_affinity(oracle::prototypes(sg, sm), oracle::prototypes(tg, tm));
    for (std::size_t k = 0; k < want.size(); ++k)
      for (std::size_t l = 0; l < want[k].size(); ++l)
        worst = std::max(worst, std::abs(a.rows(k, l) - want[k][l]));
  }
  const double elapsed = seconds_since(t0);
  o.require(worst <= 1e-12, "deviation from brute-force oracle above 1e-12");
  o.require(elapsed < 1.0, "runtime over 1 s");
  std::ostringstream d;
  d << "20 trials, max |diff| " << worst << ", " << elapsed * 1e3 << " ms";
  if (o.pass) o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion3() {
  Outcome o;
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  const auto t = make_classes("t", 7);
  const auto s = make_classes("s", 11);
  for (int trial = 0; trial < 100; ++trial) {
    AffinityMatrix a;
    a.target_classes = t;
    a.source_classes = s;
    a.rows = testsupport::random_matrix(7, 11, gen, 0.0, 1.0);
    a.method = "manual";
    const auto h = binarize_hard(a);
    for (std::size_t k = 0; k < 7; ++k) {
      int ones = 0;
      bool binary = true;
      for (double v : h.rows.row(k)) {
        ones += v == 1.0;
        binary = binary && (v == 0.0 || v == 1.0);
      }
      o.require(binary && ones == 1, "row is not one-hot");
      const double f = scale(gen);
      for (double& v : a.rows.row(k)) v *= f;
    }
    o.require(binarize_hard(a).rows == h.rows, "binarization changed under row rescaling");
  }
  if (o.pass) o.detail = "100 matrices 7x11, one-hot rows, scale invariant";
  return o;
}

// ---------------------------------------------------------------- criterion 4

std::size_t vote_rule(std::size_t c, std::size_t p, std::size_t t, std::size_t fallback) {
  if (c == p || c == t) return c;
  if (p == t) return p;
  return fallback;
}

Outcome criterion4() {
  Outcome o;
  constexpr std::size_t kSources = 4;
  const auto s = make_classes("s", kSources);
  // one target row per (c, p, t) argmax triple
  const std::size_t rows = kSources * kSources * kSources;
  const auto t = make_classes("t", rows);
  auto build = [&](int which) {
    AffinityMatrix a;
    a.target_classes = t;
    a.source_classes = s;
    a.rows = Matrix(rows, kSources, 0.1);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t digits[3] = {r / 16, (r / 4) % 4, r % 4};
      a.rows(r, digits[which]) = 0.7;
    }
    a.method = "manual";
    a.normalized = true;
    return a;
  };
  const auto c = build(0);
  const auto p = build(1);
  const auto x = build(2);
  const auto ranking =
      FallbackRanking::from_scores({{"confusion", 48.7}, {"prototype", 49.5}, {"text", 51.6}});
  o.require(ranking.best() == AffinityMethod::confusion, "lowest FID is not confusion");
  const auto out = combine_majority(c, p, x, ranking);
  std::size_t unanimous = 0;
  std::size_t two_agree = 0;
  std::size_t disagree = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t vc = r / 16;
    const std::size_t vp = (r / 4) % 4;
    const std::size_t vt = r % 4;
    const std::size_t want = vote_rule(vc, vp, vt, vc);
    o.require(row_argmax(out.rows.row(r)) == want, "combined argmax differs from the rule");
    o.require(out.rows(r, want) == 1.0, "combined row is not one-hot");
    const bool all_differ = vc != vp && vc != vt && vp != vt;
    o.require(all_differ == (out.flags.count(r) == 1), "fallback flag mismatch");
    if (vc == vp && vp == vt) {
      ++unanimous;
    } else if (all_differ) {
      ++disagree;
    } else {
      ++two_agree;
    }
  }
  o.require(unanimous == 4 && two_agree == 36 && disagree == 24, "pattern count mismatch");
  // alternate fallbacks exercise the non-confusion branches
  const auto by_text = combine_majority(c, p, x, FallbackRanking::from_order({"text", "confusion", "prototype"}));
  for (std::size_t r = 0; r < rows; ++r) {
    o.require(row_argmax(by_text.rows.row(r)) == vote_rule(r / 16, (r / 4) % 4, r % 4, r % 4),
              "text fallback mismatch");
  }
  if (o.pass) o.detail = "64 argmax triples (4 unanimous, 36 two-agree, 24 disagree); fallback -> confusion";
  return o;
}

// ---------------------------------------------------------------- criterion 5

Outcome criterion5() {
  Outcome o;
  const auto t0 = Clock::now();
  auto stats = [](std::vector<double> mean, Matrix cov) {
    GaussianStats g;
    g.mean = std::move(mean);
    g.cov = std::move(cov);
    g.n = 2;
    return g;
  };
  const auto zero = stats(std::vector<double>(8, 0.0), Matrix::identity(8));
  std::vector<double> shifted(8, 0.0);
  shifted[0] = 1.0;
  const double d0 = frechet_distance(zero, zero);
  const double d1 = frechet_distance(zero, stats(shifted, Matrix::identity(8)));
  const double d10 = frechet_distance(stats({0.0}, Matrix(1, 1, {1.0})), stats({3.0}, Matrix(1, 1, {4.0})));
  o.require(std::abs(d0) <= 1e-10, "identical stats not 0");
  o.require(std::abs(d1 - 1.0) <= 1e-8, "unit shift not 1");
  o.require(std::abs(d10 - 10.0) <= 1e-8, "1-D case not 10");

  std::mt19937_64 gen(5);
  std::uniform_int_distribution<std::size_t> dim(1, 32);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = trial < 10 ? 32 : dim(gen);
    const std::size_t rank = trial % 3 == 0 ? std::max<std::size_t>(1, n / 2) : n;
    const Matrix a = testsupport::random_matrix(rank, n, gen);
    const Matrix m = a.transposed() * a;
    const Matrix r = sqrtm_psd(m);
    worst = std::max(worst, frobenius_norm(r * r - m) / frobenius_norm(m));
  }
  const double elapsed = seconds_since(t0);
  o.require(worst <= 1e-8, "sqrtm reconstruction above 1e-8 relative");
  o.require(elapsed < 5.0, "runtime over 5 s");
  std::ostringstream d;
  d << "analytic 0/1/10 ok, sqrtm worst rel " << worst << ", " << elapsed * 1e3 << " ms";
  if (o.pass) o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------- criterion 6

Outcome criterion6() {
  Outcome o;
  std::mt19937_64 gen(6);
  const auto x = testsupport::random_table(200, 16, gen);
  const auto y = testsupport::random_table(200, 16, gen, 0.2);
  const auto kid = kid_from_tables(x, y, {200, 1, 0});
  const double want = oracle::mmd2(x.rows(), y.rows());
  const double diff = std::abs(kid.value - want);
  o.require(diff <= 1e-10, "KID differs from the double-sum estimator");
  std::ostringstream d;
  d << "200 points, |diff| " << diff;
  o.detail = o.pass ? d.str() : o.detail + " (" + d.str() + ")";
  return o;
}

// ---------------------------------------------------------------- criterion 7

Outcome criterion7() {
  Outcome o;
  const auto cs = make_classes("c", 2);
  const LabelMap gt(cs, 4, 1, {0, 0, 1, 1});
  const LabelMap pred(cs, 4, 1, {0, 1, 1, 1});
  const double value = miou(confusion_counts({gt}, {pred}));
  o.require(value == 7.0 / 12.0, "fixture mIoU is not 7/12");
  o.require(miou(confusion_counts({gt}, {gt})) == 1.0, "perfect prediction is not 1");
  if (o.pass) o.detail = "7/12 exactly, perfect = 1";
  return o;
}

// ---------------------------------------------------------------- criterion 8

std::vector<PoolImage> sampling_pool() {
  std::mt19937_64 gen(8);
  const auto cs = make_classes("c", 6, 255);
  std::uniform_int_distribution<int> dominant(0, 5);
  std::vector<PoolImage> pool;
  for (int i = 0; i < 10; ++i) {
    const auto base = testsupport::random_map(cs, 12, 12, gen, 0.05);
    std::vector<std::int32_t> v(base.values().begin(), base.values().end());
    const int dom = dominant(gen);
    for (std::size_t p = 0; p < 72; ++p) v[p] = dom;
    pool.push_back({"pool" + std::to_string(i), LabelMap(cs, 12, 12, v)});
  }
  return pool;
}

std::string serialize(const SubsetSelection& s) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < s.selected_ids.size(); ++i) {
    out << s.selected_ids[i] << ':' << s.per_step_kl[i] << ';';
  }
  return out.str();
}

Outcome criterion8() {
  Outcome o;
  const auto pool = sampling_pool();
  for (std::uint64_t seed : {0u, 1u, 2u, 3u}) {
    const auto sel = greedy_select(pool, pool.size(), seed);
    std::vector<double> running(6, 0.0);
    std::vector<bool> used(pool.size(), false);
    for (std::size_t step = 0; step < sel.selected_ids.size(); ++step) {
      std::size_t chosen = 0;
      while (pool[chosen].id != sel.selected_ids[step]) ++chosen;
      auto kl_with = [&](std::size_t i) {
        auto c = running;
        const auto add = oracle::labeled_counts(pool[i].map);
        for (std::size_t j = 0; j < c.size(); ++j) c[j] += add[j];
        return oracle::kl_uniform_from_counts(c, kDefaultKlEpsilon);
      };
      const double best = kl_with(chosen);
      if (step > 0) {
        for (std::size_t i = 0; i < pool.size(); ++i) {
          if (!used[i] && i != chosen) o.require(best <= kl_with(i) + 1e-12, "a better candidate was skipped");
        }
      }
      used[chosen] = true;
      const auto add = oracle::labeled_counts(pool[chosen].map);
      for (std::size_t j = 0; j < running.size(); ++j) running[j] += add[j];
    }
    o.require(serialize(sel) == serialize(greedy_select(pool, pool.size(), seed)),
              "rerun differs");
  }
  if (o.pass) o.detail = "10-image pool, 4 seeds, every step optimal, reruns identical";
  return o;
}

// ---------------------------------------------------------------- criterion 9

Outcome criterion9() {
  Outcome o;
  const auto t0 = Clock::now();
  const toy::ToyConfig config;
  std::vector<std::uint64_t> seeds(20);
  for (std::uint64_t i = 0; i < 20; ++i) seeds[i] = i;
  const auto report = toy::run_experiment(config, seeds);
  o.require(report.initial_mse_wins >= 19, "initial-MSE wins below 19/20");
  o.require(report.convergence_wins >= 19, "convergence wins below 19/20");

  std::size_t correct_wins = 0;
  bool residual_noop = true;
  bool frozen = true;
  double worst_grad = 0.0;
  for (std::uint64_t seed : seeds) {
    const auto g = toy::gen_world(config, seed);
    const Matrix table = toy::fit_source(g.source, config.source_classes);
    const auto correct = toy::init_target(table, toy::oracle_affinity(g.world));
    const auto random = toy::init_target_random(table, g.world.source_classes,
                                                g.world.target_classes, seed + 7919);
    correct_wins += toy::toy_loss(correct, g.target) < toy::toy_loss(random, g.target);
    residual_noop = residual_noop && correct.predict() == correct.affinity.rows * correct.source_table;

    if (seed < 3) {
      const auto s1 = toy::train_target(random, g.target, {25, 0, config.lr});
      frozen = frozen && s1.model.source_table == table;
      // central differences against the analytic gradient, all three parameter blocks
      auto model = s1.model;
      const auto grad = toy::toy_gradients(model, g.target);
      auto check = [&](Matrix& param, const Matrix& analytic) {
        double scale = 0.0;
        for (double v : analytic.data()) scale = std::max(scale, std::abs(v));
        const double h = 1e-5;
        for (std::size_t i = 0; i < param.data().size(); ++i) {
          const double saved = param.data()[i];
          param.data()[i] = saved + h;
          const double up = toy::toy_loss(model, g.target);
          param.data()[i] = saved - h;
          const double down = toy::toy_loss(model, g.target);
          param.data()[i] = saved;
          const double fd = (up - down) / (2 * h);
          worst_grad = std::max(worst_grad, std::abs(fd - analytic.data()[i]) / scale);
        }
      };
      check(model.affinity.rows, grad.affinity);
      check(model.residual, grad.residual);
      check(model.source_table, grad.source_table);
    }
  }
  const double elapsed = seconds_since(t0);
  o.require(correct_wins == 20, "correct affinity did not beat random affinity in every seed");
  o.require(residual_noop, "zero residual changed the prediction");
  o.require(frozen, "stage 1 modified the source table");
  o.require(worst_grad <= 1e-6, "analytic gradient differs from finite differences");
  o.require(elapsed < 30.0, "runtime over 30 s");
  std::ostringstream d;
  d << "initial " << report.initial_mse_wins << "/20, convergence " << report.convergence_wins
    << "/20, final " << report.final_mse_wins << "/20, correct-vs-random " << correct_wins
    << "/20, grad rel err " << worst_grad << ", " << elapsed << " s";
  o.detail = o.pass ? d.str() : o.detail + " (" + d.str() + ")";
  return o;
}

// --------------------------------------------------------------- criterion 10

Outcome criterion10() {
  Outcome o;
  const auto c = confusion_case();
  const auto pool = sampling_pool();
  std::vector<Matrix> affinities;
  std::vector<std::string> selections;
  const int counts[] = {1, 4, 8};
  for (int threads : counts) {
    set_thread_count(threads);
    affinities.push_back(confusion_affinity(c.gt, c.pred).rows);
    selections.push_back(serialize(greedy_select(pool, 7, 11)));
  }
  set_thread_count(1);
  for (std::size_t i = 1; i < affinities.size(); ++i) {
    o.require(affinities[i] == affinities[0], "confusion affinity depends on thread count");
    o.require(selections[i] == selections[0], "greedy selection depends on thread count");
  }
  if (o.pass) o.detail = "criteria 1 and 8 bit-identical at 1, 4, 8 threads";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"1 confusion affinity vs counting oracle", criterion1},
      {"2 prototype pipeline vs brute force", criterion2},
      {"3 hard binarization", criterion3},
      {"4 majority vote truth table", criterion4},
      {"5 frechet distance and sqrtm", criterion5},
      {"6 KID vs direct estimator", criterion6},
      {"7 mIoU fixture", criterion7},
      {"8 greedy sampler optimality", criterion8},
      {"9 toy lab", criterion9},
      {"10 thread-count independence", criterion10},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome result;
    try {
      result = run();
    } catch (const std::exception& e) {
      result.pass = false;
      result.detail = std::string("exception: ") + e.what();
    }
    failures += !result.pass;
    std::printf("%s criterion %s: %s\n", result.pass ? "PASS" : "FAIL", name, result.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
