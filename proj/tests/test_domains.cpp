#include <gtest/gtest.h>

#include <random>

#include "liftu/domains.hpp"
#include "liftu/error.hpp"
#include "support.hpp"

using namespace liftu;

namespace {

const Logvar X("X"), T("T"), Y("Y");

DomainSpec triple_spec() {
  DomainSpec s;
  s.logvars[X] = BetaBinomialDomain{6.0, 15.0, 20, 100, {}, "x"};
  s.logvars[T] = FixedDomain{{Constant("t1"), Constant("t2"), Constant("t3")}};
  return s;
}

}  // namespace

TEST(BetaBinomial, MatchesRecurrenceOracle) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.2, 12.0);
  for (int round = 0; round < 200; ++round) {
    std::size_t n = 1 + rng() % 40;
    double a = u(rng), b = u(rng);
    auto oracle = liftu::testing::pmf_by_recurrence(n, a, b);
    double total = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      double p = beta_binomial_pmf(k, n, a, b);
      EXPECT_NEAR(p, oracle[k], 1e-12 * std::max(1.0, oracle[k] * 1e3));
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(BetaBinomial, FigureValues) {
  EXPECT_NEAR(beta_binomial_pmf(20, 20, 6, 15) / 3.85e-7, 1.0, 1e-2);
  EXPECT_NEAR(beta_binomial_pmf(5, 20, 6, 15) / 1.42e-1, 1.0, 1e-2);
  for (std::size_t n : {1, 4, 9})
    for (std::size_t k = 0; k <= n; ++k) EXPECT_NEAR(beta_binomial_pmf(k, n, 1, 1), 1.0 / static_cast<double>(n + 1), 1e-13);
}

TEST(BetaBinomial, RejectsInvalidParameters) {
  EXPECT_THROW(beta_binomial_pmf(1, 3, 0.0, 1.0), DomainError);
  EXPECT_THROW(beta_binomial_pmf(1, 3, 1.0, -2.0), DomainError);
  EXPECT_THROW(beta_binomial_pmf(4, 3, 1.0, 1.0), DomainError);
}

TEST(EnumerateWorlds, BetaBinomialSizesAndUnnormalisedMass) {
  auto worlds = enumerate_worlds(triple_spec(), std::vector<Logvar>{X, T});
  ASSERT_EQ(worlds.size(), 20u);
  double mass = 0.0;
  for (std::size_t k = 0; k < 20; ++k) {
    EXPECT_EQ(worlds[k].size(X), 100 * (k + 1));
    EXPECT_EQ(worlds[k].size(T), 3u);
    EXPECT_EQ(worlds[k].id, k);
    EXPECT_EQ(worlds[k].prob, beta_binomial_pmf(k + 1, 20, 6, 15));
    mass += worlds[k].prob;
  }
  EXPECT_NEAR(mass, 1.0 - beta_binomial_pmf(0, 20, 6, 15), 1e-12);
  EXPECT_EQ(worlds[0].domains.at(X).front(), Constant("x1"));
  EXPECT_EQ(worlds[0].domains.at(X).back(), Constant("x100"));
  EXPECT_EQ(worlds[3].size_key(), std::vector<std::size_t>{400});
}

TEST(EnumerateWorlds, GuaranteedConstantsComeFirst) {
  DomainSpec s;
  s.logvars[X] = BetaBinomialDomain{2.0, 3.0, 1, 3, {Constant("a")}, ""};
  auto worlds = enumerate_worlds(s, std::vector<Logvar>{X});
  ASSERT_EQ(worlds.size(), 1u);
  EXPECT_EQ(worlds[0].domains.at(X), (std::vector<Constant>{Constant("a"), Constant("x2"), Constant("x3")}));
  EXPECT_DOUBLE_EQ(worlds[0].prob, beta_binomial_pmf(1, 1, 2, 3));
  EXPECT_LT(worlds[0].prob, 1.0);

  s.logvars[X] = BetaBinomialDomain{2.0, 3.0, 1, 1, {Constant("a"), Constant("b")}, ""};
  EXPECT_THROW(enumerate_worlds(s, std::vector<Logvar>{X}), DomainError);
}

TEST(EnumerateWorlds, IndependentProductOfEnumeratedSpecs) {
  DomainSpec s;
  EnumeratedDomain ex;
  ex.worlds = {{3, {}, 0.25}, {1, {}, 0.75}};
  EnumeratedDomain ey;
  ey.worlds = {{std::nullopt, {Constant("p"), Constant("q")}, std::nullopt}, {2, {}, std::nullopt}, {5, {}, std::nullopt}};
  s.logvars[X] = ex;
  s.logvars[Y] = ey;
  s.logvars[T] = FixedDomain{{Constant("s1"), Constant("s2")}};
  auto worlds = enumerate_worlds(s, std::vector<Logvar>{Y, X, T});
  ASSERT_EQ(worlds.size(), 6u);
  double total = 0.0;
  for (const auto& w : worlds) {
    total += w.prob;
    EXPECT_EQ(w.domains.at(T).size(), 2u);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  // X sorted by size, then Y (last logvar in name order varies fastest).
  EXPECT_EQ(worlds[0].size(X), 1u);
  EXPECT_NEAR(worlds[0].prob, 0.75 / 3.0, 1e-15);
  EXPECT_EQ(worlds[0].size_key(), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(worlds[5].size_key(), (std::vector<std::size_t>{3, 5}));
}

TEST(EnumerateWorlds, ValidationErrors) {
  DomainSpec s;
  s.logvars[X] = FixedDomain{{Constant("a")}};
  EXPECT_THROW(enumerate_worlds(s, std::vector<Logvar>{X, T}), DomainError);
  s.logvars[T] = FixedDomain{};
  EXPECT_THROW(enumerate_worlds(s, std::vector<Logvar>{X, T}), DomainError);
  EnumeratedDomain bad;
  bad.worlds = {{2, {}, 0.5}, {3, {}, 0.6}};
  s.logvars[T] = bad;
  EXPECT_THROW(enumerate_worlds(s, std::vector<Logvar>{X, T}), DomainError);
  bad.worlds = {{2, {}, 0.5}, {3, {}, std::nullopt}};
  s.logvars[T] = bad;
  EXPECT_THROW(enumerate_worlds(s, std::vector<Logvar>{X, T}), DomainError);
}

TEST(FilterWorlds, ThresholdKeepsSizes200To900) {
  auto worlds = enumerate_worlds(triple_spec(), std::vector<Logvar>{X, T});
  auto kept = filter_worlds(worlds, 0.05);
  ASSERT_EQ(kept.kept.size(), 8u);
  EXPECT_EQ(kept.kept.front().size(X), 200u);
  EXPECT_EQ(kept.kept.back().size(X), 900u);
  EXPECT_EQ(kept.dropped, 12u);
  double mass = 0.0;
  for (const auto& w : kept.kept) {
    EXPECT_EQ(w.prob, worlds[w.id].prob);
    mass += w.prob;
  }
  EXPECT_DOUBLE_EQ(kept.retained_mass, mass);
  EXPECT_EQ(filter_worlds(worlds, 0.0).kept.size(), 20u);
}

TEST(FilterWorlds, RaisingThresholdNeverKeepsMore) {
  auto worlds = enumerate_worlds(triple_spec(), std::vector<Logvar>{X, T});
  std::size_t last = worlds.size();
  for (double t = 0.0; t < 0.2; t += 0.005) {
    auto n = filter_worlds(worlds, t).kept.size();
    EXPECT_LE(n, last);
    last = n;
  }
}

TEST(WorldFilter, ValidatesThresholds) {
  EXPECT_NO_THROW((WorldFilter{0.0, true, std::nullopt}.validate()));
  EXPECT_THROW((WorldFilter{1.0, false, std::nullopt}.validate()), DomainError);
  EXPECT_THROW((WorldFilter{-0.1, false, std::nullopt}.validate()), DomainError);
  EXPECT_THROW((WorldFilter{0.1, true, 1.5}.validate()), DomainError);
  EXPECT_DOUBLE_EQ((WorldFilter{0.05, true, std::nullopt}.combined_threshold()), 0.05);
  EXPECT_DOUBLE_EQ((WorldFilter{0.05, true, 0.01}.combined_threshold()), 0.01);
}
