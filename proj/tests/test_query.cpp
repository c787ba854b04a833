#include <gtest/gtest.h>

#include <random>

#include "liftu/error.hpp"
#include "liftu/io.hpp"
#include "liftu/query.hpp"
#include "support.hpp"

using namespace liftu;
using liftu::testing::atom;

namespace {

const Logvar X("X"), T("T");

// Entries with given model probabilities and P(A = true), sized 1, 2, ...
AnswerSet synthetic(const std::vector<double>& model_probs, const std::vector<double>& p_true) {
  AnswerSet a;
  a.query.targets = {atom("A")};
  for (std::size_t i = 0; i < model_probs.size(); ++i) {
    Answer e;
    e.provenance = {i, 0};
    e.model_prob = model_probs[i];
    e.size_key = {i + 1};
    e.answer.targets = a.query.targets;
    e.answer.ranges = {Range::boolean()};
    e.answer.probs.resize(2);
    e.answer.probs << 1.0 - p_true[i], p_true[i];
    a.entries.push_back(std::move(e));
    a.retained_mass += model_probs[i];
  }
  return a;
}

const EventProbe kTrue{atom("A"), "true"};

std::vector<std::size_t> brute_pareto(const std::vector<std::pair<double, double>>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      dominated = pts[j].first >= pts[i].first && pts[j].second >= pts[i].second &&
                  (pts[j].first > pts[i].first || pts[j].second > pts[i].second);
    }
    if (!dominated) out.push_back(i);
  }
  return out;
}

std::vector<WeightedModel> expanded(const char* model, const char* program, const char* domains,
                                    std::optional<WorldFilter> f = std::nullopt) {
  auto pfs = io::parse_parfactors(io::read_file(model));
  UniverseModel u(io::template_of(pfs), parse_program(io::read_file(program)),
                  io::parse_domain_spec(io::read_file(domains)), f);
  return expand(u).models;
}

}  // namespace

TEST(TopK, ByQueryProbability) {
  auto a = synthetic({0.2, 0.3, 0.5}, {0.9, 0.5, 0.7});
  auto s = top_k_query_prob(a, kTrue, 2);
  EXPECT_EQ(s.rows, (std::vector<std::size_t>{0, 2}));
  EXPECT_FALSE(s.truncated);
  auto all = top_k_query_prob(a, kTrue, 5);
  EXPECT_EQ(all.rows, (std::vector<std::size_t>{0, 2, 1}));
  EXPECT_TRUE(all.truncated);
  EXPECT_THROW(top_k_query_prob(a, kTrue, 0), QueryError);
}

TEST(TopK, TiesBrokenByModelProbabilityThenOrder) {
  auto a = synthetic({0.1, 0.4, 0.4, 0.1}, {0.5, 0.5, 0.5, 0.6});
  EXPECT_EQ(top_k_query_prob(a, kTrue, 4).rows, (std::vector<std::size_t>{3, 1, 2, 0}));
}

TEST(TopK, ByModelProbability) {
  auto a = synthetic({0.1, 0.5, 0.4}, {0.3, 0.3, 0.3});
  EXPECT_EQ(top_k_model_prob(a, 2).rows, (std::vector<std::size_t>{1, 2}));
  EXPECT_THROW(top_k_model_prob(a, 0), QueryError);
}

TEST(Skyline, SmallExample) {
  // (0.6, 0.4) dominates (0.5, 0.2); (0.3, 0.9) dominates (0.2, 0.9).
  auto a = synthetic({0.5, 0.3, 0.6, 0.2}, {0.2, 0.9, 0.4, 0.9});
  EXPECT_EQ(skyline(a, kTrue).rows, (std::vector<std::size_t>{2, 1}));
}

TEST(Skyline, MatchesBruteForceOnRandomSets) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 300; ++round) {
    std::size_t n = 1 + rng() % 200;
    std::vector<std::pair<double, double>> pts(n);
    // Coarse grid so ties occur.
    for (auto& [x, y] : pts) x = static_cast<double>(rng() % 12) / 11.0, y = static_cast<double>(rng() % 12) / 11.0;
    auto got = pareto_frontier(pts);
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, brute_pareto(pts));
  }
}

TEST(Skyline, InvariantUnderPositiveScaling) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> mp(40), pe(40);
  for (std::size_t i = 0; i < 40; ++i) mp[i] = u(rng), pe[i] = u(rng);
  auto base = skyline(synthetic(mp, pe), kTrue).rows;
  for (auto& m : mp) m *= 0.37;
  EXPECT_EQ(skyline(synthetic(mp, pe), kTrue).rows, base);
}

TEST(Trend, Classification) {
  const std::vector<double> mp{0.2, 0.2, 0.2};
  EXPECT_EQ(trend_report(synthetic(mp, {0.5, 0.4, 0.3}), kTrue).direction, Trend::Decreasing);
  EXPECT_EQ(trend_report(synthetic(mp, {0.3, 0.4, 0.5}), kTrue).direction, Trend::Increasing);
  EXPECT_EQ(trend_report(synthetic(mp, {0.3, 0.3, 0.3}), kTrue).direction, Trend::Constant);
  EXPECT_EQ(trend_report(synthetic(mp, {0.3, 0.5, 0.4}), kTrue).direction, Trend::NonMonotone);
  EXPECT_EQ(trend_report(synthetic({0.2}, {0.3}), kTrue).direction, Trend::Insufficient);
  auto r = trend_report(synthetic(mp, {0.5, 0.4, 0.25}), kTrue);
  EXPECT_NEAR(r.max_delta, 0.15, 1e-12);
  EXPECT_STREQ(to_string(Trend::Decreasing), "decreasing");
}

TEST(Trend, SortsByDomainSize) {
  auto a = synthetic({0.2, 0.2, 0.2}, {0.3, 0.5, 0.4});
  a.entries[0].size_key = {3};
  a.entries[1].size_key = {1};
  a.entries[2].size_key = {2};
  auto r = trend_report(a, kTrue);
  EXPECT_EQ(r.rows, (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_EQ(r.direction, Trend::Decreasing);
}

TEST(Probe, Validation) {
  auto a = synthetic({0.2}, {0.3});
  EXPECT_THROW(check_probe(a, EventProbe{atom("B"), "true"}), QueryError);
  EXPECT_THROW(check_probe(a, EventProbe{atom("A"), "maybe"}), QueryError);
  EXPECT_NEAR(probe_probability(a.entries[0], kTrue), 0.3, 1e-15);
}

TEST(QueryAll, MatchesGroundVeOnSmallWorlds) {
  DomainSpec spec;
  EnumeratedDomain ex;
  ex.prefix = "x";
  ex.worlds = {{1, {}, 0.2}, {2, {}, 0.3}, {3, {}, 0.5}};
  spec.logvars[X] = ex;
  spec.logvars[T] = FixedDomain{{Constant("t1"), Constant("t2"), Constant("t3")}};
  auto pfs = io::parse_parfactors(io::read_file("data/epidemic/model.json"));
  UniverseModel u(io::template_of(pfs), parse_program(io::read_file("data/epidemic/treatment.dl")), spec);
  auto models = expand(u).models;
  ASSERT_EQ(models.size(), 9u);

  QuerySpec q;
  q.targets = {atom("Sick", {"x1"}), atom("Epid")};
  q.evidence.add(atom("Travel", {"x1"}), "true");
  auto a = query_all(models, q);
  ASSERT_EQ(a.entries.size(), 9u);
  EXPECT_TRUE(a.skipped.empty());
  for (std::size_t i = 0; i < models.size(); ++i) {
    auto oracle = ground_ve(models[i].model, q);
    EXPECT_LT(liftu::testing::max_abs_diff(a.entries[i].answer, oracle), 1e-9);
    EXPECT_EQ(a.entries[i].model_prob, models[i].prob);
  }
}

TEST(QueryAll, SkipsModelsWithoutTheAtom) {
  DomainSpec spec;
  EnumeratedDomain ex;
  ex.prefix = "x";
  ex.worlds = {{1, {}, 0.5}, {2, {}, 0.5}};
  spec.logvars[X] = ex;
  spec.logvars[T] = FixedDomain{{Constant("t1"), Constant("t2"), Constant("t3")}};
  auto pfs = io::parse_parfactors(io::read_file("data/epidemic/model.json"));
  UniverseModel u(io::template_of(pfs), parse_program(io::read_file("data/epidemic/treatment.dl")), spec);
  auto models = expand(u).models;
  QuerySpec q;
  q.targets = {atom("Sick", {"x2"})};
  auto a = query_all(models, q);
  EXPECT_EQ(a.entries.size(), 3u);
  EXPECT_EQ(a.skipped.size(), 3u);
  q.targets = {atom("Sick", {"x7"})};
  EXPECT_THROW(query_all(models, q), MissingAtomError);
}

TEST(QueryAll, SkipsDegenerateModels) {
  auto models = expanded("data/epidemic/model.json", "data/epidemic/treatment.dl", "data/epidemic/people.json");
  models[1].degenerate = true;
  models[1].model = ParameterisedModel();
  QuerySpec q;
  q.targets = {atom("Sick", {"alice"})};
  auto a = query_all(models, q);
  EXPECT_EQ(a.entries.size(), 2u);
  ASSERT_EQ(a.skipped.size(), 1u);
  EXPECT_EQ(a.skipped[0].provenance.constraint_world, 1u);
  EXPECT_NEAR(a.retained_mass, 0.8, 1e-12);
}

TEST(QueryAll, DecliningFixtureTopThreeAreSmallestSizes) {
  auto models = expanded("data/epidemic/model_declining.json", "data/epidemic/treatment.dl", "data/epidemic/domains.json",
                         WorldFilter{0.05, true, std::nullopt});
  QuerySpec q;
  q.targets = {atom("Sick", {"x1"})};
  auto a = query_all(models, q);
  ASSERT_EQ(a.entries.size(), 7u);
  auto top = top_k_query_prob(a, EventProbe{atom("Sick", {"x1"}), "true"}, 3);
  std::vector<std::size_t> sizes;
  for (auto r : top.rows) sizes.push_back(a.entries[r].size_key.at(0));
  EXPECT_EQ(sizes, (std::vector<std::size_t>{200, 300, 400}));
  EXPECT_EQ(trend_report(a, EventProbe{atom("Sick", {"x1"}), "true"}).direction, Trend::Decreasing);
}
