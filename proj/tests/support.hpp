#pragma once

// Shared fixtures and independent oracles for the unit and acceptance tests.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "liftu/lve.hpp"
#include "liftu/model.hpp"

namespace liftu::testing {

inline Prv prv(std::string name, std::vector<std::string> params = {}) {
  Prv p{std::move(name), {}, Range::boolean()};
  for (auto& lv : params) p.params.emplace_back(std::move(lv));
  return p;
}

inline GroundAtom atom(std::string name, std::vector<std::string> args = {}) {
  GroundAtom a{std::move(name), {}};
  for (auto& c : args) a.args.emplace_back(std::move(c));
  return a;
}

inline std::vector<Constant> constants(const std::string& prefix, std::size_t n) {
  std::vector<Constant> out;
  for (std::size_t i = 1; i <= n; ++i) out.emplace_back(prefix + std::to_string(i));
  return out;
}

inline Eigen::ArrayXd random_table(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::ArrayXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = u(rng);
  return v;
}

struct GexTables {
  Eigen::ArrayXd g0, g1, g2;

  static GexTables random(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return {random_table(2, rng), random_table(8, rng), random_table(8, rng)};
  }
};

/// g0(Epid), g1(Epid, Sick(X), Travel(X)), g2(Epid, Sick(X), Treat(X,T))
/// with Cartesian constraints over x1..x<nx> and t1..t<nt>.
inline ParameterisedModel gex(std::size_t nx, std::size_t nt, const GexTables& t) {
  Domains d{{Logvar("X"), constants("x", nx)}, {Logvar("T"), constants("t", nt)}};
  std::vector<Parfactor> pfs;
  pfs.emplace_back("g0", PotentialTable({prv("Epid")}, t.g0), Constraint::extensional({}, {Tuple{}}));
  pfs.emplace_back("g1", PotentialTable({prv("Epid"), prv("Sick", {"X"}), prv("Travel", {"X"})}, t.g1),
                   cartesian_constraint({Logvar("X")}, d));
  pfs.emplace_back("g2", PotentialTable({prv("Epid"), prv("Sick", {"X"}), prv("Treat", {"X", "T"})}, t.g2),
                   cartesian_constraint({Logvar("X"), Logvar("T")}, d));
  return ParameterisedModel(std::move(pfs));
}

/// Exhaustive enumeration of the full joint of gr(m). Only for models with
/// a handful of ground randvars.
inline MarginalDistribution brute_force(const ParameterisedModel& m, const QuerySpec& q) {
  std::map<GroundAtom, std::size_t> ids;
  std::vector<std::size_t> cards;
  struct Inst {
    const Parfactor* p;
    std::vector<std::size_t> vars;
  };
  std::vector<Inst> insts;
  for (const auto& p : m.parfactors()) {
    for (const auto& atoms : ground(p)) {
      Inst inst{&p, {}};
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        auto [it, inserted] = ids.emplace(atoms[i], cards.size());
        if (inserted) cards.push_back(p.args()[i].range.size());
        inst.vars.push_back(it->second);
      }
      insts.push_back(std::move(inst));
    }
  }
  MarginalDistribution out;
  out.targets = q.targets;
  std::vector<std::size_t> dims;
  for (const auto& t : q.targets) {
    out.ranges.push_back(m.signatures().at(t.name).range);
    dims.push_back(out.ranges.back().size());
  }
  TableIndexer joint(dims);
  out.probs = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(joint.size()));

  std::vector<std::pair<std::size_t, std::size_t>> observed;
  for (const auto& [a, v] : q.evidence.values())
    observed.emplace_back(ids.at(a), *m.signatures().at(a.name).range.index_of(v));

  std::vector<std::size_t> x(cards.size(), 0);
  std::vector<std::size_t> local, tv(q.targets.size());
  while (true) {
    bool ok = true;
    for (const auto& [v, val] : observed) ok = ok && x[v] == val;
    if (ok) {
      double w = 1.0;
      for (const auto& inst : insts) {
        local.clear();
        for (auto v : inst.vars) local.push_back(x[v]);
        w *= inst.p->table().at(local);
      }
      for (std::size_t i = 0; i < q.targets.size(); ++i) tv[i] = x[ids.at(q.targets[i])];
      out.probs[static_cast<Eigen::Index>(joint.encode(tv))] += w;
    }
    std::size_t i = 0;
    while (i < x.size() && ++x[i] == cards[i]) x[i++] = 0;
    if (i == x.size()) break;
  }
  out.probs /= out.probs.sum();
  return out;
}

// Beta-binomial pmf over k = 0..n without lgamma: pmf(0) as a finite
// product, then pmf(k+1)/pmf(k) = (n-k)(k+a) / ((k+1)(n-k-1+b)).
inline std::vector<double> pmf_by_recurrence(std::size_t n, double a, double b) {
  std::vector<double> p(n + 1);
  double p0 = 1.0;
  for (std::size_t i = 0; i < n; ++i) p0 *= (b + static_cast<double>(i)) / (a + b + static_cast<double>(i));
  p[0] = p0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dk = static_cast<double>(k), dn = static_cast<double>(n);
    p[k + 1] = p[k] * (dn - dk) * (dk + a) / ((dk + 1.0) * (dn - dk - 1.0 + b));
  }
  return p;
}

inline double max_abs_diff(const MarginalDistribution& a, const MarginalDistribution& b) {
  return (a.probs - b.probs).abs().maxCoeff();
}

}  // namespace liftu::testing
