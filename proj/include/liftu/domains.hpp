#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "liftu/model.hpp"

namespace liftu {

/// One domain per logvar plus the world's probability.
struct DomainWorld {
  std::size_t id = 0;
  Domains domains;
  double prob = 1.0;
  // Logvars whose domain varies across worlds (distribution-bearing specs).
  std::vector<Logvar> varying;

  std::size_t size(const Logvar& lv) const;
  /// Sizes of the varying logvars, in logvar order; all logvars if none vary.
  std::vector<std::size_t> size_key() const;
};

struct FixedDomain {
  std::vector<Constant> constants;
};

struct EnumeratedDomain {
  struct Entry {
    // Either a size (synthetic constants) or an explicit constant list.
    std::optional<std::size_t> size;
    std::vector<Constant> constants;
    std::optional<double> prob;
  };
  std::vector<Entry> worlds;
  std::vector<Constant> guaranteed;
  std::string prefix;
};

/// Domain sizes step*k for k = 1..bins, weighted by the beta-binomial pmf
/// over 0..bins. The k = 0 mass is dropped, not redistributed.
struct BetaBinomialDomain {
  double alpha = 1.0;
  double beta = 1.0;
  std::size_t bins = 1;
  std::size_t step = 1;
  std::vector<Constant> guaranteed;
  std::string prefix;
};

using LogvarDomainSpec = std::variant<FixedDomain, EnumeratedDomain, BetaBinomialDomain>;

struct DomainSpec {
  std::map<Logvar, LogvarDomainSpec> logvars;
};

double beta_binomial_pmf(std::size_t k, std::size_t n, double alpha, double beta);
double beta_binomial_log_pmf(std::size_t k, std::size_t n, double alpha, double beta);

/// Guaranteed constants first, then <prefix><i> for the remaining
/// positions i (1-based).
std::vector<Constant> synthetic_domain(std::size_t size, std::span<const Constant> guaranteed,
                                       const std::string& prefix);

/// Independent product of the per-logvar options, ordered by domain size
/// ascending (lexicographic over logvars in name order).
std::vector<DomainWorld> enumerate_worlds(const DomainSpec& spec, std::span<const Logvar> logvars);
std::vector<DomainWorld> enumerate_worlds(const DomainSpec& spec, const TemplateModel& tmpl);

struct WorldFilter {
  double threshold = 0.0;
  bool cascade = false;
  // Threshold for the combined weights when cascading; defaults to threshold.
  std::optional<double> cascade_threshold;

  double combined_threshold() const { return cascade_threshold.value_or(threshold); }
  void validate() const;
};

template <class T>
struct Filtered {
  std::vector<T> kept;
  double retained_mass = 0.0;
  std::size_t dropped = 0;
};

/// Keeps items whose probability exceeds `threshold`, preserving order and
/// probabilities. No renormalisation.
template <class T, class Prob>
Filtered<T> filter_worlds(std::vector<T> items, double threshold, Prob prob) {
  Filtered<T> out;
  for (auto& item : items) {
    const double p = prob(item);
    if (p > threshold) {
      out.retained_mass += p;
      out.kept.push_back(std::move(item));
    } else {
      ++out.dropped;
    }
  }
  return out;
}

template <class T>
Filtered<T> filter_worlds(std::vector<T> items, double threshold) {
  return filter_worlds(std::move(items), threshold, [](const T& t) { return t.prob; });
}

}  // namespace liftu
