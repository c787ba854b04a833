#include "liftu/domains.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

namespace liftu {

std::size_t DomainWorld::size(const Logvar& lv) const {
  auto it = domains.find(lv);
  return it == domains.end() ? 0 : it->second.size();
}

std::vector<std::size_t> DomainWorld::size_key() const {
  std::vector<std::size_t> key;
  if (varying.empty()) {
    for (const auto& [lv, dom] : domains) key.push_back(dom.size());
  } else {
    for (const auto& lv : varying) key.push_back(size(lv));
  }
  return key;
}

namespace {

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

void check_params(std::size_t k, std::size_t n, double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
    throw DomainError("beta-binomial needs alpha > 0 and beta > 0");
  if (k > n) throw DomainError("beta-binomial k exceeds n");
}

}  // namespace

double beta_binomial_log_pmf(std::size_t k, std::size_t n, double alpha, double beta) {
  check_params(k, n, alpha, beta);
  const double dk = static_cast<double>(k);
  const double dn = static_cast<double>(n);
  const double log_choose = std::lgamma(dn + 1.0) - std::lgamma(dk + 1.0) - std::lgamma(dn - dk + 1.0);
  return log_choose + log_beta(dk + alpha, dn - dk + beta) - log_beta(alpha, beta);
}

double beta_binomial_pmf(std::size_t k, std::size_t n, double alpha, double beta) {
  return std::exp(beta_binomial_log_pmf(k, n, alpha, beta));
}

std::vector<Constant> synthetic_domain(std::size_t size, std::span<const Constant> guaranteed,
                                       const std::string& prefix) {
  if (guaranteed.size() > size)
    throw DomainError("domain of size " + std::to_string(size) + " cannot hold " +
                      std::to_string(guaranteed.size()) + " guaranteed constants");
  std::vector<Constant> out(guaranteed.begin(), guaranteed.end());
  for (std::size_t i = guaranteed.size() + 1; i <= size; ++i) out.emplace_back(prefix + std::to_string(i));
  return out;
}

namespace {

struct Option {
  std::vector<Constant> constants;
  double prob;
};

std::string default_prefix(const Logvar& lv, const std::string& prefix) {
  if (!prefix.empty()) return prefix;
  std::string out = lv.name;
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

void check_distinct(const Logvar& lv, const std::vector<Constant>& dom) {
  if (dom.empty()) throw DomainError("empty domain for logvar " + lv.name);
  std::set<Constant> seen(dom.begin(), dom.end());
  if (seen.size() != dom.size()) throw DomainError("duplicate constants in the domain of " + lv.name);
}

struct OptionsFor {
  const Logvar& lv;

  std::vector<Option> operator()(const FixedDomain& d) const {
    check_distinct(lv, d.constants);
    return {{d.constants, 1.0}};
  }

  std::vector<Option> operator()(const EnumeratedDomain& d) const {
    if (d.worlds.empty()) throw DomainError("no enumerated worlds for logvar " + lv.name);
    const bool weighted = d.worlds.front().prob.has_value();
    double total = 0.0;
    std::vector<Option> out;
    for (const auto& w : d.worlds) {
      if (w.prob.has_value() != weighted)
        throw DomainError("enumerated worlds of " + lv.name + " must all or none carry probabilities");
      std::vector<Constant> dom;
      if (w.size) {
        dom = synthetic_domain(*w.size, d.guaranteed, default_prefix(lv, d.prefix));
      } else {
        dom = d.guaranteed;
        for (const auto& c : w.constants)
          if (std::find(dom.begin(), dom.end(), c) == dom.end()) dom.push_back(c);
      }
      check_distinct(lv, dom);
      const double p = weighted ? *w.prob : 1.0 / static_cast<double>(d.worlds.size());
      if (!(p >= 0.0 && p <= 1.0)) throw DomainError("world probability out of [0,1] for " + lv.name);
      total += p;
      out.push_back({std::move(dom), p});
    }
    if (std::abs(total - 1.0) > 1e-9) throw DomainError("enumerated world probabilities of " + lv.name + " do not sum to 1");
    std::stable_sort(out.begin(), out.end(),
                     [](const Option& a, const Option& b) { return a.constants.size() < b.constants.size(); });
    return out;
  }

  std::vector<Option> operator()(const BetaBinomialDomain& d) const {
    if (d.bins < 1) throw DomainError("beta-binomial bins must be >= 1 for " + lv.name);
    if (d.step < 1) throw DomainError("beta-binomial step must be >= 1 for " + lv.name);
    std::vector<Option> out;
    for (std::size_t k = 1; k <= d.bins; ++k)
      out.push_back({synthetic_domain(d.step * k, d.guaranteed, default_prefix(lv, d.prefix)),
                     beta_binomial_pmf(k, d.bins, d.alpha, d.beta)});
    return out;
  }
};

}  // namespace

std::vector<DomainWorld> enumerate_worlds(const DomainSpec& spec, std::span<const Logvar> logvars) {
  std::set<Logvar> needed(logvars.begin(), logvars.end());
  std::vector<Logvar> order;
  std::vector<std::vector<Option>> options;
  std::vector<Logvar> varying;
  for (const auto& lv : needed) {
    auto it = spec.logvars.find(lv);
    if (it == spec.logvars.end()) throw DomainError("missing domain for logvar " + lv.name);
    order.push_back(lv);
    options.push_back(std::visit(OptionsFor{lv}, it->second));
    if (!std::holds_alternative<FixedDomain>(it->second)) varying.push_back(lv);
  }

  std::vector<DomainWorld> worlds;
  std::vector<std::size_t> pick(order.size(), 0);
  while (true) {
    DomainWorld w;
    w.id = worlds.size();
    w.varying = varying;
    for (std::size_t i = 0; i < order.size(); ++i) {
      w.domains[order[i]] = options[i][pick[i]].constants;
      w.prob *= options[i][pick[i]].prob;
    }
    worlds.push_back(std::move(w));
    std::size_t i = order.size();
    while (i > 0) {
      --i;
      if (++pick[i] < options[i].size()) break;
      pick[i] = 0;
      if (i == 0) return worlds;
    }
    if (order.empty()) return worlds;
  }
}

std::vector<DomainWorld> enumerate_worlds(const DomainSpec& spec, const TemplateModel& tmpl) {
  auto lvs = tmpl.logvars();
  return enumerate_worlds(spec, lvs);
}

void WorldFilter::validate() const {
  if (!(threshold >= 0.0 && threshold < 1.0)) throw DomainError("threshold must lie in [0, 1)");
  if (cascade_threshold && !(*cascade_threshold >= 0.0 && *cascade_threshold < 1.0))
    throw DomainError("cascade threshold must lie in [0, 1)");
}

}  // namespace liftu
