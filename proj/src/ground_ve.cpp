#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "liftu/lve.hpp"

namespace liftu {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Dense factor over distinct ground variables, log-space.
struct GroundFactor {
  std::vector<std::size_t> vars;
  TableIndexer index;
  Eigen::ArrayXd log_values;
};

class VariableTable {
 public:
  std::size_t id(const GroundAtom& atom, std::size_t card) {
    auto [it, inserted] = ids_.emplace(atom, cards_.size());
    if (inserted) cards_.push_back(card);
    return it->second;
  }
  std::optional<std::size_t> find(const GroundAtom& atom) const {
    auto it = ids_.find(atom);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t card(std::size_t v) const { return cards_[v]; }
  std::size_t size() const { return cards_.size(); }

 private:
  std::map<GroundAtom, std::size_t> ids_;
  std::vector<std::size_t> cards_;
};

GroundFactor make_factor(std::vector<std::size_t> vars, const VariableTable& table) {
  std::vector<std::size_t> dims;
  for (auto v : vars) dims.push_back(table.card(v));
  GroundFactor f{std::move(vars), TableIndexer(dims), {}};
  f.log_values = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(f.index.size()));
  return f;
}

// Ground factor for one constraint tuple; repeated atoms read the table
// diagonal.
GroundFactor ground_instance(const Parfactor& p, const std::vector<GroundAtom>& atoms, VariableTable& table) {
  std::vector<std::size_t> arg_vars;
  std::vector<std::size_t> distinct;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    auto v = table.id(atoms[i], p.args()[i].range.size());
    arg_vars.push_back(v);
    if (std::find(distinct.begin(), distinct.end(), v) == distinct.end()) distinct.push_back(v);
  }
  GroundFactor f = make_factor(distinct, table);
  const auto& src = p.table();
  std::vector<std::size_t> full(atoms.size());
  for (std::size_t k = 0; k < f.index.size(); ++k) {
    auto a = f.index.decode(k);
    for (std::size_t i = 0; i < atoms.size(); ++i)
      full[i] = a[static_cast<std::size_t>(std::find(distinct.begin(), distinct.end(), arg_vars[i]) - distinct.begin())];
    f.log_values[static_cast<Eigen::Index>(k)] = std::log(src.at(full));
  }
  return f;
}

GroundFactor multiply(const GroundFactor& a, const GroundFactor& b, const VariableTable& table) {
  std::vector<std::size_t> vars = a.vars;
  for (auto v : b.vars)
    if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
  GroundFactor out = make_factor(vars, table);
  std::vector<std::size_t> pos_b;
  for (auto v : b.vars)
    pos_b.push_back(static_cast<std::size_t>(std::find(vars.begin(), vars.end(), v) - vars.begin()));
  std::vector<std::size_t> ab(b.vars.size());
  for (std::size_t k = 0; k < out.index.size(); ++k) {
    auto x = out.index.decode(k);
    for (std::size_t i = 0; i < ab.size(); ++i) ab[i] = x[pos_b[i]];
    out.log_values[static_cast<Eigen::Index>(k)] =
        a.log_values[static_cast<Eigen::Index>(a.index.encode(std::span<const std::size_t>(x.data(), a.vars.size())))] +
        b.log_values[static_cast<Eigen::Index>(b.index.encode(ab))];
  }
  return out;
}

GroundFactor sum_out(const GroundFactor& f, std::size_t var, const VariableTable& table) {
  const auto pos = static_cast<std::size_t>(std::find(f.vars.begin(), f.vars.end(), var) - f.vars.begin());
  std::vector<std::size_t> vars;
  for (auto v : f.vars)
    if (v != var) vars.push_back(v);
  GroundFactor out = make_factor(vars, table);
  out.log_values.setConstant(kNegInf);
  for (std::size_t k = 0; k < f.index.size(); ++k) {
    auto x = f.index.decode(k);
    x.erase(x.begin() + static_cast<std::ptrdiff_t>(pos));
    auto& acc = out.log_values[static_cast<Eigen::Index>(out.index.encode(x))];
    const double v = f.log_values[static_cast<Eigen::Index>(k)];
    if (v == kNegInf) continue;
    acc = acc == kNegInf ? v : std::max(acc, v) + std::log1p(std::exp(-std::abs(acc - v)));
  }
  return out;
}

GroundFactor reduce(const GroundFactor& f, std::size_t var, std::size_t value, const VariableTable& table) {
  const auto pos = static_cast<std::size_t>(std::find(f.vars.begin(), f.vars.end(), var) - f.vars.begin());
  std::vector<std::size_t> vars;
  for (auto v : f.vars)
    if (v != var) vars.push_back(v);
  GroundFactor out = make_factor(vars, table);
  for (std::size_t k = 0; k < out.index.size(); ++k) {
    auto x = out.index.decode(k);
    x.insert(x.begin() + static_cast<std::ptrdiff_t>(pos), value);
    out.log_values[static_cast<Eigen::Index>(k)] = f.log_values[static_cast<Eigen::Index>(f.index.encode(x))];
  }
  return out;
}

}  // namespace

MarginalDistribution ground_ve(const ParameterisedModel& m, const QuerySpec& q) {
  check_query(m, q);

  VariableTable table;
  std::vector<std::optional<GroundFactor>> factors;
  for (const auto& p : m.parfactors())
    for (const auto& atoms : ground(p)) factors.emplace_back(ground_instance(p, atoms, table));

  std::vector<std::size_t> targets;
  for (const auto& t : q.targets) targets.push_back(*table.find(t));
  const std::set<std::size_t> target_set(targets.begin(), targets.end());

  for (const auto& [atom, value] : q.evidence.values()) {
    const auto var = *table.find(atom);
    if (target_set.count(var)) continue;
    const auto observed = *m.signatures().at(atom.name).range.index_of(value);
    for (auto& f : factors)
      if (f && std::find(f->vars.begin(), f->vars.end(), var) != f->vars.end()) f = reduce(*f, var, observed, table);
  }

  std::vector<std::set<std::size_t>> adjacency(table.size());
  for (std::size_t i = 0; i < factors.size(); ++i)
    for (auto v : factors[i]->vars) adjacency[v].insert(i);

  // Greedy min-weight order: the variable whose neighbourhood table is the
  // smallest goes first, ties by variable id.
  auto weight = [&](std::size_t v) {
    std::set<std::size_t> scope;
    for (auto fi : adjacency[v])
      for (auto u : factors[fi]->vars) scope.insert(u);
    double w = 1.0;
    for (auto u : scope) w = std::min(w * static_cast<double>(table.card(u)), 1e300);
    return w;
  };
  std::set<std::pair<double, std::size_t>> queue;
  std::vector<double> current(table.size(), 0.0);
  for (std::size_t v = 0; v < table.size(); ++v) {
    if (target_set.count(v) || adjacency[v].empty()) continue;
    current[v] = weight(v);
    queue.emplace(current[v], v);
  }

  while (!queue.empty()) {
    const auto var = queue.begin()->second;
    queue.erase(queue.begin());
    std::optional<GroundFactor> product;
    std::set<std::size_t> touched;
    for (auto fi : adjacency[var]) {
      product = product ? multiply(*product, *factors[fi], table) : *factors[fi];
      for (auto u : factors[fi]->vars) {
        touched.insert(u);
        if (u != var) adjacency[u].erase(fi);
      }
      factors[fi].reset();
    }
    adjacency[var].clear();
    if (!product) continue;
    factors.emplace_back(sum_out(*product, var, table));
    const std::size_t id = factors.size() - 1;
    for (auto u : factors[id]->vars) adjacency[u].insert(id);
    for (auto u : touched) {
      if (u == var || target_set.count(u)) continue;
      queue.erase({current[u], u});
      current[u] = weight(u);
      queue.emplace(current[u], u);
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
  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(joint.size()));
  for (const auto& f : factors) {
    if (!f) continue;
    std::vector<std::size_t> pos;
    for (auto v : f->vars)
      pos.push_back(static_cast<std::size_t>(std::find(targets.begin(), targets.end(), v) - targets.begin()));
    std::vector<std::size_t> local(pos.size());
    for (std::size_t k = 0; k < joint.size(); ++k) {
      auto a = joint.decode(k);
      for (std::size_t i = 0; i < pos.size(); ++i) local[i] = a[pos[i]];
      acc[static_cast<Eigen::Index>(k)] += f->log_values[static_cast<Eigen::Index>(f->index.encode(local))];
    }
  }
  for (std::size_t i = 0; i < q.targets.size(); ++i) {
    const auto* v = q.evidence.find(q.targets[i]);
    if (!v) continue;
    const auto observed = *out.ranges[i].index_of(*v);
    for (std::size_t k = 0; k < joint.size(); ++k)
      if (joint.decode(k)[i] != observed) acc[static_cast<Eigen::Index>(k)] = kNegInf;
  }
  const double mx = acc.maxCoeff();
  if (mx == kNegInf || std::isnan(mx)) throw InferenceError("inconsistent evidence");
  Eigen::ArrayXd p = (acc - mx).exp();
  out.probs = p / p.sum();
  return out;
}

}  // namespace liftu
