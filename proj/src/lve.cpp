#include "liftu/lve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace liftu {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool same_prv(const Prv& a, const Prv& b) { return a.name == b.name && a.params == b.params; }

std::vector<std::size_t> positions(const Constraint& c, std::span<const Logvar> lvs) {
  std::vector<std::size_t> pos;
  pos.reserve(lvs.size());
  for (const auto& lv : lvs) {
    auto p = c.position(lv);
    if (!p) throw ModelError("logvar " + lv.name + " is not in the constraint");
    pos.push_back(*p);
  }
  return pos;
}

Tuple restrict(const Tuple& t, const std::vector<std::size_t>& pos) {
  Tuple out;
  out.reserve(pos.size());
  for (auto p : pos) out.push_back(t[p]);
  return out;
}

std::vector<Logvar> unique_params(const Prv& a) {
  std::vector<Logvar> out;
  for (const auto& lv : a.params)
    if (std::find(out.begin(), out.end(), lv) == out.end()) out.push_back(lv);
  return out;
}

// Logvars of c that occur in `args`, in constraint order.
std::vector<Logvar> covered_logvars(const Constraint& c, std::span<const Prv> args) {
  auto used = logvars_of(args);
  std::vector<Logvar> out;
  for (const auto& lv : c.logvars())
    if (std::find(used.begin(), used.end(), lv) != used.end()) out.push_back(lv);
  return out;
}

std::vector<Logvar> complement(const std::vector<Logvar>& all, const std::vector<Logvar>& keep) {
  std::vector<Logvar> out;
  for (const auto& lv : all)
    if (std::find(keep.begin(), keep.end(), lv) == keep.end()) out.push_back(lv);
  return out;
}

void require_extensional(const LogParfactor& g) {
  if (!g.constraint.is_extensional())
    throw ModelError("constraint not grounded (parfactor " + g.name + ")");
}

// Drops arguments whose values are fixed in `fixed` (nullopt keeps the
// argument) and scales by the count of instances merged by the projection.
LogParfactor restrict_args(const LogParfactor& g, const std::vector<std::optional<std::size_t>>& fixed) {
  std::vector<Prv> kept;
  for (std::size_t i = 0; i < g.args.size(); ++i)
    if (!fixed[i]) kept.push_back(g.args[i]);
  auto keep_lvs = covered_logvars(g.constraint, kept);
  auto eliminated = complement(g.constraint.logvars(), keep_lvs);
  const std::size_t n = conditional_count(g.constraint, eliminated);

  TableIndexer out_idx(range_sizes(kept));
  TableIndexer in_idx = g.indexer();
  Eigen::ArrayXd values(static_cast<Eigen::Index>(out_idx.size()));
  std::vector<std::size_t> full(g.args.size());
  for (std::size_t k = 0; k < out_idx.size(); ++k) {
    auto sub = out_idx.decode(k);
    for (std::size_t i = 0, j = 0; i < g.args.size(); ++i) full[i] = fixed[i] ? *fixed[i] : sub[j++];
    values[static_cast<Eigen::Index>(k)] = g.log_values[static_cast<Eigen::Index>(in_idx.encode(full))];
  }
  LogParfactor out;
  out.name = g.name;
  out.args = std::move(kept);
  out.constraint = project(g.constraint, keep_lvs);
  out.log_values = values * static_cast<double>(n);
  return out;
}

}  // namespace

// --- value types -----------------------------------------------------------

void Evidence::add(GroundAtom atom, std::string value) {
  auto [it, inserted] = values_.emplace(std::move(atom), value);
  if (!inserted && it->second != value)
    throw QueryError("contradictory evidence for " + it->first.to_string());
}

const std::string* Evidence::find(const GroundAtom& atom) const {
  auto it = values_.find(atom);
  return it == values_.end() ? nullptr : &it->second;
}

double MarginalDistribution::probability(const GroundAtom& atom, std::string_view value) const {
  auto it = std::find(targets.begin(), targets.end(), atom);
  if (it == targets.end()) throw QueryError(atom.to_string() + " is not a query target");
  const auto pos = static_cast<std::size_t>(it - targets.begin());
  auto v = ranges[pos].index_of(value);
  if (!v) throw QueryError("value " + std::string(value) + " not in range of " + atom.to_string());
  std::vector<std::size_t> dims;
  for (const auto& r : ranges) dims.push_back(r.size());
  TableIndexer idx(dims);
  double p = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k)
    if (idx.decode(k)[pos] == *v) p += probs[static_cast<Eigen::Index>(k)];
  return p;
}

LogParfactor LogParfactor::from(const Parfactor& p) {
  return LogParfactor{p.name(), p.args(), p.constraint(), p.table().values().log()};
}

Parfactor LogParfactor::to_linear() const {
  return Parfactor(name, PotentialTable(args, log_values.exp()), constraint);
}

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Split: return "split";
    case OpKind::Absorb: return "absorb";
    case OpKind::Multiply: return "multiply";
    case OpKind::SumOut: return "sum-out";
    case OpKind::Ground: return "ground";
  }
  return "?";
}

std::size_t OpLog::count(OpKind kind) const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(),
                                                [&](const OpRecord& r) { return r.kind == kind; }));
}

std::vector<GroundAtom> groundings(const LogParfactor& g, std::size_t arg) {
  require_extensional(g);
  std::vector<GroundAtom> out;
  out.reserve(g.constraint.size());
  for (const auto& t : g.constraint.tuples())
    out.push_back(instantiate(g.args.at(arg), g.constraint.logvars(), t));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// --- multiply --------------------------------------------------------------

LogParfactor lift_multiply(const LogParfactor& g1, const LogParfactor& g2) {
  require_extensional(g1);
  require_extensional(g2);
  const auto& c1 = g1.constraint;
  const auto& c2 = g2.constraint;

  std::vector<Logvar> shared;
  for (const auto& lv : c1.logvars())
    if (c2.position(lv)) shared.push_back(lv);
  if (!(project(c1, shared) == project(c2, shared)))
    throw LiftingError("constraints misaligned: " + g1.name + " and " + g2.name);

  auto extra2 = complement(c2.logvars(), shared);
  auto logvars = c1.logvars();
  logvars.insert(logvars.end(), extra2.begin(), extra2.end());

  const auto pos1 = positions(c1, shared);
  const auto pos2 = positions(c2, shared);
  const auto pos2x = positions(c2, extra2);
  std::map<Tuple, std::vector<Tuple>> by_key;
  for (const auto& t : c2.tuples()) by_key[restrict(t, pos2)].push_back(restrict(t, pos2x));
  std::vector<Tuple> joined;
  for (const auto& t : c1.tuples()) {
    for (const auto& ext : by_key[restrict(t, pos1)]) {
      Tuple j = t;
      j.insert(j.end(), ext.begin(), ext.end());
      joined.push_back(std::move(j));
    }
  }
  auto join = Constraint::extensional(logvars, std::move(joined));

  std::size_t n1 = 0, n2 = 0;
  try {
    n1 = conditional_count(join, complement(logvars, c1.logvars()));
    n2 = conditional_count(join, complement(logvars, c2.logvars()));
  } catch (const LiftingError&) {
    throw LiftingError("constraints misaligned: " + g1.name + " and " + g2.name);
  }

  std::vector<Prv> args = g1.args;
  std::vector<std::size_t> map2;
  for (const auto& a : g2.args) {
    auto it = std::find_if(args.begin(), args.end(), [&](const Prv& b) { return same_prv(a, b); });
    if (it == args.end()) {
      map2.push_back(args.size());
      args.push_back(a);
    } else {
      if (!(it->range == a.range)) throw ModelError("range mismatch for " + a.to_string());
      map2.push_back(static_cast<std::size_t>(it - args.begin()));
    }
  }

  TableIndexer idx(range_sizes(args));
  const TableIndexer idx1 = g1.indexer();
  const TableIndexer idx2 = g2.indexer();
  const double w1 = 1.0 / static_cast<double>(n1);
  const double w2 = 1.0 / static_cast<double>(n2);
  Eigen::ArrayXd values(static_cast<Eigen::Index>(idx.size()));
  std::vector<std::size_t> a2(g2.args.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto a = idx.decode(k);
    for (std::size_t i = 0; i < a2.size(); ++i) a2[i] = a[map2[i]];
    const double l1 = g1.log_values[static_cast<Eigen::Index>(
        idx1.encode(std::span<const std::size_t>(a.data(), g1.args.size())))];
    const double l2 = g2.log_values[static_cast<Eigen::Index>(idx2.encode(a2))];
    values[static_cast<Eigen::Index>(k)] = l1 * w1 + l2 * w2;
  }
  return LogParfactor{g1.name + "*" + g2.name, std::move(args), std::move(join), std::move(values)};
}

Parfactor lift_multiply(const Parfactor& g1, const Parfactor& g2) {
  return lift_multiply(LogParfactor::from(g1), LogParfactor::from(g2)).to_linear();
}

// --- sum-out ---------------------------------------------------------------

SumOutResult lift_sum_out(const LogParfactor& g, const Prv& a) {
  require_extensional(g);
  auto it = std::find_if(g.args.begin(), g.args.end(), [&](const Prv& b) { return same_prv(a, b); });
  if (it == g.args.end()) throw LiftingError(a.to_string() + " is not an argument of " + g.name);
  const auto pos = static_cast<std::size_t>(it - g.args.begin());

  const auto atoms = groundings(g, pos);
  for (std::size_t i = 0; i < g.args.size(); ++i) {
    if (i == pos || g.args[i].name != a.name) continue;
    auto other = groundings(g, i);
    std::vector<GroundAtom> common;
    std::set_intersection(atoms.begin(), atoms.end(), other.begin(), other.end(), std::back_inserter(common));
    if (!common.empty()) throw LiftingError("shatter first: " + a.to_string() + " repeats in " + g.name);
  }
  if (project(g.constraint, unique_params(a)).size() != g.constraint.size())
    throw LiftingError("instances of " + a.to_string() + " occur in several ground factors of " + g.name);

  std::vector<Prv> rest;
  for (std::size_t i = 0; i < g.args.size(); ++i)
    if (i != pos) rest.push_back(g.args[i]);
  auto keep_lvs = covered_logvars(g.constraint, rest);
  auto eliminated = complement(g.constraint.logvars(), keep_lvs);
  const std::size_t n = conditional_count(g.constraint, eliminated);

  TableIndexer out_idx(range_sizes(rest));
  const TableIndexer in_idx = g.indexer();
  const std::size_t card = g.args[pos].range.size();
  Eigen::ArrayXd values(static_cast<Eigen::Index>(out_idx.size()));
  std::vector<std::size_t> full(g.args.size());
  std::vector<double> terms(card);
  for (std::size_t k = 0; k < out_idx.size(); ++k) {
    auto sub = out_idx.decode(k);
    for (std::size_t i = 0, j = 0; i < g.args.size(); ++i)
      if (i != pos) full[i] = sub[j++];
    double mx = kNegInf;
    for (std::size_t v = 0; v < card; ++v) {
      full[pos] = v;
      terms[v] = g.log_values[static_cast<Eigen::Index>(in_idx.encode(full))];
      mx = std::max(mx, terms[v]);
    }
    double lse = mx;
    if (mx != kNegInf) {
      double s = 0.0;
      for (double t : terms) s += std::exp(t - mx);
      lse = mx + std::log(s);
    }
    values[static_cast<Eigen::Index>(k)] = lse * static_cast<double>(n);
  }

  LogParfactor out{g.name, std::move(rest), project(g.constraint, keep_lvs), std::move(values)};
  return {std::move(out), n};
}

Parfactor lift_sum_out(const Parfactor& g, const Prv& a) {
  return lift_sum_out(LogParfactor::from(g), a).factor.to_linear();
}

// --- split / absorb --------------------------------------------------------

std::pair<std::optional<LogParfactor>, std::optional<LogParfactor>> split_where(
    const LogParfactor& g, const std::function<bool(const Tuple&)>& keep) {
  require_extensional(g);
  std::vector<Tuple> in, out;
  for (const auto& t : g.constraint.tuples()) (keep(t) ? in : out).push_back(t);
  auto part = [&](std::vector<Tuple> tuples) -> std::optional<LogParfactor> {
    if (tuples.empty()) return std::nullopt;
    return LogParfactor{g.name, g.args, Constraint::extensional(g.constraint.logvars(), std::move(tuples)),
                        g.log_values};
  };
  return {part(std::move(in)), part(std::move(out))};
}

std::pair<std::optional<LogParfactor>, std::optional<LogParfactor>> split(
    const LogParfactor& g, const Logvar& x, const std::set<Constant>& constants) {
  require_extensional(g);
  auto p = g.constraint.position(x);
  if (!p) throw ModelError("logvar " + x.name + " is not in the constraint of " + g.name);
  return split_where(g, [&](const Tuple& t) { return constants.count(t[*p]) > 0; });
}

std::pair<std::optional<Parfactor>, std::optional<Parfactor>> split(const Parfactor& g, const Logvar& x,
                                                                    const std::set<Constant>& constants) {
  auto [in, out] = split(LogParfactor::from(g), x, constants);
  std::optional<Parfactor> a, b;
  if (in) a = g.constraint() == in->constraint ? g : Parfactor(g.name(), g.table(), in->constraint);
  if (out) b = g.constraint() == out->constraint ? g : Parfactor(g.name(), g.table(), out->constraint);
  return {std::move(a), std::move(b)};
}

LogParfactor absorb(const LogParfactor& g, const Evidence& ev) {
  require_extensional(g);
  if (ev.empty()) return g;
  std::vector<std::optional<std::size_t>> fixed(g.args.size());
  bool any = false;
  for (std::size_t i = 0; i < g.args.size(); ++i) {
    const auto atoms = groundings(g, i);
    std::size_t observed = 0;
    const std::string* value = nullptr;
    for (const auto& atom : atoms) {
      const auto* v = ev.find(atom);
      if (!v) continue;
      if (value && *value != *v) throw LiftingError("shatter first: mixed observations for " + g.args[i].to_string());
      value = v;
      ++observed;
    }
    if (observed == 0) continue;
    if (observed != atoms.size())
      throw LiftingError("shatter first: " + g.args[i].to_string() + " is only partly observed in " + g.name);
    auto idx = g.args[i].range.index_of(*value);
    if (!idx) throw QueryError("value " + *value + " not in range of " + g.args[i].name);
    fixed[i] = *idx;
    any = true;
  }
  if (!any) return g;
  return restrict_args(g, fixed);
}

Parfactor absorb(const Parfactor& g, const Evidence& ev) {
  auto out = absorb(LogParfactor::from(g), ev);
  if (out.args.size() == g.args().size()) return g;
  return out.to_linear();
}

// --- query validation ------------------------------------------------------

namespace {

bool model_covers(const ParameterisedModel& m, const GroundAtom& atom) {
  for (const auto& p : m.parfactors()) {
    const auto& c = p.constraint();
    for (const auto& a : p.args()) {
      if (a.name != atom.name || a.params.size() != atom.args.size()) continue;
      auto pos = positions(c, a.params);
      for (const auto& t : c.tuples()) {
        bool match = true;
        for (std::size_t k = 0; k < pos.size() && match; ++k) match = t[pos[k]] == atom.args[k];
        if (match) return true;
      }
    }
  }
  return false;
}

const RandvarSignature& signature_for(const ParameterisedModel& m, const GroundAtom& atom) {
  auto it = m.signatures().find(atom.name);
  if (it == m.signatures().end()) throw MissingAtomError("unknown randvar " + atom.name);
  if (it->second.arity != atom.args.size())
    throw QueryError(atom.to_string() + ": " + atom.name + " takes " + std::to_string(it->second.arity) +
                     " arguments");
  return it->second;
}

}  // namespace

void check_query(const ParameterisedModel& m, const QuerySpec& q) {
  if (q.targets.empty()) throw QueryError("query has no targets");
  std::set<GroundAtom> seen;
  for (const auto& t : q.targets) {
    if (!seen.insert(t).second) throw QueryError("duplicate query target " + t.to_string());
    signature_for(m, t);
    if (!model_covers(m, t)) throw MissingAtomError("atom not in model: " + t.to_string());
  }
  for (const auto& [atom, value] : q.evidence.values()) {
    const auto& sig = signature_for(m, atom);
    if (!sig.range.index_of(value))
      throw QueryError("value " + value + " not in range of " + atom.to_string());
    if (!model_covers(m, atom)) throw MissingAtomError("atom not in model: " + atom.to_string());
  }
}

// --- lifted query ----------------------------------------------------------

namespace {

using Factors = std::vector<LogParfactor>;

struct Occurrence {
  std::size_t factor;
  std::size_t arg;
  auto operator<=>(const Occurrence&) const = default;
};

// Splits parfactors until every query or evidence atom is the only
// grounding of each argument that covers it.
void shatter_on_atoms(Factors& fs, const std::set<GroundAtom>& atoms, OpLog& log) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < fs.size() && !changed; ++i) {
      for (std::size_t j = 0; j < fs[i].args.size() && !changed; ++j) {
        const auto& arg = fs[i].args[j];
        for (const auto& atom : atoms) {
          if (atom.name != arg.name || atom.args.size() != arg.params.size()) continue;
          std::vector<std::pair<Logvar, Constant>> required;
          bool consistent = true;
          for (std::size_t k = 0; k < arg.params.size(); ++k) {
            auto it = std::find_if(required.begin(), required.end(),
                                   [&](const auto& r) { return r.first == arg.params[k]; });
            if (it == required.end())
              required.emplace_back(arg.params[k], atom.args[k]);
            else if (it->second != atom.args[k])
              consistent = false;
          }
          if (!consistent) continue;
          const auto& c = fs[i].constraint;
          std::size_t matching = 0;
          for (const auto& t : c.tuples()) {
            bool ok = true;
            for (const auto& [lv, value] : required) ok = ok && t[*c.position(lv)] == value;
            matching += ok;
          }
          if (matching == 0 || matching == c.size()) continue;

          LogParfactor current = fs[i];
          for (const auto& [lv, value] : required) {
            auto [in, out] = split(current, lv, {value});
            if (out) {
              log.add(OpKind::Split, current.name + " on " + lv.name + "=" + value.name);
              fs.push_back(std::move(*out));
            }
            current = std::move(*in);
          }
          fs[i] = std::move(current);
          changed = true;
          break;
        }
      }
    }
  }
}

// Splits parfactors until the groundings of any two arguments are either
// identical or disjoint.
void shatter_overlaps(Factors& fs, OpLog& log) {
  while (true) {
    std::map<GroundAtom, std::vector<Occurrence>> owners;
    for (std::size_t i = 0; i < fs.size(); ++i)
      for (std::size_t j = 0; j < fs[i].args.size(); ++j)
        for (auto& atom : groundings(fs[i], j)) owners[std::move(atom)].push_back({i, j});

    bool changed = false;
    for (std::size_t i = 0; i < fs.size() && !changed; ++i) {
      for (std::size_t j = 0; j < fs[i].args.size() && !changed; ++j) {
        const auto& g = fs[i];
        const auto& tuples = g.constraint.tuples();
        const auto& first = owners[instantiate(g.args[j], g.constraint.logvars(), tuples.front())];
        auto same_owners = [&](const Tuple& t) {
          return owners[instantiate(g.args[j], g.constraint.logvars(), t)] == first;
        };
        auto [in, out] = split_where(g, same_owners);
        if (!out) continue;
        log.add(OpKind::Split, g.name + " on " + g.args[j].to_string());
        fs[i] = std::move(*in);
        fs.push_back(std::move(*out));
        changed = true;
      }
    }
    if (!changed) return;
  }
}

// One parfactor per constraint tuple. Logvars are renamed after the
// constant they carry, so equal ground atoms get equal PRVs; arguments that
// coincide are merged along the table diagonal.
Factors ground_factor(const LogParfactor& g) {
  Factors out;
  const TableIndexer in_idx = g.indexer();
  for (const auto& t : g.constraint.tuples()) {
    std::vector<Logvar> new_lvs;
    Tuple new_tuple;
    auto rename = [&](const Logvar& lv) {
      const auto& c = t[*g.constraint.position(lv)];
      Logvar named("=" + c.name);
      if (std::find(new_lvs.begin(), new_lvs.end(), named) == new_lvs.end()) {
        new_lvs.push_back(named);
        new_tuple.push_back(c);
      }
      return named;
    };
    std::vector<Prv> args;
    std::vector<std::size_t> rep(g.args.size());
    for (std::size_t i = 0; i < g.args.size(); ++i) {
      Prv a = g.args[i];
      for (auto& lv : a.params) lv = rename(lv);
      auto it = std::find_if(args.begin(), args.end(), [&](const Prv& b) { return same_prv(a, b); });
      rep[i] = static_cast<std::size_t>(it - args.begin());
      if (it == args.end()) args.push_back(std::move(a));
    }
    TableIndexer out_idx(range_sizes(args));
    Eigen::ArrayXd values(static_cast<Eigen::Index>(out_idx.size()));
    std::vector<std::size_t> full(g.args.size());
    for (std::size_t k = 0; k < out_idx.size(); ++k) {
      auto sub = out_idx.decode(k);
      for (std::size_t i = 0; i < g.args.size(); ++i) full[i] = sub[rep[i]];
      values[static_cast<Eigen::Index>(k)] = g.log_values[static_cast<Eigen::Index>(in_idx.encode(full))];
    }
    std::string name = g.name + "@";
    for (std::size_t k = 0; k < t.size(); ++k) name += (k ? "," : "") + t[k].name;
    out.push_back(LogParfactor{std::move(name), std::move(args),
                               Constraint::extensional(std::move(new_lvs), {std::move(new_tuple)}),
                               std::move(values)});
  }
  return out;
}

LogParfactor rename_logvars(const LogParfactor& g, const std::map<Logvar, Logvar>& names) {
  auto ren = [&](const Logvar& lv) {
    auto it = names.find(lv);
    return it == names.end() ? lv : it->second;
  };
  LogParfactor out = g;
  for (auto& a : out.args)
    for (auto& lv : a.params) lv = ren(lv);
  std::vector<Logvar> lvs;
  for (const auto& lv : g.constraint.logvars()) lvs.push_back(ren(lv));
  out.constraint = Constraint::extensional(std::move(lvs), g.constraint.tuples());
  return out;
}

// Argument-free parfactors only rescale the joint and are dropped, unless
// they are zero.
void keep_unless_scalar(Factors& fs, LogParfactor g) {
  if (!g.args.empty()) {
    fs.push_back(std::move(g));
    return;
  }
  if (g.log_values[0] == kNegInf) throw InferenceError("inconsistent evidence");
}

struct Elimination {
  LogParfactor result;
  OpLog log;
};

// Multiplies the parfactors holding the class and sums it out. Throws
// LiftingError when a lifted precondition fails.
Elimination eliminate_class(const Factors& fs, const std::vector<Occurrence>& occs, std::size_t& fresh) {
  for (std::size_t k = 1; k < occs.size(); ++k)
    for (std::size_t l = 0; l < k; ++l)
      if (occs[k].factor == occs[l].factor) throw LiftingError("randvar repeats within a parfactor");
  // The product can only be injective if every factor is; checking first
  // avoids building large joins that lift_sum_out would reject.
  for (const auto& o : occs) {
    const auto& g = fs[o.factor];
    if (project(g.constraint, unique_params(g.args[o.arg])).size() != g.constraint.size())
      throw LiftingError("instances of " + g.args[o.arg].to_string() + " occur in several ground factors of " + g.name);
  }

  Elimination e;
  const Prv target = fs[occs[0].factor].args[occs[0].arg];
  LogParfactor product = fs[occs[0].factor];
  for (std::size_t k = 1; k < occs.size(); ++k) {
    const auto& g = fs[occs[k].factor];
    const auto& params = g.args[occs[k].arg].params;
    std::map<Logvar, Logvar> names;
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto [it, inserted] = names.emplace(params[p], target.params[p]);
      if (!inserted && it->second != target.params[p]) throw LiftingError("parameter patterns differ");
    }
    std::set<Logvar> images;
    for (const auto& [from, to] : names)
      if (!images.insert(to).second) throw LiftingError("parameter patterns differ");
    for (const auto& lv : g.constraint.logvars())
      if (!names.count(lv)) names.emplace(lv, Logvar("~" + std::to_string(++fresh)));
    auto renamed = rename_logvars(g, names);
    e.log.add(OpKind::Multiply, product.name + " x " + renamed.name);
    product = lift_multiply(product, renamed);
  }
  auto summed = lift_sum_out(product, target);
  e.log.add(OpKind::SumOut, target.to_string(), summed.exponent);
  e.result = std::move(summed.factor);
  return e;
}

MarginalDistribution combine_targets(const Factors& fs, const ParameterisedModel& m, const QuerySpec& q) {
  MarginalDistribution out;
  out.targets = q.targets;
  std::vector<std::size_t> dims;
  for (const auto& t : q.targets) {
    out.ranges.push_back(m.signatures().at(t.name).range);
    dims.push_back(out.ranges.back().size());
  }
  TableIndexer joint(dims);
  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(joint.size()));

  for (const auto& f : fs) {
    const TableIndexer idx = f.indexer();
    for (const auto& t : f.constraint.tuples()) {
      std::vector<std::size_t> target_of;
      for (const auto& a : f.args) {
        auto atom = instantiate(a, f.constraint.logvars(), t);
        auto it = std::find(q.targets.begin(), q.targets.end(), atom);
        if (it == q.targets.end()) throw InferenceError("internal: uneliminated randvar " + atom.to_string());
        target_of.push_back(static_cast<std::size_t>(it - q.targets.begin()));
      }
      std::vector<std::size_t> local(f.args.size());
      for (std::size_t k = 0; k < joint.size(); ++k) {
        auto a = joint.decode(k);
        for (std::size_t i = 0; i < local.size(); ++i) local[i] = a[target_of[i]];
        acc[static_cast<Eigen::Index>(k)] += f.log_values[static_cast<Eigen::Index>(idx.encode(local))];
      }
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

}  // namespace

MarginalDistribution lifted_query(const ParameterisedModel& m, const QuerySpec& q, OpLog* log_out) {
  check_query(m, q);
  OpLog log;
  Factors fs;
  for (const auto& p : m.parfactors()) fs.push_back(LogParfactor::from(p));

  const std::set<GroundAtom> targets(q.targets.begin(), q.targets.end());
  std::set<GroundAtom> pinned = targets;
  Evidence absorbable;
  for (const auto& [atom, value] : q.evidence.values()) {
    pinned.insert(atom);
    if (!targets.count(atom)) absorbable.add(atom, value);
  }

  shatter_on_atoms(fs, pinned, log);
  shatter_overlaps(fs, log);

  if (!absorbable.empty()) {
    Factors next;
    for (auto& f : fs) {
      auto g = absorb(f, absorbable);
      if (g.args.size() != f.args.size()) log.add(OpKind::Absorb, f.name);
      keep_unless_scalar(next, std::move(g));
    }
    fs = std::move(next);
  }

  std::size_t fresh = 0;
  while (true) {
    // Group argument occurrences by their (identical) grounding sets.
    std::map<std::vector<GroundAtom>, std::vector<Occurrence>> classes;
    for (std::size_t i = 0; i < fs.size(); ++i)
      for (std::size_t j = 0; j < fs[i].args.size(); ++j) classes[groundings(fs[i], j)].push_back({i, j});

    struct Candidate {
      std::size_t size;
      std::string name;
      std::vector<Occurrence> occs;
    };
    std::vector<Candidate> candidates;
    for (auto& [atoms, occs] : classes) {
      if (atoms.size() == 1 && targets.count(atoms.front())) continue;
      candidates.push_back({atoms.size(), atoms.front().name, occs});
    }
    if (candidates.empty()) break;
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.size != b.size) return a.size < b.size;
      if (a.name != b.name) return a.name < b.name;
      return a.occs.front() < b.occs.front();
    });

    bool done = false;
    for (const auto& cand : candidates) {
      std::optional<Elimination> e;
      try {
        e = eliminate_class(fs, cand.occs, fresh);
      } catch (const LiftingError&) {
        continue;
      }
      std::set<std::size_t> used;
      for (const auto& o : cand.occs) used.insert(o.factor);
      Factors next;
      for (std::size_t i = 0; i < fs.size(); ++i) {
        if (i == cand.occs.front().factor) {
          keep_unless_scalar(next, std::move(e->result));
        } else if (!used.count(i)) {
          next.push_back(std::move(fs[i]));
        }
      }
      fs = std::move(next);
      log.records.insert(log.records.end(), e->log.records.begin(), e->log.records.end());
      done = true;
      break;
    }
    if (done) continue;

    // No class can be eliminated lifted: ground the parfactors of the
    // smallest one and reshatter.
    std::set<std::size_t> used;
    for (const auto& o : candidates.front().occs) used.insert(o.factor);
    Factors next;
    for (std::size_t i = 0; i < fs.size(); ++i) {
      if (!used.count(i)) {
        next.push_back(std::move(fs[i]));
        continue;
      }
      log.add(OpKind::Ground, fs[i].name, fs[i].constraint.size());
      for (auto& g : ground_factor(fs[i])) next.push_back(std::move(g));
    }
    fs = std::move(next);
    shatter_overlaps(fs, log);
  }

  auto result = combine_targets(fs, m, q);
  if (log_out) *log_out = std::move(log);
  return result;
}

}  // namespace liftu
