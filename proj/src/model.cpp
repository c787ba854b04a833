#include "liftu/model.hpp"

#include <algorithm>
#include <set>

namespace liftu {

namespace {

std::string join_names(std::span<const Logvar> lvs) {
  std::string out;
  for (std::size_t i = 0; i < lvs.size(); ++i) {
    if (i) out += ",";
    out += lvs[i].name;
  }
  return out;
}

void sort_unique(std::vector<Tuple>& tuples) {
  std::sort(tuples.begin(), tuples.end());
  tuples.erase(std::unique(tuples.begin(), tuples.end()), tuples.end());
}

}  // namespace

Range::Range(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) throw ModelError("a range needs at least two labels");
  std::set<std::string> seen(labels_.begin(), labels_.end());
  if (seen.size() != labels_.size()) throw ModelError("range labels must be unique");
}

std::optional<std::size_t> Range::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return i;
  return std::nullopt;
}

std::string Prv::to_string() const {
  if (params.empty()) return name;
  return name + "(" + join_names(params) + ")";
}

std::string GroundAtom::to_string() const {
  if (args.empty()) return name;
  std::string out = name + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ",";
    out += args[i].name;
  }
  return out + ")";
}

std::vector<Logvar> logvars_of(std::span<const Prv> args) {
  std::vector<Logvar> out;
  for (const auto& a : args)
    for (const auto& lv : a.params)
      if (std::find(out.begin(), out.end(), lv) == out.end()) out.push_back(lv);
  return out;
}

// --- Constraint ---------------------------------------------------------

Constraint Constraint::extensional(std::vector<Logvar> logvars, std::vector<Tuple> tuples) {
  std::set<Logvar> distinct(logvars.begin(), logvars.end());
  if (distinct.size() != logvars.size())
    throw ModelError("constraint logvars must be distinct: " + join_names(logvars));
  if (tuples.empty()) throw ModelError("extensional constraint without tuples");
  for (const auto& t : tuples)
    if (t.size() != logvars.size())
      throw ModelError("constraint tuple arity does not match (" + join_names(logvars) + ")");
  sort_unique(tuples);
  Constraint c;
  c.kind_ = ConstraintKind::Extensional;
  c.logvars_ = std::move(logvars);
  c.tuples_ = std::move(tuples);
  return c;
}

Constraint Constraint::top(std::vector<Logvar> logvars) {
  Constraint c;
  c.kind_ = ConstraintKind::Top;
  c.logvars_ = std::move(logvars);
  return c;
}

Constraint Constraint::empty(std::vector<Logvar> logvars) {
  Constraint c;
  c.kind_ = ConstraintKind::Empty;
  c.logvars_ = std::move(logvars);
  return c;
}

std::optional<std::size_t> Constraint::position(const Logvar& lv) const {
  auto it = std::find(logvars_.begin(), logvars_.end(), lv);
  if (it == logvars_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - logvars_.begin());
}

// --- Tables -------------------------------------------------------------

TableIndexer::TableIndexer(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  strides_.assign(dims_.size(), 1);
  size_ = 1;
  for (std::size_t i = dims_.size(); i-- > 0;) {
    strides_[i] = size_;
    size_ *= dims_[i];
  }
}

std::size_t TableIndexer::encode(std::span<const std::size_t> assignment) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i) idx += assignment[i] * strides_[i];
  return idx;
}

std::vector<std::size_t> TableIndexer::decode(std::size_t index) const {
  std::vector<std::size_t> out(dims_.size());
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    out[i] = index / strides_[i];
    index %= strides_[i];
  }
  return out;
}

std::vector<std::size_t> range_sizes(std::span<const Prv> args) {
  std::vector<std::size_t> dims;
  dims.reserve(args.size());
  for (const auto& a : args) dims.push_back(a.range.size());
  return dims;
}

PotentialTable::PotentialTable(std::vector<Prv> args, Eigen::ArrayXd values)
    : args_(std::move(args)), values_(std::move(values)), indexer_(range_sizes(args_)) {
  if (static_cast<std::size_t>(values_.size()) != indexer_.size())
    throw ModelError("potential table has " + std::to_string(values_.size()) +
                     " values, expected " + std::to_string(indexer_.size()));
  if ((values_ < 0.0).any() || !values_.allFinite())
    throw ModelError("potentials must be finite and non-negative");
}

Parfactor::Parfactor(std::string name, PotentialTable table, Constraint constraint)
    : name_(std::move(name)), table_(std::move(table)), constraint_(std::move(constraint)) {
  auto lvs = logvars_of(table_.args());
  std::set<Logvar> expected(lvs.begin(), lvs.end());
  std::set<Logvar> got(constraint_.logvars().begin(), constraint_.logvars().end());
  if (expected != got || got.size() != constraint_.logvars().size())
    throw ModelError("parfactor " + name_ + ": constraint logvars (" +
                     join_names(constraint_.logvars()) + ") differ from argument logvars (" +
                     join_names(lvs) + ")");
}

// --- Models -------------------------------------------------------------

Signatures collect_signatures(std::span<const Parfactor> parfactors) {
  Signatures sigs;
  for (const auto& p : parfactors) {
    for (const auto& a : p.args()) {
      RandvarSignature sig{a.params.size(), a.range};
      auto [it, inserted] = sigs.emplace(a.name, sig);
      if (!inserted && !(it->second == sig))
        throw ModelError("randvar " + a.name + " used with inconsistent arity or range");
    }
  }
  return sigs;
}

namespace {

void check_unique_names(std::span<const Parfactor> parfactors) {
  std::set<std::string> names;
  for (const auto& p : parfactors)
    if (!names.insert(p.name()).second) throw ModelError("duplicate parfactor name " + p.name());
}

}  // namespace

TemplateModel::TemplateModel(std::vector<Parfactor> parfactors)
    : parfactors_(std::move(parfactors)), signatures_(collect_signatures(parfactors_)) {
  check_unique_names(parfactors_);
  for (const auto& p : parfactors_)
    if (p.constraint().kind() != ConstraintKind::Empty)
      throw ModelError("template parfactor " + p.name() + " must have an empty constraint");
}

std::vector<Logvar> TemplateModel::logvars() const {
  std::vector<Logvar> out;
  for (const auto& p : parfactors_)
    for (const auto& lv : p.constraint().logvars())
      if (std::find(out.begin(), out.end(), lv) == out.end()) out.push_back(lv);
  return out;
}

std::optional<std::size_t> TemplateModel::find(std::string_view parfactor_name) const {
  for (std::size_t i = 0; i < parfactors_.size(); ++i)
    if (parfactors_[i].name() == parfactor_name) return i;
  return std::nullopt;
}

ParameterisedModel::ParameterisedModel(std::vector<Parfactor> parfactors)
    : parfactors_(std::move(parfactors)), signatures_(collect_signatures(parfactors_)) {
  check_unique_names(parfactors_);
  for (const auto& p : parfactors_)
    if (!p.constraint().is_extensional())
      throw ModelError("parfactor " + p.name() + " has no extensional constraint");
}

// --- Operations ---------------------------------------------------------

GroundAtom instantiate(const Prv& prv, const std::vector<Logvar>& logvars, const Tuple& tuple) {
  GroundAtom atom{prv.name, {}};
  atom.args.reserve(prv.params.size());
  for (const auto& lv : prv.params) {
    auto it = std::find(logvars.begin(), logvars.end(), lv);
    if (it == logvars.end()) throw ModelError("logvar " + lv.name + " not in constraint");
    atom.args.push_back(tuple[static_cast<std::size_t>(it - logvars.begin())]);
  }
  return atom;
}

std::vector<std::vector<GroundAtom>> ground(const Parfactor& p) {
  const auto& c = p.constraint();
  if (!c.is_extensional()) throw ModelError("constraint not grounded (parfactor " + p.name() + ")");
  std::vector<std::vector<GroundAtom>> out;
  out.reserve(c.size());
  for (const auto& t : c.tuples()) {
    std::vector<GroundAtom> atoms;
    atoms.reserve(p.args().size());
    for (const auto& a : p.args()) atoms.push_back(instantiate(a, c.logvars(), t));
    out.push_back(std::move(atoms));
  }
  return out;
}

std::size_t ground_size(const ParameterisedModel& m) {
  std::size_t n = 0;
  for (const auto& p : m.parfactors()) n += p.constraint().size();
  return n;
}

namespace {

std::vector<std::size_t> positions_of(const Constraint& c, std::span<const Logvar> lvs) {
  std::vector<std::size_t> pos;
  pos.reserve(lvs.size());
  for (const auto& lv : lvs) {
    auto p = c.position(lv);
    if (!p) throw ModelError("logvar " + lv.name + " is not in constraint (" + join_names(c.logvars()) + ")");
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

}  // namespace

Constraint project(const Constraint& c, std::span<const Logvar> keep) {
  if (!c.is_extensional()) throw ModelError("project needs an extensional constraint");
  auto pos = positions_of(c, keep);
  std::vector<Tuple> tuples;
  tuples.reserve(c.size());
  for (const auto& t : c.tuples()) tuples.push_back(restrict(t, pos));
  return Constraint::extensional(std::vector<Logvar>(keep.begin(), keep.end()), std::move(tuples));
}

std::size_t conditional_count(const Constraint& c, std::span<const Logvar> eliminate) {
  if (!c.is_extensional()) throw ModelError("conditional_count needs an extensional constraint");
  positions_of(c, eliminate);  // subset check
  std::vector<Logvar> keep;
  for (const auto& lv : c.logvars())
    if (std::find(eliminate.begin(), eliminate.end(), lv) == eliminate.end()) keep.push_back(lv);
  auto pos = positions_of(c, keep);
  std::map<Tuple, std::size_t> counts;
  for (const auto& t : c.tuples()) ++counts[restrict(t, pos)];
  std::size_t n = counts.begin()->second;
  for (const auto& [key, count] : counts)
    if (count != n) throw LiftingError("not count-normalized");
  return n;
}

Constraint cartesian_constraint(const std::vector<Logvar>& logvars, const Domains& domains) {
  std::vector<const std::vector<Constant>*> doms;
  for (const auto& lv : logvars) {
    auto it = domains.find(lv);
    if (it == domains.end()) throw DomainError("missing domain for logvar " + lv.name);
    if (it->second.empty()) throw DomainError("empty domain for logvar " + lv.name);
    doms.push_back(&it->second);
  }
  std::vector<Tuple> tuples{Tuple{}};
  for (const auto* dom : doms) {
    std::vector<Tuple> next;
    next.reserve(tuples.size() * dom->size());
    for (const auto& t : tuples)
      for (const auto& c : *dom) {
        Tuple ext = t;
        ext.push_back(c);
        next.push_back(std::move(ext));
      }
    tuples = std::move(next);
  }
  return Constraint::extensional(logvars, std::move(tuples));
}

Parfactor resolve_top(const Parfactor& p, const Domains& domains) {
  if (p.constraint().kind() != ConstraintKind::Top)
    throw ModelError("parfactor " + p.name() + " has no top constraint");
  return Parfactor(p.name(), p.table(), cartesian_constraint(p.constraint().logvars(), domains));
}

}  // namespace liftu
