#include "liftu/universe.hpp"

#include <future>

namespace liftu {

std::string Provenance::to_string() const {
  return std::to_string(domain_world) + "-" + std::to_string(constraint_world);
}

UniverseModel::UniverseModel(TemplateModel t, std::shared_ptr<const ConstraintGenerator> g, DomainSpec d,
                             std::optional<WorldFilter> f)
    : tmpl(std::move(t)), generator(std::move(g)), domain_spec(std::move(d)), filter(std::move(f)) {
  if (!generator) throw ProgramError("no constraint generator");
  if (filter) filter->validate();
  for (const auto& lv : tmpl.logvars())
    if (!domain_spec.logvars.count(lv)) throw DomainError("missing domain for logvar " + lv.name);
}

UniverseModel::UniverseModel(TemplateModel t, Program p, DomainSpec d, std::optional<WorldFilter> f)
    : UniverseModel(std::move(t), std::make_shared<DatalogGenerator>(std::move(p)), std::move(d), std::move(f)) {}

ParameterisedModel instantiate(const TemplateModel& tmpl, const ConstraintWorld& cw) {
  const auto& pfs = tmpl.parfactors();
  if (cw.constraints.size() != pfs.size())
    throw ModelError("invalid constraint world: " + std::to_string(cw.constraints.size()) + " constraints for " +
                     std::to_string(pfs.size()) + " parfactors");
  std::vector<Parfactor> out;
  out.reserve(pfs.size());
  for (std::size_t i = 0; i < pfs.size(); ++i) {
    const auto& c = cw.constraints[i];
    if (c.logvars() != pfs[i].constraint().logvars())
      throw ModelError("invalid constraint world: logvars of parfactor " + pfs[i].name() + " do not match");
    if (!c.is_extensional())
      throw ModelError("invalid constraint world: parfactor " + pfs[i].name() + " has no extensional constraint");
    out.emplace_back(pfs[i].name(), pfs[i].table(), c);
  }
  return ParameterisedModel(std::move(out));
}

namespace {

std::vector<WeightedModel> expand_world(const UniverseModel& u, const DomainWorld& dw) {
  auto worlds = u.generator->generate(u.tmpl, dw);
  if (!worlds.empty() && !worlds.front().weighted) worlds = uniformize(std::move(worlds));

  std::map<Logvar, std::size_t> sizes;
  for (const auto& [lv, dom] : dw.domains) sizes[lv] = dom.size();

  std::vector<WeightedModel> out;
  for (std::size_t j = 0; j < worlds.size(); ++j) {
    auto& cw = worlds[j];
    for (auto& c : cw.constraints)
      if (c.kind() == ConstraintKind::Top) c = cartesian_constraint(c.logvars(), dw.domains);
    WeightedModel wm;
    wm.domain_prob = dw.prob;
    wm.constraint_prob = cw.prob;
    wm.prob = dw.prob * cw.prob;
    wm.provenance = {dw.id, j};
    wm.domain_sizes = sizes;
    wm.size_key = dw.size_key();
    wm.degenerate = cw.degenerate;
    for (const auto& c : cw.constraints)
      if (c.kind() == ConstraintKind::Empty) wm.degenerate = true;
    if (!wm.degenerate) wm.model = instantiate(u.tmpl, cw);
    out.push_back(std::move(wm));
  }
  return out;
}

}  // namespace

ExpandResult expand(const UniverseModel& u) {
  ExpandResult res;
  auto worlds = enumerate_worlds(u.domain_spec, u.tmpl);
  res.domain_worlds_total = worlds.size();
  if (u.filter) worlds = filter_worlds(std::move(worlds), u.filter->threshold).kept;
  res.domain_worlds_retained = worlds.size();

  std::vector<std::future<std::vector<WeightedModel>>> jobs;
  jobs.reserve(worlds.size());
  for (const auto& dw : worlds) jobs.push_back(std::async(std::launch::async, expand_world, std::cref(u), std::cref(dw)));
  std::vector<WeightedModel> all;
  for (auto& j : jobs)
    for (auto& wm : j.get()) all.push_back(std::move(wm));
  res.constraint_worlds_before_cascade = all.size();

  if (u.filter && u.filter->cascade) {
    auto kept = filter_worlds(std::move(all), u.filter->combined_threshold());
    res.dropped_by_cascade = kept.dropped;
    all = std::move(kept.kept);
  }
  for (const auto& wm : all) res.retained_mass += wm.prob;
  res.models = std::move(all);
  return res;
}

}  // namespace liftu
