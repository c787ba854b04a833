#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "liftu/domains.hpp"
#include "liftu/model.hpp"
#include "liftu/program.hpp"

namespace liftu {

struct Provenance {
  std::size_t domain_world = 0;
  std::size_t constraint_world = 0;

  auto operator<=>(const Provenance&) const = default;
  /// "k-j".
  std::string to_string() const;
};

struct WeightedModel {
  // Empty when degenerate.
  ParameterisedModel model;
  double prob = 0.0;
  double domain_prob = 0.0;
  double constraint_prob = 0.0;
  Provenance provenance;
  bool degenerate = false;
  std::map<Logvar, std::size_t> domain_sizes;
  // Sizes of the varying logvars, used to order worlds by domain size.
  std::vector<std::size_t> size_key;
};

/// A template, a constraint generator and a domain specification.
struct UniverseModel {
  TemplateModel tmpl;
  std::shared_ptr<const ConstraintGenerator> generator;
  DomainSpec domain_spec;
  std::optional<WorldFilter> filter;

  UniverseModel(TemplateModel t, std::shared_ptr<const ConstraintGenerator> g, DomainSpec d,
                std::optional<WorldFilter> f = std::nullopt);
  UniverseModel(TemplateModel t, Program p, DomainSpec d, std::optional<WorldFilter> f = std::nullopt);
};

struct ExpandResult {
  std::vector<WeightedModel> models;
  std::size_t domain_worlds_total = 0;
  std::size_t domain_worlds_retained = 0;
  // Combined worlds generated from the retained domain worlds.
  std::size_t constraint_worlds_before_cascade = 0;
  std::size_t dropped_by_cascade = 0;
  double retained_mass = 0.0;
};

/// Parfactor i receives constraint i; tables are untouched. Throws
/// ModelError "invalid constraint world" on count or logvar mismatch and on
/// non-extensional constraints.
ParameterisedModel instantiate(const TemplateModel& tmpl, const ConstraintWorld& cw);

/// Weighted parameterised models, ordered by domain world then constraint
/// world. Domain worlds expand concurrently.
ExpandResult expand(const UniverseModel& u);

}  // namespace liftu
