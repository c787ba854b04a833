#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "liftu/domains.hpp"
#include "liftu/model.hpp"

namespace liftu {

// --- constraint worlds -------------------------------------------------------

/// One constraint per template parfactor, in template order.
struct ConstraintWorld {
  std::vector<Constraint> constraints;
  double prob = 1.0;
  // False when the generator assigns no probabilities (see uniformize).
  bool weighted = true;
  // Some binding produced no tuples; the matching constraint is Empty.
  bool degenerate = false;
  // Index of the chosen fact in each choice group.
  std::vector<std::size_t> choices;
};

/// Assigns 1/m to each of m unweighted worlds.
std::vector<ConstraintWorld> uniformize(std::vector<ConstraintWorld> worlds);

/// Produces the constraint worlds of a template for one domain world.
class ConstraintGenerator {
 public:
  virtual ~ConstraintGenerator() = default;
  virtual std::vector<ConstraintWorld> generate(const TemplateModel& tmpl, const DomainWorld& dw) const = 0;
};

// --- Datalog programs --------------------------------------------------------

struct Term {
  bool variable = false;
  std::string text;

  bool operator==(const Term&) const = default;
};

struct Atom {
  std::string predicate;
  std::vector<Term> terms;

  /// "pred/arity".
  std::string key() const { return predicate + "/" + std::to_string(terms.size()); }
  bool ground() const;
  std::string to_string() const;
};

struct Rule {
  Atom head;
  std::vector<Atom> body;
};

struct ChoiceGroup {
  std::string predicate;  // pred/arity
  struct Fact {
    Atom atom;
    double prob;
  };
  std::vector<Fact> facts;
};

struct Binding {
  std::string parfactor;
  std::optional<Atom> query;  // nullopt: top, the Cartesian product of the domains
};

struct PopulateDirective {
  std::string predicate;
  Logvar logvar;
};

/// Non-recursive positive Datalog with mutually exclusive probabilistic
/// facts, binding directives and populate directives.
struct Program {
  std::vector<Atom> facts;
  std::vector<ChoiceGroup> choice_groups;
  std::vector<Rule> rules;
  std::map<std::string, Binding> bindings;
  std::vector<PopulateDirective> populate;
};

/// Throws ProgramError with line and column on syntax errors, and on
/// recursion, unsafe rules or choice groups not summing to 1.
Program parse_program(std::string_view text);

/// Relations keyed by "pred/arity".
using Database = std::map<std::string, std::set<std::vector<std::string>>>;

/// Bottom-up evaluation of the program's rules over `facts`.
Database derive(const Program& prog, Database facts);

/// One world per combination of choice-group facts, ordered by descending
/// probability (ties by choice index). Without choice groups: one world with
/// probability 1, marked unweighted.
std::vector<ConstraintWorld> evaluate(const Program& prog, const TemplateModel& tmpl, const DomainWorld& dw);

class DatalogGenerator final : public ConstraintGenerator {
 public:
  explicit DatalogGenerator(Program program) : program_(std::move(program)) {}

  std::vector<ConstraintWorld> generate(const TemplateModel& tmpl, const DomainWorld& dw) const override {
    return evaluate(program_, tmpl, dw);
  }
  const Program& program() const { return program_; }

 private:
  Program program_;
};

/// The same explicit worlds for every domain world.
class FixedWorldGenerator final : public ConstraintGenerator {
 public:
  explicit FixedWorldGenerator(std::vector<ConstraintWorld> worlds) : worlds_(std::move(worlds)) {}

  std::vector<ConstraintWorld> generate(const TemplateModel&, const DomainWorld&) const override { return worlds_; }

 private:
  std::vector<ConstraintWorld> worlds_;
};

}  // namespace liftu
