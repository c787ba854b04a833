#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "liftu/error.hpp"

namespace liftu {

template <class Tag>
struct Identifier {
  std::string name;

  Identifier() = default;
  explicit Identifier(std::string n) : name(std::move(n)) {}

  auto operator<=>(const Identifier&) const = default;
  bool operator==(const Identifier&) const = default;
};

struct LogvarTag {};
struct ConstantTag {};

using Logvar = Identifier<LogvarTag>;
using Constant = Identifier<ConstantTag>;
using Tuple = std::vector<Constant>;

// Domain of each logvar, constants in a fixed order.
using Domains = std::map<Logvar, std::vector<Constant>>;

/// Ordered list of discrete labels a randvar can take. Defaults to
/// boolean, i.e. [false, true].
class Range {
 public:
  Range() : labels_{"false", "true"} {}
  explicit Range(std::vector<std::string> labels);

  static Range boolean() { return Range(); }

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<std::size_t> index_of(std::string_view label) const;

  bool operator==(const Range&) const = default;

 private:
  std::vector<std::string> labels_;
};

/// Parameterised random variable R(L1, ..., Ln).
struct Prv {
  std::string name;
  std::vector<Logvar> params;
  Range range;

  bool operator==(const Prv&) const = default;
  std::string to_string() const;
};

struct GroundAtom {
  std::string name;
  std::vector<Constant> args;

  auto operator<=>(const GroundAtom&) const = default;
  bool operator==(const GroundAtom&) const = default;
  std::string to_string() const;
};

/// Logvars of a PRV list in order of first appearance.
std::vector<Logvar> logvars_of(std::span<const Prv> args);

enum class ConstraintKind { Extensional, Top, Empty };

/// Extensional constraint (logvar sequence plus a sorted tuple set), or one
/// of the Top / Empty markers.
class Constraint {
 public:
  Constraint() = default;

  static Constraint extensional(std::vector<Logvar> logvars, std::vector<Tuple> tuples);
  static Constraint top(std::vector<Logvar> logvars);
  static Constraint empty(std::vector<Logvar> logvars);

  ConstraintKind kind() const { return kind_; }
  bool is_extensional() const { return kind_ == ConstraintKind::Extensional; }
  const std::vector<Logvar>& logvars() const { return logvars_; }
  const std::vector<Tuple>& tuples() const { return tuples_; }
  std::size_t size() const { return tuples_.size(); }
  std::optional<std::size_t> position(const Logvar& lv) const;

  bool operator==(const Constraint&) const = default;

 private:
  ConstraintKind kind_ = ConstraintKind::Empty;
  std::vector<Logvar> logvars_;
  std::vector<Tuple> tuples_;
};

/// Row-major index arithmetic over a product of range sizes (last
/// dimension varies fastest).
class TableIndexer {
 public:
  TableIndexer() = default;
  explicit TableIndexer(std::vector<std::size_t> dims);

  std::size_t size() const { return size_; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  const std::vector<std::size_t>& strides() const { return strides_; }

  std::size_t encode(std::span<const std::size_t> assignment) const;
  std::vector<std::size_t> decode(std::size_t index) const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 1;
};

std::vector<std::size_t> range_sizes(std::span<const Prv> args);

class PotentialTable {
 public:
  PotentialTable() = default;
  PotentialTable(std::vector<Prv> args, Eigen::ArrayXd values);

  const std::vector<Prv>& args() const { return args_; }
  const Eigen::ArrayXd& values() const { return values_; }
  const TableIndexer& indexer() const { return indexer_; }
  std::size_t size() const { return indexer_.size(); }

  double at(std::span<const std::size_t> assignment) const {
    return values_[static_cast<Eigen::Index>(indexer_.encode(assignment))];
  }

 private:
  std::vector<Prv> args_;
  Eigen::ArrayXd values_;
  TableIndexer indexer_;
};

/// phi(A)|C. The constraint covers exactly the logvars of the arguments.
class Parfactor {
 public:
  Parfactor() = default;
  Parfactor(std::string name, PotentialTable table, Constraint constraint);

  const std::string& name() const { return name_; }
  const PotentialTable& table() const { return table_; }
  const std::vector<Prv>& args() const { return table_.args(); }
  const Constraint& constraint() const { return constraint_; }

 private:
  std::string name_;
  PotentialTable table_;
  Constraint constraint_;
};

struct RandvarSignature {
  std::size_t arity = 0;
  Range range;

  bool operator==(const RandvarSignature&) const = default;
};

using Signatures = std::map<std::string, RandvarSignature>;

/// Collects randvar signatures, throwing ModelError on conflicting arity or
/// range for one randvar name.
Signatures collect_signatures(std::span<const Parfactor> parfactors);

/// Parfactors without a universe: every constraint is Empty.
class TemplateModel {
 public:
  TemplateModel() = default;
  explicit TemplateModel(std::vector<Parfactor> parfactors);

  const std::vector<Parfactor>& parfactors() const { return parfactors_; }
  const Signatures& signatures() const { return signatures_; }
  std::vector<Logvar> logvars() const;
  std::optional<std::size_t> find(std::string_view parfactor_name) const;

 private:
  std::vector<Parfactor> parfactors_;
  Signatures signatures_;
};

/// Parfactors over a known universe; every constraint is extensional.
class ParameterisedModel {
 public:
  ParameterisedModel() = default;
  explicit ParameterisedModel(std::vector<Parfactor> parfactors);

  const std::vector<Parfactor>& parfactors() const { return parfactors_; }
  const Signatures& signatures() const { return signatures_; }

 private:
  std::vector<Parfactor> parfactors_;
  Signatures signatures_;
};

GroundAtom instantiate(const Prv& prv, const std::vector<Logvar>& logvars, const Tuple& tuple);

/// gr(p): the argument atoms of each ground factor, one per constraint
/// tuple. Every instance shares p.table().
std::vector<std::vector<GroundAtom>> ground(const Parfactor& p);

/// Number of ground factors in the model.
std::size_t ground_size(const ParameterisedModel& m);

/// Distinct restrictions of c's tuples to `keep`, in the order of `keep`.
Constraint project(const Constraint& c, std::span<const Logvar> keep);

/// The number n such that every tuple of project(c, logvars \ eliminate)
/// extends to exactly n tuples of c. Throws LiftingError when the counts
/// differ.
std::size_t conditional_count(const Constraint& c, std::span<const Logvar> eliminate);

/// Replaces a Top constraint by the Cartesian product of the logvars'
/// domains.
Parfactor resolve_top(const Parfactor& p, const Domains& domains);

Constraint cartesian_constraint(const std::vector<Logvar>& logvars, const Domains& domains);

}  // namespace liftu
