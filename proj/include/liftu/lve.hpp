#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "liftu/model.hpp"

namespace liftu {

/// Observed events A = a, keyed by ground atom; values are range labels.
class Evidence {
 public:
  Evidence() = default;

  /// Throws QueryError on a contradicting duplicate.
  void add(GroundAtom atom, std::string value);

  const std::map<GroundAtom, std::string>& values() const { return values_; }
  bool empty() const { return values_.empty(); }
  std::size_t size() const { return values_.size(); }
  const std::string* find(const GroundAtom& atom) const;

 private:
  std::map<GroundAtom, std::string> values_;
};

struct QuerySpec {
  std::vector<GroundAtom> targets;
  Evidence evidence;
};

/// Joint distribution over the targets, row-major over their ranges.
struct MarginalDistribution {
  std::vector<GroundAtom> targets;
  std::vector<Range> ranges;
  Eigen::ArrayXd probs;

  /// P(atom = value), marginalising the other targets.
  double probability(const GroundAtom& atom, std::string_view value) const;
};

/// Parfactor with potentials stored as natural logarithms. This is the
/// working representation of the lifted engine: products become sums and
/// exponents become scalings, so large domains do not overflow.
struct LogParfactor {
  std::string name;
  std::vector<Prv> args;
  Constraint constraint;
  Eigen::ArrayXd log_values;

  static LogParfactor from(const Parfactor& p);
  Parfactor to_linear() const;
  TableIndexer indexer() const { return TableIndexer(range_sizes(args)); }
};

enum class OpKind { Split, Absorb, Multiply, SumOut, Ground };

const char* to_string(OpKind kind);

struct OpRecord {
  OpKind kind;
  std::string subject;
  std::size_t exponent = 1;
};

/// Trace of the lifted operations performed while answering one query.
struct OpLog {
  std::vector<OpRecord> records;

  void add(OpKind kind, std::string subject, std::size_t exponent = 1) {
    records.push_back({kind, std::move(subject), exponent});
  }
  std::size_t count(OpKind kind) const;
  std::size_t size() const { return records.size(); }
};

// --- lifted primitives ----------------------------------------------------

LogParfactor lift_multiply(const LogParfactor& g1, const LogParfactor& g2);
Parfactor lift_multiply(const Parfactor& g1, const Parfactor& g2);

struct SumOutResult {
  LogParfactor factor;
  std::size_t exponent;
};

SumOutResult lift_sum_out(const LogParfactor& g, const Prv& a);
Parfactor lift_sum_out(const Parfactor& g, const Prv& a);

std::pair<std::optional<LogParfactor>, std::optional<LogParfactor>> split(
    const LogParfactor& g, const Logvar& x, const std::set<Constant>& constants);
std::pair<std::optional<Parfactor>, std::optional<Parfactor>> split(
    const Parfactor& g, const Logvar& x, const std::set<Constant>& constants);

/// Partitions g's constraint tuples by `keep`; either side may be absent.
std::pair<std::optional<LogParfactor>, std::optional<LogParfactor>> split_where(
    const LogParfactor& g, const std::function<bool(const Tuple&)>& keep);

LogParfactor absorb(const LogParfactor& g, const Evidence& ev);
Parfactor absorb(const Parfactor& g, const Evidence& ev);

/// Ground atoms that argument `arg` of g stands for, sorted.
std::vector<GroundAtom> groundings(const LogParfactor& g, std::size_t arg);

// --- queries --------------------------------------------------------------

/// Throws MissingAtomError if a target or evidence atom has no grounding in
/// m, QueryError on invalid targets or evidence values.
void check_query(const ParameterisedModel& m, const QuerySpec& q);

/// Propositional variable elimination over gr(m). Reference semantics for
/// the lifted path.
MarginalDistribution ground_ve(const ParameterisedModel& m, const QuerySpec& q);

/// Restricted lifted variable elimination. Falls back to grounding the
/// parfactors of a randvar group whenever a lifted precondition fails.
MarginalDistribution lifted_query(const ParameterisedModel& m, const QuerySpec& q,
                                  OpLog* log = nullptr);

}  // namespace liftu
