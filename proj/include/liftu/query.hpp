#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "liftu/lve.hpp"
#include "liftu/universe.hpp"

namespace liftu {

struct Answer {
  Provenance provenance;
  double model_prob = 0.0;
  std::vector<std::size_t> size_key;
  MarginalDistribution answer;
};

struct SkippedModel {
  Provenance provenance;
  std::string reason;
};

/// One answer per queryable model, in expand order. Model probabilities are
/// reported raw; retained_mass is their sum.
struct AnswerSet {
  QuerySpec query;
  std::vector<Answer> entries;
  std::vector<SkippedModel> skipped;
  double retained_mass = 0.0;
};

/// A = value for one of the query's targets.
struct EventProbe {
  GroundAtom atom;
  std::string value;
};

/// Runs lifted_query on every model concurrently. Degenerate models and
/// models lacking a queried atom are skipped with a reason. Throws
/// MissingAtomError when an atom is absent from every model.
AnswerSet query_all(const std::vector<WeightedModel>& models, const QuerySpec& q);

/// Throws QueryError unless e names a target of a's query and a value of
/// its range.
void check_probe(const AnswerSet& a, const EventProbe& e);
double probe_probability(const Answer& a, const EventProbe& e);

/// Entry indices into AnswerSet::entries.
struct Selection {
  std::vector<std::size_t> rows;
  // k exceeded the number of entries, so every entry was returned.
  bool truncated = false;
};

/// Highest P(e) first; ties by higher model probability, then entry order.
Selection top_k_query_prob(const AnswerSet& a, const EventProbe& e, std::size_t k);
/// Highest model probability first; ties by entry order.
Selection top_k_model_prob(const AnswerSet& a, std::size_t k);

/// Entries not dominated in (model prob, P(e)): no other entry is >= in both
/// and > in one. Ordered by model probability, descending.
Selection skyline(const AnswerSet& a, const EventProbe& e);

/// Pareto frontier of raw points, as indices, by the same rule.
std::vector<std::size_t> pareto_frontier(const std::vector<std::pair<double, double>>& points);

enum class Trend { Increasing, Decreasing, Constant, NonMonotone, Insufficient };
const char* to_string(Trend t);

struct TrendReport {
  Trend direction = Trend::Insufficient;
  double max_delta = 0.0;
  // Entries ordered by ascending domain size.
  std::vector<std::size_t> rows;
};

/// Classifies P(e) over entries sorted by domain size (stable). Differences
/// within 1e-12 count as equal.
TrendReport trend_report(const AnswerSet& a, const EventProbe& e);

}  // namespace liftu
