#include "liftu/query.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <limits>
#include <optional>

namespace liftu {

namespace {

struct Outcome {
  std::optional<MarginalDistribution> answer;
  std::string skip_reason;
  bool missing_atom = false;
};

Outcome answer_one(const WeightedModel& wm, const QuerySpec& q) {
  if (wm.degenerate) return {std::nullopt, "degenerate constraint world", false};
  try {
    check_query(wm.model, q);
  } catch (const MissingAtomError& e) {
    return {std::nullopt, e.what(), true};
  }
  return {lifted_query(wm.model, q), "", false};
}

constexpr double kTrendTolerance = 1e-12;

}  // namespace

AnswerSet query_all(const std::vector<WeightedModel>& models, const QuerySpec& q) {
  if (q.targets.empty()) throw QueryError("query has no targets");
  std::vector<std::future<Outcome>> jobs;
  jobs.reserve(models.size());
  for (const auto& wm : models) jobs.push_back(std::async(std::launch::async, answer_one, std::cref(wm), std::cref(q)));

  AnswerSet out;
  out.query = q;
  std::size_t missing = 0;
  std::string first_missing;
  for (std::size_t i = 0; i < models.size(); ++i) {
    auto r = jobs[i].get();
    const auto& wm = models[i];
    if (!r.answer) {
      if (r.missing_atom && missing++ == 0) first_missing = r.skip_reason;
      out.skipped.push_back({wm.provenance, std::move(r.skip_reason)});
      continue;
    }
    out.entries.push_back({wm.provenance, wm.prob, wm.size_key, std::move(*r.answer)});
    out.retained_mass += wm.prob;
  }
  if (out.entries.empty()) {
    if (missing > 0) throw MissingAtomError(first_missing + " (in every model)");
    throw QueryError("no queryable models");
  }
  return out;
}

void check_probe(const AnswerSet& a, const EventProbe& e) {
  const auto& targets = a.query.targets;
  auto it = std::find(targets.begin(), targets.end(), e.atom);
  if (it == targets.end()) throw QueryError("event atom " + e.atom.to_string() + " is not a query target");
  if (a.entries.empty()) return;
  const auto& range = a.entries.front().answer.ranges[static_cast<std::size_t>(it - targets.begin())];
  if (!range.index_of(e.value)) throw QueryError("value " + e.value + " not in the range of " + e.atom.to_string());
}

double probe_probability(const Answer& a, const EventProbe& e) { return a.answer.probability(e.atom, e.value); }

namespace {

Selection take(std::vector<std::size_t> order, std::size_t k) {
  if (k == 0) throw QueryError("k must be at least 1");
  Selection s;
  s.truncated = k > order.size();
  order.resize(std::min(k, order.size()));
  s.rows = std::move(order);
  return s;
}

}  // namespace

Selection top_k_query_prob(const AnswerSet& a, const EventProbe& e, std::size_t k) {
  if (k == 0) throw QueryError("k must be at least 1");
  check_probe(a, e);
  std::vector<double> pe;
  for (const auto& entry : a.entries) pe.push_back(probe_probability(entry, e));
  std::vector<std::size_t> order(a.entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (pe[i] != pe[j]) return pe[i] > pe[j];
    return a.entries[i].model_prob > a.entries[j].model_prob;
  });
  return take(std::move(order), k);
}

Selection top_k_model_prob(const AnswerSet& a, std::size_t k) {
  std::vector<std::size_t> order(a.entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a.entries[i].model_prob > a.entries[j].model_prob; });
  return take(std::move(order), k);
}

std::vector<std::size_t> pareto_frontier(const std::vector<std::pair<double, double>>& points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (points[i].first != points[j].first) return points[i].first > points[j].first;
    return points[i].second > points[j].second;
  });
  // Sweep groups of equal first coordinate. Within a group only the points
  // with the group's best second coordinate survive, and only if every
  // point with a larger first coordinate has a smaller second one.
  std::vector<std::size_t> out;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    while (end < order.size() && points[order[end]].first == points[order[g]].first) ++end;
    const double top = points[order[g]].second;
    if (top > best) {
      for (std::size_t i = g; i < end && points[order[i]].second == top; ++i) out.push_back(order[i]);
      best = top;
    }
    g = end;
  }
  return out;
}

Selection skyline(const AnswerSet& a, const EventProbe& e) {
  check_probe(a, e);
  std::vector<std::pair<double, double>> pts;
  for (const auto& entry : a.entries) pts.emplace_back(entry.model_prob, probe_probability(entry, e));
  return {pareto_frontier(pts), false};
}

const char* to_string(Trend t) {
  switch (t) {
    case Trend::Increasing: return "increasing";
    case Trend::Decreasing: return "decreasing";
    case Trend::Constant: return "constant";
    case Trend::NonMonotone: return "non-monotone";
    case Trend::Insufficient: return "insufficient";
  }
  return "?";
}

TrendReport trend_report(const AnswerSet& a, const EventProbe& e) {
  check_probe(a, e);
  TrendReport r;
  r.rows.resize(a.entries.size());
  std::iota(r.rows.begin(), r.rows.end(), 0);
  std::stable_sort(r.rows.begin(), r.rows.end(),
                   [&](std::size_t i, std::size_t j) { return a.entries[i].size_key < a.entries[j].size_key; });
  if (r.rows.size() < 2) return r;
  bool up = false, down = false;
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    const double d =
        probe_probability(a.entries[r.rows[i]], e) - probe_probability(a.entries[r.rows[i - 1]], e);
    r.max_delta = std::max(r.max_delta, std::abs(d));
    if (d > kTrendTolerance) up = true;
    if (d < -kTrendTolerance) down = true;
  }
  r.direction = up && down ? Trend::NonMonotone : up ? Trend::Increasing : down ? Trend::Decreasing : Trend::Constant;
  return r;
}

}  // namespace liftu
