#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "causalnet/core.hpp"
#include "causalnet/error.hpp"
#include "causalnet/metrics.hpp"
#include "causalnet/rational.hpp"

namespace causalnet {

// 2x2 contingency counts laid out as
//   [ O|C   , notO|C  ]
//   [ O|notC, notO|notC ]
// Cells may be unknown: the crowd method fills only the upper-left magnitude.
struct TrialMatrix {
  std::string cause_label;
  std::string outcome_label;
  std::array<std::optional<Rational>, 4> cells;

  static TrialMatrix full(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
    TrialMatrix m;
    m.cells = {Rational(a), Rational(b), Rational(c), Rational(d)};
    return m;
  }

  const std::optional<Rational>& outcome_given_cause() const { return cells[0]; }
  bool row_known(std::size_t row) const { return cells[2 * row] && cells[2 * row + 1]; }

  TrialMatrix rows_swapped() const {
    TrialMatrix m = *this;
    std::swap(m.cells[0], m.cells[2]);
    std::swap(m.cells[1], m.cells[3]);
    return m;
  }
};

// dp = P(O|C) - P(O|notC).
inline Rational delta_p(const TrialMatrix& m) {
  if (!m.row_known(0) || !m.row_known(1))
    throw Error(ErrorCode::PartialMatrix, "delta p needs every cell of both rows");
  for (const auto& c : m.cells)
    if (*c < Rational(0)) throw Error(ErrorCode::InvalidArgument, "trial counts must be non-negative");
  const Rational present = *m.cells[0] + *m.cells[1];
  const Rational absent = *m.cells[2] + *m.cells[3];
  if (present == Rational(0) || absent == Rational(0)) throw Error(ErrorCode::ZeroRow, "a trial-matrix row sums to zero");
  return *m.cells[0] / present - *m.cells[2] / absent;
}

struct PathSupport {
  std::vector<TrendedAttribute> path;  // nodes, hops() + 1 of them
  std::vector<std::int64_t> link_votes;
  std::int64_t weakest = 0;
  Rational average;

  std::size_t hops() const { return link_votes.size(); }
};

namespace detail {

// Voted digraph keyed by display; successors kept in lexicographic order.
struct VoteGraph {
  std::map<std::string, TrendedAttribute> nodes;
  std::map<std::string, std::vector<std::pair<std::string, std::int64_t>>> out;

  explicit VoteGraph(const AggregatedNetwork& agg) {
    for (const auto& [l, v] : agg.votes) {
      if (v < 1) continue;
      nodes.emplace(l.cause.display, l.cause);
      nodes.emplace(l.effect.display, l.effect);
      out[l.cause.display].emplace_back(l.effect.display, v);
    }
  }
};

inline bool node_sequence_less(const PathSupport& a, const PathSupport& b) {
  return std::lexicographical_compare(a.path.begin(), a.path.end(), b.path.begin(), b.path.end());
}

}  // namespace detail

inline PathSupport make_path_support(std::vector<TrendedAttribute> path,
                                     std::vector<std::int64_t> link_votes) {
  if (link_votes.empty() || path.size() != link_votes.size() + 1)
    throw Error(ErrorCode::InvalidArgument, "a path needs one more node than links");
  PathSupport p{std::move(path), std::move(link_votes), 0, Rational(0)};
  std::int64_t sum = 0;
  p.weakest = p.link_votes.front();
  for (auto v : p.link_votes) {
    sum += v;
    p.weakest = std::min(p.weakest, v);
  }
  p.average = Rational(sum, static_cast<std::int64_t>(p.link_votes.size()));
  return p;
}

// All simple directed paths of 1..max_hops links over voted links (votes >= 1), from any
// node of `from` to any node of `to`. Sorted by hops ascending, weakest descending, then
// average descending, then node sequence.
inline std::vector<PathSupport> enumerate_paths(const AggregatedNetwork& agg,
                                                const std::set<TrendedAttribute>& from,
                                                const std::set<TrendedAttribute>& to,
                                                std::size_t max_hops) {
  if (max_hops < 1) throw Error(ErrorCode::InvalidArgument, "max_hops must be at least 1");
  const detail::VoteGraph g(agg);
  std::set<std::string> targets;
  for (const auto& t : to) targets.insert(t.display);

  std::vector<PathSupport> out;
  std::vector<std::string> stack;
  std::vector<std::int64_t> votes;
  std::set<std::string> on_path;

  auto dfs = [&](auto&& self, const std::string& u) -> void {
    auto it = g.out.find(u);
    if (it == g.out.end()) return;
    for (const auto& [v, w] : it->second) {
      if (on_path.count(v)) continue;
      stack.push_back(v);
      votes.push_back(w);
      on_path.insert(v);
      if (targets.count(v)) {
        std::vector<TrendedAttribute> nodes;
        for (const auto& s : stack) nodes.push_back(g.nodes.at(s));
        out.push_back(make_path_support(std::move(nodes), votes));
      }
      if (votes.size() < max_hops) self(self, v);
      on_path.erase(v);
      votes.pop_back();
      stack.pop_back();
    }
  };

  for (const auto& s : from) {
    if (!g.nodes.count(s.display)) continue;
    stack = {s.display};
    votes.clear();
    on_path = {s.display};
    dfs(dfs, s.display);
  }

  std::sort(out.begin(), out.end(), [](const PathSupport& a, const PathSupport& b) {
    if (a.hops() != b.hops()) return a.hops() < b.hops();
    if (a.weakest != b.weakest) return a.weakest > b.weakest;
    if (a.average != b.average) return a.average > b.average;
    return detail::node_sequence_less(a, b);
  });
  return out;
}

enum class SupportCriterion { Weakest, Average };

constexpr std::string_view to_string(SupportCriterion c) {
  return c == SupportCriterion::Weakest ? "weakest" : "average";
}

inline Rational support_of(const PathSupport& p, SupportCriterion c) {
  return c == SupportCriterion::Weakest ? Rational(p.weakest) : p.average;
}

// Bogus cause(s) vs. a true cause for a synonym set of outcomes.
struct IllusionQuery {
  std::set<TrendedAttribute> bogus_causes;
  TrendedAttribute true_cause;
  std::set<TrendedAttribute> outcomes;
  std::size_t max_hops = 4;

  void validate() const {
    if (max_hops < 1) throw Error(ErrorCode::InvalidArgument, "max_hops must be at least 1");
    if (bogus_causes.empty() || outcomes.empty())
      throw Error(ErrorCode::InvalidArgument, "bogus and outcome sets must be non-empty");
    for (const auto& b : bogus_causes)
      if (b == true_cause || outcomes.count(b))
        throw Error(ErrorCode::InvalidArgument, "query sets must be disjoint: " + b.display);
    if (outcomes.count(true_cause))
      throw Error(ErrorCode::InvalidArgument, "true cause is also an outcome");
  }
};

// Best path under a criterion among `paths`; ties go to the lexicographically smaller sequence.
inline std::optional<PathSupport> best_path(const std::vector<PathSupport>& paths,
                                            SupportCriterion c) {
  const PathSupport* best = nullptr;
  for (const auto& p : paths) {
    if (!best) {
      best = &p;
      continue;
    }
    const auto sp = support_of(p, c), sb = support_of(*best, c);
    if (sp > sb || (sp == sb && detail::node_sequence_less(p, *best))) best = &p;
  }
  if (!best) return std::nullopt;
  return *best;
}

struct IllusionResult {
  SupportCriterion criterion = SupportCriterion::Average;
  std::int64_t bogus_votes = 0;
  Rational true_support;
  Rational ratio;                 // bogus_votes / true_support
  PathSupport path;               // defining path: best at the deepest hop count reached
  std::vector<PathSupport> best_per_hop;  // best path for each hop count that has one, ascending
};

inline std::int64_t bogus_direct_votes(const AggregatedNetwork& agg, const IllusionQuery& q) {
  std::int64_t sum = 0;
  for (const auto& b : q.bogus_causes)
    for (const auto& o : q.outcomes) sum += agg.votes_for({b, o});
  return sum;
}

// The defining true-cause support is the best path at the deepest hop count (<= max_hops)
// for which any voted path exists: the longest chain is the mechanistically complete one.
inline IllusionResult illusion_ratio(const AggregatedNetwork& agg, const IllusionQuery& q,
                                     SupportCriterion criterion) {
  q.validate();
  const auto paths = enumerate_paths(agg, {q.true_cause}, q.outcomes, q.max_hops);
  IllusionResult r;
  r.criterion = criterion;
  r.bogus_votes = bogus_direct_votes(agg, q);

  for (std::size_t h = 1; h <= q.max_hops; ++h) {
    std::vector<PathSupport> at_h;
    for (const auto& p : paths)
      if (p.hops() == h) at_h.push_back(p);
    if (auto b = best_path(at_h, criterion)) {
      r.best_per_hop.push_back(*b);
    }
  }
  if (r.best_per_hop.empty() || support_of(r.best_per_hop.back(), criterion) == Rational(0))
    throw Error(ErrorCode::NoTruePath, "no voted path from " + q.true_cause.display +
                                           " to the outcome within " +
                                           std::to_string(q.max_hops) + " hops");
  r.path = r.best_per_hop.back();
  r.true_support = support_of(r.path, criterion);
  r.ratio = Rational(r.bogus_votes) / r.true_support;
  return r;
}

// Partial trial matrices (bogus, true). Only the upper-left cell (cause present, outcome
// present) is filled: bogus direct votes and the true cause's defining path support.
inline std::pair<TrialMatrix, TrialMatrix> build_trial_matrices(
    const IllusionQuery& q, const AggregatedNetwork& agg,
    SupportCriterion criterion = SupportCriterion::Average) {
  q.validate();
  std::string outcome_label;
  for (const auto& o : q.outcomes) {
    if (!outcome_label.empty()) outcome_label += " / ";
    outcome_label += o.display;
  }
  std::string bogus_label;
  for (const auto& b : q.bogus_causes) {
    if (!bogus_label.empty()) bogus_label += " / ";
    bogus_label += b.display;
  }

  TrialMatrix bogus, truth;
  bogus.cause_label = bogus_label;
  bogus.outcome_label = outcome_label;
  bogus.cells[0] = Rational(bogus_direct_votes(agg, q));

  truth.cause_label = q.true_cause.display;
  truth.outcome_label = outcome_label;
  try {
    truth.cells[0] = illusion_ratio(agg, q, criterion).true_support;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoTruePath) throw;
    truth.cells[0] = Rational(0);
  }
  return {bogus, truth};
}

}  // namespace causalnet
