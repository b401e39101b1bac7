#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "causalnet/core.hpp"
#include "causalnet/error.hpp"
#include "causalnet/groundtruth.hpp"
#include "causalnet/rational.hpp"

namespace causalnet {

// Vote counts per link over a set of accepted worker networks.
struct AggregatedNetwork {
  std::map<CausalLink, std::int64_t> votes;
  std::map<CausalLink, std::vector<int>> link_confidences;
  std::int64_t contributing_networks = 0;

  std::int64_t votes_for(const CausalLink& l) const {
    auto it = votes.find(l);
    return it == votes.end() ? 0 : it->second;
  }

  std::int64_t total_votes() const {
    std::int64_t t = 0;
    for (const auto& [_, v] : votes) t += v;
    return t;
  }

  friend bool operator==(const AggregatedNetwork&, const AggregatedNetwork&) = default;
};

inline void add_network(AggregatedNetwork& agg, const WorkerNetwork& net) {
  std::set<CausalLink> seen;
  for (const auto& l : net.links) {
    if (!seen.insert(l).second) continue;
    ++agg.votes[l];
    agg.link_confidences[l].push_back(net.confidence);
  }
  ++agg.contributing_networks;
}

// Throws NetworkNotAccepted for any non-accepted input; analysis never counts pending work.
inline AggregatedNetwork aggregate(const std::vector<WorkerNetwork>& nets) {
  AggregatedNetwork agg;
  for (const auto& n : nets) {
    if (n.status != NetworkStatus::Accepted)
      throw Error(ErrorCode::NetworkNotAccepted, "network of worker " + n.worker_id +
                                                     " is " + std::string(to_string(n.status)));
    add_network(agg, n);
  }
  return agg;
}

inline AggregatedNetwork aggregate_accepted(const std::vector<WorkerNetwork>& nets) {
  AggregatedNetwork agg;
  for (const auto& n : nets)
    if (n.status == NetworkStatus::Accepted) add_network(agg, n);
  return agg;
}

// Average network credibility: mean cs over the network's links.
inline Rational anc(const WorkerNetwork& net, const CredibilityMap& cred) {
  if (net.links.empty()) throw Error(ErrorCode::EmptyNetwork, "ANC of an empty network");
  std::int64_t sum = 0;
  for (const auto& l : net.links) sum += cred.score(l);
  return Rational(sum, static_cast<std::int64_t>(net.links.size()));
}

inline std::optional<Rational> link_average_confidence(const AggregatedNetwork& agg,
                                                       const CausalLink& link) {
  auto it = agg.link_confidences.find(link);
  if (it == agg.link_confidences.end() || it->second.empty()) return std::nullopt;
  std::int64_t sum = 0;
  for (int c : it->second) sum += c;
  return Rational(sum, static_cast<std::int64_t>(it->second.size()));
}

struct PearsonResult {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

// Two-sided p-value of a sample correlation r over n pairs, t-distribution with n-2 dof.
inline double pearson_p_value(double r, std::size_t n) {
  if (n < 3) throw Error(ErrorCode::TooFewPairs, "p-value needs at least 3 pairs");
  const double ar = std::fabs(r);
  if (ar >= 1.0) return 0.0;
  const double dof = static_cast<double>(n - 2);
  const double t = ar * std::sqrt(dof / ((1.0 - ar) * (1.0 + ar)));
  boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, t));
}

inline PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::InvalidArgument, "vector lengths differ");
  const std::size_t n = x.size();
  if (n < 3) throw Error(ErrorCode::TooFewPairs, "need at least 3 pairs, got " + std::to_string(n));

  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw Error(ErrorCode::ConstantVector, "correlation of a constant vector");

  double r = static_cast<double>(sxy / std::sqrt(sxx * syy));
  r = std::clamp(r, -1.0, 1.0);
  return {r, pearson_p_value(r, n), n};
}

// Correlation between vote counts and credibility over every pair in the credibility
// universe; unvoted pairs count as zero votes.
inline PearsonResult pearson_votes_vs_credibility(const AggregatedNetwork& agg,
                                                  const CredibilityMap& cred) {
  for (const auto& [l, _] : agg.votes)
    if (!cred.has(l))
      throw Error(ErrorCode::MissingCredibility,
                  "voted link without credibility: " + l.cause.display + " -> " + l.effect.display);
  std::vector<double> votes, scores;
  votes.reserve(cred.size());
  scores.reserve(cred.size());
  for (const auto& [l, cs] : cred.scores) {
    votes.push_back(static_cast<double>(agg.votes_for(l)));
    scores.push_back(cs);
  }
  return pearson(votes, scores);
}

struct ExplorationEntry {
  TrendedAttribute attribute;
  std::int64_t appearance_count = 0;  // uses as cause or effect across all links
  std::int64_t worker_count = 0;      // distinct networks using the attribute
};

// One entry per catalog attribute, in catalog order; unexplored attributes report zeros.
inline std::vector<ExplorationEntry> exploration_stats(const std::vector<WorkerNetwork>& nets,
                                                       const AttributeCatalog& catalog) {
  std::vector<ExplorationEntry> out;
  out.reserve(catalog.size());
  for (const auto& a : catalog.attributes()) out.push_back({a, 0, 0});
  for (const auto& net : nets) {
    std::set<std::size_t> used;
    for (const auto& l : net.links) {
      for (const auto* a : {&l.cause, &l.effect}) {
        auto idx = catalog.index_of(a->display);
        if (!idx) throw Error(ErrorCode::CatalogMiss, "attribute not in catalog: " + a->display);
        ++out[*idx].appearance_count;
        used.insert(*idx);
      }
    }
    for (auto i : used) ++out[i].worker_count;
  }
  return out;
}

struct SaturationResult {
  bool saturated = false;
  double delta = 0.0;
  bool exploration_complete = false;
};

inline constexpr double kDefaultSaturationEpsilon = 0.05;

// L1 distance between normalized vote distributions, gated on every catalog attribute
// appearing in at least one voted link of `curr`.
inline SaturationResult saturation(const AggregatedNetwork& prev, const AggregatedNetwork& curr,
                                   const AttributeCatalog& catalog,
                                   double epsilon = kDefaultSaturationEpsilon) {
  const auto tp = prev.total_votes(), tc = curr.total_votes();
  if (tp == 0 || tc == 0) throw Error(ErrorCode::EmptyAggregate, "saturation of an empty aggregate");

  std::set<CausalLink> keys;
  for (const auto& [l, _] : prev.votes) keys.insert(l);
  for (const auto& [l, _] : curr.votes) keys.insert(l);
  // Exact over common denominator tp*tc before the single conversion to double.
  std::int64_t numer = 0;
  for (const auto& l : keys) {
    const std::int64_t d = prev.votes_for(l) * tc - curr.votes_for(l) * tp;
    numer += d < 0 ? -d : d;
  }
  SaturationResult out;
  out.delta = static_cast<double>(numer) / (static_cast<double>(tp) * static_cast<double>(tc));

  std::set<std::string> explored;
  for (const auto& [l, v] : curr.votes)
    if (v > 0) {
      explored.insert(l.cause.display);
      explored.insert(l.effect.display);
    }
  out.exploration_complete = true;
  for (const auto& a : catalog.attributes())
    if (!explored.count(a.display)) out.exploration_complete = false;
  out.saturated = out.delta < epsilon && out.exploration_complete;
  return out;
}

// Histogram of per-network ANC over six half-open bins [0,0.5) ... [2.5,3.0].
inline std::vector<std::int64_t> anc_histogram(const std::vector<WorkerNetwork>& nets,
                                               const CredibilityMap& cred) {
  std::vector<std::int64_t> bins(6, 0);
  for (const auto& n : nets) {
    const Rational a = anc(n, cred);
    auto bin = static_cast<std::size_t>(boost::rational_cast<std::int64_t>(a * Rational(2)));
    ++bins[std::min<std::size_t>(bin, 5)];
  }
  return bins;
}

// Counts of self-reported confidence 1..5 (index 0 = confidence 1).
inline std::vector<std::int64_t> confidence_histogram(const std::vector<WorkerNetwork>& nets) {
  std::vector<std::int64_t> bins(5, 0);
  for (const auto& n : nets)
    if (n.confidence >= 1 && n.confidence <= 5) ++bins[static_cast<std::size_t>(n.confidence - 1)];
  return bins;
}

}  // namespace causalnet
