#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "causalnet/core.hpp"
#include "causalnet/error.hpp"
#include "causalnet/groundtruth.hpp"
#include "causalnet/metrics.hpp"

namespace causalnet {

inline constexpr std::int64_t kDefaultSignificanceThreshold = 4;

// Modified equal-depth binning of vote counts into crowd scores 0..3.
//
// Zero votes map to 0. Nonzero counts are ranked ascending; a run of equal counts whose
// first element sits at rank i (of n) gets floor(3i/n)+1, so a tie group straddling a bin
// boundary lands wholly in the lower bin and the next distinct count resumes at its own rank.
// Fewer than three nonzero links cannot be split and all get 1.
inline std::vector<int> crowd_scores(const std::vector<std::int64_t>& votes) {
  std::vector<int> cr(votes.size(), 0);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < votes.size(); ++i)
    if (votes[i] > 0) order.push_back(i);
  const std::size_t n = order.size();
  if (n == 0) return cr;
  if (n < 3) {
    for (auto i : order) cr[i] = 1;
    return cr;
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return votes[a] < votes[b]; });
  std::size_t group_start = 0;
  for (std::size_t rank = 0; rank < n; ++rank) {
    if (rank > 0 && votes[order[rank]] != votes[order[rank - 1]]) group_start = rank;
    cr[order[rank]] = static_cast<int>(3 * group_start / n) + 1;
  }
  return cr;
}

// Crowd score for every link of `universe` (links absent from agg have zero votes).
inline std::map<CausalLink, int> crowd_scores(const AggregatedNetwork& agg,
                                              const std::vector<CausalLink>& universe) {
  std::vector<std::int64_t> v;
  v.reserve(universe.size());
  for (const auto& l : universe) v.push_back(agg.votes_for(l));
  const auto cr = crowd_scores(v);
  std::map<CausalLink, int> out;
  for (std::size_t i = 0; i < universe.size(); ++i) out[universe[i]] = cr[i];
  return out;
}

inline std::map<CausalLink, int> crowd_scores(const AggregatedNetwork& agg) {
  std::vector<CausalLink> universe;
  for (const auto& [l, _] : agg.votes) universe.push_back(l);
  return crowd_scores(agg, universe);
}

enum class DiscrepancyClass { Misinformed, Correct, Oblivious };

constexpr std::string_view to_string(DiscrepancyClass c) {
  switch (c) {
    case DiscrepancyClass::Misinformed: return "misinformed";
    case DiscrepancyClass::Correct: return "correct";
    case DiscrepancyClass::Oblivious: return "oblivious";
  }
  return "correct";
}

struct DiscrepancyEntry {
  CausalLink link;
  std::int64_t votes = 0;
  int cr = 0;
  int cs = 0;
  int discrepancy = 0;  // cs - cr
  DiscrepancyClass cls = DiscrepancyClass::Correct;
  bool visible = false;
  std::optional<int> grey_level;  // Correct links only; equals cs (3 = darkest)
};

inline DiscrepancyEntry classify_link(const CausalLink& link, std::int64_t votes, int cs, int cr,
                                      std::int64_t threshold = kDefaultSignificanceThreshold) {
  if (cs < 0 || cs > 3 || cr < 0 || cr > 3)
    throw Error(ErrorCode::ScoreOutOfRange, "cs and cr must lie in 0..3");
  DiscrepancyEntry e{link, votes, cr, cs, cs - cr, DiscrepancyClass::Correct, votes >= threshold,
                     std::nullopt};
  if (e.discrepancy < 0) {
    e.cls = DiscrepancyClass::Misinformed;
  } else if (e.discrepancy > 0) {
    e.cls = DiscrepancyClass::Oblivious;
  } else {
    e.grey_level = cs;
  }
  return e;
}

struct DiscrepancyNetwork {
  std::vector<DiscrepancyEntry> entries;  // sorted by link
  std::int64_t threshold = kDefaultSignificanceThreshold;
};

// One entry per credibility pair; crowd scores are binned over the same universe.
inline DiscrepancyNetwork build_discrepancy(const AggregatedNetwork& agg, const CredibilityMap& cred,
                                            std::int64_t threshold = kDefaultSignificanceThreshold) {
  for (const auto& [l, v] : agg.votes)
    if (v > 0 && !cred.has(l))
      throw Error(ErrorCode::MissingCredibility,
                  "voted link without credibility: " + l.cause.display + " -> " + l.effect.display);
  std::vector<CausalLink> universe;
  universe.reserve(cred.size());
  for (const auto& [l, _] : cred.scores) universe.push_back(l);
  const auto cr = crowd_scores(agg, universe);

  DiscrepancyNetwork d;
  d.threshold = threshold;
  d.entries.reserve(universe.size());
  for (const auto& l : universe)
    d.entries.push_back(classify_link(l, agg.votes_for(l), cred.score(l), cr.at(l), threshold));
  return d;
}

// Table rows: discrepancy -3..-1, correct split by cs 3..0, then +1..+3.
struct DiscrepancyHistogramRow {
  DiscrepancyClass cls;
  int score;
  std::optional<int> cs;  // correct rows only
  std::int64_t count_all = 0;
  std::int64_t count_visible = 0;
};

struct DiscrepancyHistogram {
  std::vector<DiscrepancyHistogramRow> rows;
  std::int64_t total_all = 0;
  std::int64_t total_visible = 0;

  const DiscrepancyHistogramRow& row(int score, std::optional<int> cs = std::nullopt) const {
    for (const auto& r : rows)
      if (r.score == score && r.cs == cs) return r;
    throw Error(ErrorCode::InvalidArgument, "no histogram row for score " + std::to_string(score));
  }
};

inline DiscrepancyHistogram discrepancy_histogram(const DiscrepancyNetwork& d) {
  DiscrepancyHistogram h;
  for (int s : {-3, -2, -1}) h.rows.push_back({DiscrepancyClass::Misinformed, s, std::nullopt});
  for (int cs : {3, 2, 1, 0}) h.rows.push_back({DiscrepancyClass::Correct, 0, cs});
  for (int s : {1, 2, 3}) h.rows.push_back({DiscrepancyClass::Oblivious, s, std::nullopt});

  auto index = [](const DiscrepancyEntry& e) -> std::size_t {
    if (e.discrepancy < 0) return static_cast<std::size_t>(e.discrepancy + 3);
    if (e.discrepancy == 0) return static_cast<std::size_t>(3 + (3 - e.cs));
    return static_cast<std::size_t>(6 + e.discrepancy);
  };
  for (const auto& e : d.entries) {
    auto& r = h.rows[index(e)];
    ++r.count_all;
    ++h.total_all;
    if (e.visible) {
      ++r.count_visible;
      ++h.total_visible;
    }
  }
  return h;
}

inline std::string histogram_csv(const DiscrepancyHistogram& h) {
  std::ostringstream os;
  os << "type,score,count_all,count_visible\n";
  for (const auto& r : h.rows) {
    os << to_string(r.cls) << ',';
    if (r.cs)
      os << "0 (cs = " << *r.cs << ')';
    else
      os << r.score;
    os << ',' << r.count_all << ',' << r.count_visible << '\n';
  }
  os << "total,," << h.total_all << ',' << h.total_visible << '\n';
  return os.str();
}

// Legend colors: reds/orange/yellow for misinformed, greys by cs for correct, blues for oblivious.
inline std::string_view legend_color(int discrepancy, int cs) {
  switch (discrepancy) {
    case -3: return "#8B0000";
    case -2: return "#FF8C00";
    case -1: return "#FFD700";
    case 1: return "#ADD8E6";
    case 2: return "#6495ED";
    case 3: return "#00008B";
    default: break;
  }
  static constexpr std::array<std::string_view, 4> greys{"#D3D3D3", "#A9A9A9", "#696969", "#2F2F2F"};
  return greys[static_cast<std::size_t>(std::clamp(cs, 0, 3))];
}

enum class DotMode { Misinformed, Oblivious, Correct, All };

namespace detail {
inline std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}
}  // namespace detail

inline std::string export_discrepancy_dot(const DiscrepancyNetwork& d, DotMode mode) {
  auto wanted = [&](DiscrepancyClass c) {
    switch (mode) {
      case DotMode::All: return true;
      case DotMode::Misinformed: return c == DiscrepancyClass::Misinformed;
      case DotMode::Oblivious: return c == DiscrepancyClass::Oblivious;
      case DotMode::Correct: return c == DiscrepancyClass::Correct;
    }
    return false;
  };
  std::vector<const DiscrepancyEntry*> edges;
  for (const auto& e : d.entries)
    if (e.visible && wanted(e.cls)) edges.push_back(&e);
  std::sort(edges.begin(), edges.end(), [](auto* a, auto* b) { return a->link < b->link; });

  std::ostringstream os;
  os << "digraph discrepancy {\n";
  for (const auto* e : edges) {
    os << "  " << detail::dot_quote(e->link.cause.display) << " -> "
       << detail::dot_quote(e->link.effect.display) << " [color=\""
       << legend_color(e->discrepancy, e->cs) << "\", label=\"" << e->discrepancy
       << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace causalnet
