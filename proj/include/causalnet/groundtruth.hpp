#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "causalnet/core.hpp"
#include "causalnet/error.hpp"

namespace causalnet {

// One expert's independently drawn network. Not required to be a tree.
struct ExpertNetwork {
  std::string expert_id;
  std::set<CausalLink> links;
  std::map<CausalLink, std::string> references;
};

enum class Provenance { AbsentAll, PresentAll, Deliberated };

constexpr std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::AbsentAll: return "absent_all";
    case Provenance::PresentAll: return "present_all";
    case Provenance::Deliberated: return "deliberated";
  }
  return "deliberated";
}

inline constexpr int kMinCredibility = 0;
inline constexpr int kMaxCredibility = 3;
inline constexpr std::size_t kMinExperts = 3;

// Credibility score cs in {0,1,2,3} per ordered attribute pair.
struct CredibilityMap {
  std::map<CausalLink, int> scores;
  std::map<CausalLink, Provenance> provenance;

  bool has(const CausalLink& l) const { return scores.count(l) != 0; }

  int score(const CausalLink& l) const {
    auto it = scores.find(l);
    if (it == scores.end())
      throw Error(ErrorCode::MissingCredibility,
                  "no credibility for " + l.cause.display + " -> " + l.effect.display);
    return it->second;
  }

  std::size_t size() const { return scores.size(); }

  friend bool operator==(const CredibilityMap&, const CredibilityMap&) = default;
};

struct DraftCredibility {
  CredibilityMap draft;              // 0/3 links only
  std::vector<CausalLink> worklist;  // present in some but not all expert networks, sorted
};

namespace detail {

inline void require_catalog_links(const std::vector<ExpertNetwork>& experts,
                                  const AttributeCatalog& catalog) {
  for (const auto& e : experts)
    for (const auto& l : e.links) {
      if (!catalog.contains(l))
        throw Error(ErrorCode::CatalogMiss, "expert " + e.expert_id + " uses " + l.cause.display +
                                                " -> " + l.effect.display);
      if (is_self_base(l))
        throw Error(ErrorCode::InvalidLink, "expert " + e.expert_id + " links two trends of " +
                                                l.cause.base);
    }
}

inline std::size_t appearance_count(const std::vector<ExpertNetwork>& experts, const CausalLink& l) {
  std::size_t n = 0;
  for (const auto& e : experts) n += e.links.count(l);
  return n;
}

}  // namespace detail

inline DraftCredibility merge_expert_networks(const std::vector<ExpertNetwork>& experts,
                                              const AttributeCatalog& catalog) {
  if (experts.size() < kMinExperts)
    throw Error(ErrorCode::TooFewExperts, "need at least " + std::to_string(kMinExperts) +
                                              " experts, got " + std::to_string(experts.size()));
  detail::require_catalog_links(experts, catalog);

  DraftCredibility out;
  for (const auto& pair : catalog.valid_pairs()) {
    const auto n = detail::appearance_count(experts, pair);
    if (n == 0) {
      out.draft.scores[pair] = kMinCredibility;
      out.draft.provenance[pair] = Provenance::AbsentAll;
    } else if (n == experts.size()) {
      out.draft.scores[pair] = kMaxCredibility;
      out.draft.provenance[pair] = Provenance::PresentAll;
    } else {
      out.worklist.push_back(pair);
    }
  }
  return out;
}

// Mediator count m = (shortest directed cause->effect path in the union expert graph, not
// using the direct link) - 1. One mediator suggests 2, two or more suggest 1, none suggests 1.
inline int suggest_deliberation_score(const CausalLink& link, const std::vector<ExpertNetwork>& experts) {
  const auto n = detail::appearance_count(experts, link);
  if (n == 0 || n == experts.size())
    throw Error(ErrorCode::NotOnWorklist,
                link.cause.display + " -> " + link.effect.display + " is not on the worklist");

  std::map<std::string, std::set<std::string>> adjacency;
  for (const auto& e : experts)
    for (const auto& l : e.links) adjacency[l.cause.display].insert(l.effect.display);

  std::map<std::string, std::size_t> dist{{link.cause.display, 0}};
  std::deque<std::string> frontier{link.cause.display};
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop_front();
    for (const auto& v : adjacency[u]) {
      if (u == link.cause.display && v == link.effect.display) continue;
      if (dist.count(v)) continue;
      dist[v] = dist[u] + 1;
      if (v == link.effect.display) {
        const auto mediators = dist[v] - 1;
        return mediators == 1 ? 2 : 1;
      }
      frontier.push_back(v);
    }
  }
  return 1;
}

// decisions may also cover 0/3 links; those become Deliberated overrides.
inline CredibilityMap apply_deliberations(const DraftCredibility& draft,
                                          const std::map<CausalLink, int>& decisions) {
  for (const auto& [link, cs] : decisions) {
    if (cs < kMinCredibility || cs > kMaxCredibility)
      throw Error(ErrorCode::ScoreOutOfRange, link.cause.display + " -> " + link.effect.display +
                                                  " scored " + std::to_string(cs));
  }
  CredibilityMap out = draft.draft;
  for (const auto& link : draft.worklist) {
    auto it = decisions.find(link);
    if (it == decisions.end())
      throw Error(ErrorCode::MissingDecision,
                  "no deliberated score for " + link.cause.display + " -> " + link.effect.display);
    out.scores[link] = it->second;
    out.provenance[link] = Provenance::Deliberated;
  }
  for (const auto& [link, cs] : decisions) {
    if (!out.has(link))
      throw Error(ErrorCode::CatalogMiss,
                  "decision for pair outside the universe: " + link.cause.display + " -> " +
                      link.effect.display);
    out.scores[link] = cs;
    out.provenance[link] = Provenance::Deliberated;
  }
  return out;
}

// Worklist links the decisions do not cover.
inline std::vector<CausalLink> missing_decisions(const DraftCredibility& draft,
                                                 const std::map<CausalLink, int>& decisions) {
  std::vector<CausalLink> out;
  for (const auto& l : draft.worklist)
    if (!decisions.count(l)) out.push_back(l);
  return out;
}

}  // namespace causalnet
