#pragma once

#include <algorithm>
#include <cassert>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "causalnet/error.hpp"

namespace causalnet {

enum class Trend { Up, Down };

constexpr std::string_view to_string(Trend t) { return t == Trend::Up ? "up" : "down"; }

// A base attribute fused with a trend term, e.g. {"CO2", Up, "increasing CO2"}.
// Identity and ordering follow the display name, which is unique within a catalog.
struct TrendedAttribute {
  std::string base;
  Trend trend = Trend::Up;
  std::string display;

  friend bool operator==(const TrendedAttribute& a, const TrendedAttribute& b) {
    return a.display == b.display;
  }
  friend std::strong_ordering operator<=>(const TrendedAttribute& a, const TrendedAttribute& b) {
    return a.display <=> b.display;
  }
};

struct CausalLink {
  TrendedAttribute cause;
  TrendedAttribute effect;

  CausalLink reversed() const { return {effect, cause}; }

  friend bool operator==(const CausalLink& a, const CausalLink& b) {
    return a.cause == b.cause && a.effect == b.effect;
  }
  // Lexicographic by (cause.display, effect.display); every exported table uses this order.
  friend std::strong_ordering operator<=>(const CausalLink& a, const CausalLink& b) {
    if (auto c = a.cause <=> b.cause; c != 0) return c;
    return a.effect <=> b.effect;
  }
};

inline bool is_self_base(const CausalLink& l) { return l.cause.base == l.effect.base; }

class AttributeCatalog {
 public:
  AttributeCatalog() = default;

  // Throws InvalidCatalog when any catalog invariant is broken.
  AttributeCatalog(std::string version, std::vector<TrendedAttribute> attributes)
      : version_(std::move(version)), attributes_(std::move(attributes)) {
    validate();
    for (std::size_t i = 0; i < attributes_.size(); ++i) index_.emplace(attributes_[i].display, i);
  }

  const std::string& version() const { return version_; }
  const std::vector<TrendedAttribute>& attributes() const { return attributes_; }
  std::size_t size() const { return attributes_.size(); }

  const TrendedAttribute* find(std::string_view display) const {
    auto it = index_.find(std::string(display));
    return it == index_.end() ? nullptr : &attributes_[it->second];
  }

  const TrendedAttribute& at(std::string_view display) const {
    if (const auto* a = find(display)) return *a;
    throw Error(ErrorCode::CatalogMiss, "attribute not in catalog: " + std::string(display));
  }

  bool contains(const TrendedAttribute& a) const {
    const auto* found = find(a.display);
    return found && found->base == a.base && found->trend == a.trend;
  }

  bool contains(const CausalLink& l) const { return contains(l.cause) && contains(l.effect); }

  std::optional<std::size_t> index_of(std::string_view display) const {
    auto it = index_.find(std::string(display));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Every ordered pair of attributes with different bases, sorted lexicographically.
  std::vector<CausalLink> valid_pairs() const {
    std::vector<CausalLink> pairs;
    pairs.reserve(attributes_.size() * attributes_.size());
    for (const auto& c : attributes_)
      for (const auto& e : attributes_)
        if (c.base != e.base) pairs.push_back({c, e});
    std::sort(pairs.begin(), pairs.end());
    return pairs;
  }

 private:
  void validate() const {
    if (attributes_.size() % 2 != 0)
      throw Error(ErrorCode::InvalidCatalog, "attribute count must be even");
    std::map<std::string, std::set<Trend>> trends_by_base;
    std::set<std::string> displays;
    for (const auto& a : attributes_) {
      if (a.base.empty()) throw Error(ErrorCode::InvalidCatalog, "empty base");
      const std::string suffix = " " + a.base;
      if (a.display.size() <= suffix.size() ||
          a.display.compare(a.display.size() - suffix.size(), suffix.size(), suffix) != 0)
        throw Error(ErrorCode::InvalidCatalog,
                    "display '" + a.display + "' is not <trend term> <base> for base '" + a.base + "'");
      if (!displays.insert(a.display).second)
        throw Error(ErrorCode::InvalidCatalog, "duplicate display: " + a.display);
      if (!trends_by_base[a.base].insert(a.trend).second)
        throw Error(ErrorCode::InvalidCatalog, "duplicate (base, trend) for " + a.base);
    }
    for (const auto& [base, trends] : trends_by_base)
      if (trends.size() != 2)
        throw Error(ErrorCode::InvalidCatalog, "base '" + base + "' must appear with both trends");
  }

  std::string version_;
  std::vector<TrendedAttribute> attributes_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class NetworkStatus { Pending, Accepted, Rejected, Flagged };

constexpr std::string_view to_string(NetworkStatus s) {
  switch (s) {
    case NetworkStatus::Pending: return "pending";
    case NetworkStatus::Accepted: return "accepted";
    case NetworkStatus::Rejected: return "rejected";
    case NetworkStatus::Flagged: return "flagged";
  }
  return "pending";
}

struct WorkerNetwork {
  std::string worker_id;
  std::vector<CausalLink> links;  // creation order
  int confidence = 0;             // 1..5 once evaluated, 0 before
  NetworkStatus status = NetworkStatus::Pending;

  bool contains(const CausalLink& l) const {
    return std::find(links.begin(), links.end(), l) != links.end();
  }

  bool contains_node(const TrendedAttribute& a) const {
    return std::any_of(links.begin(), links.end(),
                       [&](const CausalLink& l) { return l.cause == a || l.effect == a; });
  }

  // Distinct nodes in order of first appearance.
  std::vector<TrendedAttribute> nodes() const {
    std::vector<TrendedAttribute> out;
    auto add = [&](const TrendedAttribute& a) {
      if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
    };
    for (const auto& l : links) {
      add(l.cause);
      add(l.effect);
    }
    return out;
  }

  friend bool operator==(const WorkerNetwork&, const WorkerNetwork&) = default;
};

// Collection-protocol knobs. The final profile is the default.
struct ProtocolProfile {
  std::string name = "final";
  std::size_t links_per_network = 5;
  std::size_t networks_per_worker = 1;
  bool allow_delete = false;
  bool randomize_attribute_order = true;

  static ProtocolProfile final_study() { return {}; }
  static ProtocolProfile formative() { return {"formative", 5, 3, true, false}; }

  // Zero-credibility flag threshold: 3 of 5 scaled as ceil(3L/5).
  std::size_t flag_threshold() const { return (3 * links_per_network + 4) / 5; }
};

enum class LinkViolation {
  CatalogMiss,
  SelfBase,
  DuplicateLink,
  ReverseDuplicate,
  BothEndpointsNew,
  BothEndpointsOld,
  NetworkFull,
};

constexpr std::string_view to_string(LinkViolation v) {
  switch (v) {
    case LinkViolation::CatalogMiss: return "CatalogMiss";
    case LinkViolation::SelfBase: return "SelfBase";
    case LinkViolation::DuplicateLink: return "DuplicateLink";
    case LinkViolation::ReverseDuplicate: return "ReverseDuplicate";
    case LinkViolation::BothEndpointsNew: return "BothEndpointsNew";
    case LinkViolation::BothEndpointsOld: return "BothEndpointsOld";
    case LinkViolation::NetworkFull: return "NetworkFull";
  }
  return "Unknown";
}

// Round rule: the first link introduces two new nodes; every later link joins exactly one
// already-selected node to one new node. Returns nullopt when the candidate is accepted.
inline std::optional<LinkViolation> validate_next_link(const WorkerNetwork& current,
                                                       const CausalLink& candidate,
                                                       const AttributeCatalog* catalog = nullptr,
                                                       std::size_t link_limit = 5) {
  if (current.links.size() >= link_limit) return LinkViolation::NetworkFull;
  if (catalog && !catalog->contains(candidate)) return LinkViolation::CatalogMiss;
  if (is_self_base(candidate)) return LinkViolation::SelfBase;
  if (current.contains(candidate)) return LinkViolation::DuplicateLink;
  if (current.contains(candidate.reversed())) return LinkViolation::ReverseDuplicate;
  if (current.links.empty()) return std::nullopt;

  const bool cause_old = current.contains_node(candidate.cause);
  const bool effect_old = current.contains_node(candidate.effect);
  if (cause_old && effect_old) return LinkViolation::BothEndpointsOld;
  if (!cause_old && !effect_old) return LinkViolation::BothEndpointsNew;
  return std::nullopt;
}

// True when the undirected skeleton is a tree spanning links+1 nodes.
inline bool is_tree(const WorkerNetwork& net) {
  const auto nodes = net.nodes();
  if (net.links.empty()) return true;
  if (nodes.size() != net.links.size() + 1) return false;
  std::map<std::string, std::string> parent;
  for (const auto& n : nodes) parent[n.display] = n.display;
  auto find = [&](std::string x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& l : net.links) {
    auto a = find(l.cause.display), b = find(l.effect.display);
    if (a == b) return false;
    parent[a] = b;
  }
  return true;
}

enum class AlterationKind { ChangeDirection, Delete, NoOp };

constexpr std::string_view to_string(AlterationKind k) {
  switch (k) {
    case AlterationKind::ChangeDirection: return "change_direction";
    case AlterationKind::Delete: return "delete";
    case AlterationKind::NoOp: return "no_op";
  }
  return "no_op";
}

struct AlterationAction {
  std::size_t link_index = 0;
  AlterationKind action = AlterationKind::NoOp;
};

inline WorkerNetwork apply_alteration(WorkerNetwork net, const AlterationAction& a,
                                      const ProtocolProfile& profile = ProtocolProfile::final_study()) {
  if (a.action == AlterationKind::Delete && !profile.allow_delete)
    throw Error(ErrorCode::ActionDisabledByProfile,
                "delete is not available under the '" + profile.name + "' profile");
  if (a.link_index >= net.links.size())
    throw Error(ErrorCode::IndexOutOfRange, "link index " + std::to_string(a.link_index) +
                                                " out of range for " +
                                                std::to_string(net.links.size()) + " links");
  switch (a.action) {
    case AlterationKind::ChangeDirection: {
      [[maybe_unused]] const bool was_tree = is_tree(net);
      net.links[a.link_index] = net.links[a.link_index].reversed();
      // Reversing one edge leaves the undirected skeleton unchanged.
      assert(!was_tree || is_tree(net));
      break;
    }
    case AlterationKind::Delete:
      net.links.erase(net.links.begin() + static_cast<std::ptrdiff_t>(a.link_index));
      break;
    case AlterationKind::NoOp:
      break;
  }
  return net;
}

// Renders "<cause> leads to <effect>" per link. Traversal starts from root nodes (no incoming
// link) in first-appearance order; consecutive links along a walk are merged into one
// sentence with ", which leads to". Sentences are joined with ". ".
inline std::string generate_narrative(const WorkerNetwork& net) {
  if (net.links.empty()) throw Error(ErrorCode::EmptyNetwork, "cannot narrate an empty network");

  const auto nodes = net.nodes();
  std::vector<bool> used(net.links.size(), false);

  auto next_unused = [&](const TrendedAttribute& from) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < net.links.size(); ++i)
      if (!used[i] && net.links[i].cause == from) return i;
    return std::nullopt;
  };

  std::vector<std::string> sentences;
  auto visit = [&](auto&& self, const TrendedAttribute& start) -> void {
    while (auto first = next_unused(start)) {
      std::vector<TrendedAttribute> chain{start};
      std::optional<std::size_t> step = first;
      while (step) {
        used[*step] = true;
        chain.push_back(net.links[*step].effect);
        step = next_unused(chain.back());
      }
      std::string s = chain[0].display + " leads to " + chain[1].display;
      for (std::size_t i = 2; i < chain.size(); ++i) s += ", which leads to " + chain[i].display;
      sentences.push_back(std::move(s));
      for (std::size_t i = 1; i < chain.size(); ++i) self(self, chain[i]);
    }
  };

  for (const auto& n : nodes) {
    const bool has_incoming = std::any_of(net.links.begin(), net.links.end(),
                                          [&](const CausalLink& l) { return l.effect == n; });
    if (!has_incoming) visit(visit, n);
  }
  // Only reachable when the links contain a directed cycle.
  for (const auto& n : nodes) visit(visit, n);

  std::string text;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) text += ". ";
    text += sentences[i];
  }
  return text;
}

}  // namespace causalnet
