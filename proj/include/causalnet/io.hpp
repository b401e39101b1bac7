#pragma once

// File formats: attribute catalog (JSON), worker networks (JSON lines), expert networks
// (JSON), deliberations (CSV), credibility map (CSV), long-form votes (CSV), illusion
// queries (JSON), plus atomic file writes.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalnet/core.hpp"
#include "causalnet/csv.hpp"
#include "causalnet/error.hpp"
#include "causalnet/groundtruth.hpp"
#include "causalnet/metrics.hpp"
#include "causalnet/pathlab.hpp"

namespace causalnet::io {

using json = nlohmann::json;

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write to a sibling temp file, then rename over the target.
inline void write_file_atomic(const std::filesystem::path& p, const std::string& content) {
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error(ErrorCode::IoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) throw Error(ErrorCode::IoError, "rename to " + p.string() + ": " + ec.message());
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, what + ": " + e.what());
  }
}

// ---- catalog ----

inline Trend trend_from_string(const std::string& s) {
  if (s == "up") return Trend::Up;
  if (s == "down") return Trend::Down;
  throw Error(ErrorCode::ParseError, "trend must be 'up' or 'down', got '" + s + "'");
}

inline json catalog_to_json(const AttributeCatalog& c) {
  json attrs = json::array();
  for (const auto& a : c.attributes())
    attrs.push_back({{"base", a.base}, {"trend", std::string(to_string(a.trend))}, {"display", a.display}});
  return {{"version", c.version()}, {"attributes", attrs}};
}

inline AttributeCatalog catalog_from_json(const json& j) {
  try {
    std::vector<TrendedAttribute> attrs;
    for (const auto& a : j.at("attributes"))
      attrs.push_back({a.at("base").get<std::string>(), trend_from_string(a.at("trend").get<std::string>()),
                       a.at("display").get<std::string>()});
    return AttributeCatalog(j.at("version").get<std::string>(), std::move(attrs));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("catalog: ") + e.what());
  }
}

inline AttributeCatalog load_catalog(const std::filesystem::path& p) {
  return catalog_from_json(parse_json(read_file(p), p.string()));
}

// ---- links & networks ----
// A link is {"cause": "<display>", "effect": "<display>"}; displays resolve through the catalog.

inline json link_to_json(const CausalLink& l) {
  return {{"cause", l.cause.display}, {"effect", l.effect.display}};
}

inline CausalLink link_from_json(const json& j, const AttributeCatalog& catalog) {
  try {
    return {catalog.at(j.at("cause").get<std::string>()), catalog.at(j.at("effect").get<std::string>())};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("link: ") + e.what());
  }
}

inline NetworkStatus status_from_string(const std::string& s) {
  for (auto st : {NetworkStatus::Pending, NetworkStatus::Accepted, NetworkStatus::Rejected,
                  NetworkStatus::Flagged})
    if (s == to_string(st)) return st;
  throw Error(ErrorCode::ParseError, "unknown network status '" + s + "'");
}

inline json network_to_json(const WorkerNetwork& n) {
  json links = json::array();
  for (const auto& l : n.links) links.push_back(link_to_json(l));
  return {{"worker_id", n.worker_id},
          {"links", links},
          {"confidence", n.confidence},
          {"status", std::string(to_string(n.status))}};
}

inline WorkerNetwork network_from_json(const json& j, const AttributeCatalog& catalog) {
  try {
    WorkerNetwork n;
    n.worker_id = j.at("worker_id").get<std::string>();
    for (const auto& l : j.at("links")) n.links.push_back(link_from_json(l, catalog));
    n.confidence = j.value("confidence", 0);
    n.status = status_from_string(j.value("status", std::string("pending")));
    return n;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("network: ") + e.what());
  }
}

inline std::vector<WorkerNetwork> parse_networks_jsonl(const std::string& text,
                                                       const AttributeCatalog& catalog) {
  std::vector<WorkerNetwork> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(network_from_json(parse_json(line, "networks line " + std::to_string(lineno)), catalog));
  }
  return out;
}

inline std::vector<WorkerNetwork> load_networks(const std::filesystem::path& p,
                                                const AttributeCatalog& catalog) {
  return parse_networks_jsonl(read_file(p), catalog);
}

inline std::string networks_to_jsonl(const std::vector<WorkerNetwork>& nets) {
  std::string out;
  for (const auto& n : nets) out += network_to_json(n).dump() + "\n";
  return out;
}

// ---- expert networks ----
// {"expert_id": "...", "links": [{"cause","effect","reference"?}]}

inline ExpertNetwork expert_from_json(const json& j, const AttributeCatalog& catalog) {
  try {
    ExpertNetwork e;
    e.expert_id = j.at("expert_id").get<std::string>();
    for (const auto& lj : j.at("links")) {
      auto l = link_from_json(lj, catalog);
      e.links.insert(l);
      if (lj.contains("reference")) e.references[l] = lj.at("reference").get<std::string>();
    }
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("expert network: ") + ex.what());
  }
}

inline ExpertNetwork load_expert(const std::filesystem::path& p, const AttributeCatalog& catalog) {
  return expert_from_json(parse_json(read_file(p), p.string()), catalog);
}

// ---- CSV tables ----

namespace detail {
inline std::vector<csv::Row> body(const std::string& text, const std::vector<std::string>& header,
                                  const std::string& what) {
  auto rows = csv::parse(text);
  if (rows.empty() || rows.front() != header) {
    std::string h;
    for (const auto& c : header) h += (h.empty() ? "" : ",") + c;
    throw Error(ErrorCode::ParseError, what + ": expected header " + h);
  }
  rows.erase(rows.begin());
  for (const auto& r : rows)
    if (r.size() != header.size()) throw Error(ErrorCode::ParseError, what + ": wrong column count");
  return rows;
}

inline int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, what + ": not an integer: '" + s + "'");
  }
}
}  // namespace detail

// cause,effect,score,note
inline std::map<CausalLink, int> parse_deliberations(const std::string& text,
                                                     const AttributeCatalog& catalog) {
  std::map<CausalLink, int> out;
  for (const auto& r : detail::body(text, {"cause", "effect", "score", "note"}, "deliberations"))
    out[{catalog.at(r[0]), catalog.at(r[1])}] = detail::parse_int(r[2], "deliberations score");
  return out;
}

// cause,effect,cs,provenance sorted by (cause.display, effect.display).
inline std::string credibility_to_csv(const CredibilityMap& m) {
  std::string out = "cause,effect,cs,provenance\n";
  for (const auto& [l, cs] : m.scores) {
    out += csv::join({l.cause.display, l.effect.display, std::to_string(cs),
                      std::string(to_string(m.provenance.at(l)))});
    out += '\n';
  }
  return out;
}

inline Provenance provenance_from_string(const std::string& s) {
  for (auto p : {Provenance::AbsentAll, Provenance::PresentAll, Provenance::Deliberated})
    if (s == to_string(p)) return p;
  throw Error(ErrorCode::ParseError, "unknown provenance '" + s + "'");
}

inline CredibilityMap parse_credibility(const std::string& text, const AttributeCatalog& catalog) {
  CredibilityMap m;
  for (const auto& r : detail::body(text, {"cause", "effect", "cs", "provenance"}, "credibility")) {
    CausalLink l{catalog.at(r[0]), catalog.at(r[1])};
    const int cs = detail::parse_int(r[2], "credibility cs");
    if (cs < kMinCredibility || cs > kMaxCredibility)
      throw Error(ErrorCode::ScoreOutOfRange, "credibility cs " + r[2]);
    m.scores[l] = cs;
    m.provenance[l] = provenance_from_string(r[3]);
  }
  return m;
}

// cause,effect,votes
inline AggregatedNetwork parse_votes(const std::string& text, const AttributeCatalog& catalog) {
  AggregatedNetwork agg;
  for (const auto& r : detail::body(text, {"cause", "effect", "votes"}, "votes")) {
    CausalLink l{catalog.at(r[0]), catalog.at(r[1])};
    const int v = detail::parse_int(r[2], "votes");
    if (v < 0) throw Error(ErrorCode::ParseError, "negative vote count");
    if (v > 0) agg.votes[l] = v;
  }
  return agg;
}

inline std::string votes_to_csv(const AggregatedNetwork& agg) {
  std::string out = "cause,effect,votes\n";
  for (const auto& [l, v] : agg.votes)
    out += csv::join({l.cause.display, l.effect.display, std::to_string(v)}) + "\n";
  return out;
}

// Square matrix: header row and first column are attribute displays in catalog order,
// cell (row=cause, col=effect) is the vote count.
inline std::string adjacency_csv(const AggregatedNetwork& agg, const AttributeCatalog& catalog) {
  std::string out;
  csv::Row header{""};
  for (const auto& a : catalog.attributes()) header.push_back(a.display);
  out += csv::join(header) + "\n";
  for (const auto& c : catalog.attributes()) {
    csv::Row row{c.display};
    for (const auto& e : catalog.attributes())
      row.push_back(std::to_string(c == e ? 0 : agg.votes_for({c, e})));
    out += csv::join(row) + "\n";
  }
  return out;
}

// ---- illusion query ----
// {"bogus": [...], "true": "...", "outcome": [...], "max_hops": 4}

inline IllusionQuery query_from_json(const json& j, const AttributeCatalog& catalog) {
  try {
    IllusionQuery q;
    for (const auto& b : j.at("bogus")) q.bogus_causes.insert(catalog.at(b.get<std::string>()));
    q.true_cause = catalog.at(j.at("true").get<std::string>());
    for (const auto& o : j.at("outcome")) q.outcomes.insert(catalog.at(o.get<std::string>()));
    q.max_hops = j.value("max_hops", std::size_t{4});
    q.validate();
    return q;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("query: ") + e.what());
  }
}

inline json rational_to_json(const Rational& r) {
  return {{"value", to_double(r)}, {"exact", to_fraction_string(r)}};
}

inline json path_to_json(const PathSupport& p) {
  json nodes = json::array();
  for (const auto& n : p.path) nodes.push_back(n.display);
  return {{"path", nodes},
          {"hops", p.hops()},
          {"link_votes", p.link_votes},
          {"weakest", p.weakest},
          {"average", rational_to_json(p.average)}};
}

inline json trial_matrix_to_json(const TrialMatrix& m) {
  json cells = json::array();
  for (const auto& c : m.cells) cells.push_back(c ? rational_to_json(*c) : json(nullptr));
  return {{"cause", m.cause_label}, {"outcome", m.outcome_label}, {"cells", cells}};
}

}  // namespace causalnet::io
