#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalnet/core.hpp"
#include "causalnet/csv.hpp"
#include "causalnet/error.hpp"
#include "causalnet/groundtruth.hpp"
#include "causalnet/illusion.hpp"
#include "causalnet/io.hpp"
#include "causalnet/metrics.hpp"
#include "causalnet/pathlab.hpp"
#include "causalnet/qualitycontrol.hpp"

namespace causalnet::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 64;

// Process exit status per error code; every code maps to its own value.
constexpr int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::MissingDecision: return 2;
    case ErrorCode::TooFewExperts: return 3;
    case ErrorCode::CatalogMiss: return 4;
    case ErrorCode::ParseError: return 5;
    case ErrorCode::IoError: return 6;
    case ErrorCode::MissingCredibility: return 7;
    case ErrorCode::EmptyAcceptedSet: return 8;
    case ErrorCode::InvalidArgument: return 9;
    case ErrorCode::InvalidCatalog: return 10;
    case ErrorCode::InvalidLink: return 11;
    case ErrorCode::EmptyNetwork: return 12;
    case ErrorCode::IndexOutOfRange: return 13;
    case ErrorCode::ActionDisabledByProfile: return 14;
    case ErrorCode::NotOnWorklist: return 15;
    case ErrorCode::ScoreOutOfRange: return 16;
    case ErrorCode::NetworkNotAccepted: return 17;
    case ErrorCode::ConstantVector: return 18;
    case ErrorCode::TooFewPairs: return 19;
    case ErrorCode::EmptyAggregate: return 20;
    case ErrorCode::PartialMatrix: return 21;
    case ErrorCode::ZeroRow: return 22;
    case ErrorCode::NoTruePath: return 23;
    case ErrorCode::AlreadyDecided: return 24;
    case ErrorCode::UnknownRecord: return 25;
    case ErrorCode::WrongStage: return 26;
    case ErrorCode::MalformedAnswers: return 27;
    case ErrorCode::OutOfRange: return 28;
    case ErrorCode::CohortClosed: return 29;
    case ErrorCode::CohortOpen: return 30;
    case ErrorCode::UnknownSession: return 31;
    case ErrorCode::UnknownCohort: return 32;
  }
  return kExitInternal;
}

struct PipelineConfig {
  fs::path catalog;
  std::optional<fs::path> networks;
  std::vector<fs::path> experts;
  std::optional<fs::path> deliberations;
  std::optional<fs::path> credibility;  // precomputed credibility CSV instead of experts
  std::optional<fs::path> reviews;
  std::optional<fs::path> previous;     // earlier networks for the saturation check
  std::optional<fs::path> votes;
  std::optional<fs::path> query;
  std::int64_t threshold = kDefaultSignificanceThreshold;
  double epsilon = kDefaultSaturationEpsilon;
  std::optional<fs::path> out;
  std::string profile = "final";
};

// Keys mirror the long flag names. Relative paths resolve against the config file's directory.
inline void merge_config_json(PipelineConfig& cfg, const json& j, const fs::path& base) {
  auto path = [&](const json& v) {
    fs::path p = v.get<std::string>();
    return p.is_relative() ? base / p : p;
  };
  try {
    if (j.contains("catalog")) cfg.catalog = path(j["catalog"]);
    if (j.contains("networks")) cfg.networks = path(j["networks"]);
    if (j.contains("experts")) {
      cfg.experts.clear();
      for (const auto& e : j["experts"]) cfg.experts.push_back(path(e));
    }
    if (j.contains("deliberations")) cfg.deliberations = path(j["deliberations"]);
    if (j.contains("credibility")) cfg.credibility = path(j["credibility"]);
    if (j.contains("reviews")) cfg.reviews = path(j["reviews"]);
    if (j.contains("previous")) cfg.previous = path(j["previous"]);
    if (j.contains("votes")) cfg.votes = path(j["votes"]);
    if (j.contains("query")) cfg.query = path(j["query"]);
    if (j.contains("threshold")) cfg.threshold = j["threshold"].get<std::int64_t>();
    if (j.contains("epsilon")) cfg.epsilon = j["epsilon"].get<double>();
    if (j.contains("out")) cfg.out = path(j["out"]);
    if (j.contains("profile")) cfg.profile = j["profile"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
}

inline ProtocolProfile profile_from_name(const std::string& name) {
  if (name == "final") return ProtocolProfile::final_study();
  if (name == "formative") return ProtocolProfile::formative();
  throw Error(ErrorCode::InvalidArgument, "unknown profile '" + name + "' (final|formative)");
}

// Output files by name, written only after every stage has succeeded.
struct Report {
  std::map<std::string, std::string> files;
  std::string summary;
};

inline void write_report(const Report& r, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [name, content] : r.files) io::write_file_atomic(dir / name, content);
}

// MissingDecision carrying the links still awaiting a deliberated score.
class WorklistPending : public Error {
 public:
  WorklistPending(std::string worklist_csv, std::size_t n)
      : Error(ErrorCode::MissingDecision, std::to_string(n) + " worklist link(s) lack a deliberated score"),
        worklist_(std::move(worklist_csv)) {}
  const std::string& worklist() const { return worklist_; }

 private:
  std::string worklist_;
};

namespace detail {

inline void require_file(const std::optional<fs::path>& p, const std::string& flag) {
  if (!p) throw Error(ErrorCode::InvalidArgument, "missing required input --" + flag);
  if (!fs::exists(*p)) throw Error(ErrorCode::IoError, "no such file: " + p->string());
}

inline std::vector<WorkerNetwork> load_networks(const fs::path& p, const AttributeCatalog& c,
                                                const ProtocolProfile& profile) {
  auto nets = io::load_networks(p, c);
  for (const auto& n : nets) {
    if (n.links.empty() || n.links.size() > profile.links_per_network)
      throw Error(ErrorCode::InvalidLink, "network " + n.worker_id + " has " + std::to_string(n.links.size()) +
                                              " links under the '" + profile.name + "' profile");
    if (!is_tree(n)) throw Error(ErrorCode::InvalidLink, "network " + n.worker_id + " is not a tree");
  }
  return nets;
}

inline std::string worklist_csv(const std::vector<CausalLink>& links, const std::vector<ExpertNetwork>& experts) {
  std::string out = "cause,effect,appearances,suggested\n";
  for (const auto& l : links) {
    out += csv::join({l.cause.display, l.effect.display, std::to_string(causalnet::detail::appearance_count(experts, l)),
                      std::to_string(suggest_deliberation_score(l, experts))});
    out += '\n';
  }
  return out;
}

}  // namespace detail

// ---- ground truth ----

inline CredibilityMap build_credibility(const PipelineConfig& cfg, const AttributeCatalog& catalog) {
  for (const auto& e : cfg.experts) detail::require_file(e, "experts");
  if (cfg.deliberations) detail::require_file(cfg.deliberations, "deliberations");
  std::vector<ExpertNetwork> experts;
  for (const auto& e : cfg.experts) experts.push_back(io::load_expert(e, catalog));
  std::map<CausalLink, int> decisions;
  if (cfg.deliberations) decisions = io::parse_deliberations(io::read_file(*cfg.deliberations), catalog);

  const auto draft = merge_expert_networks(experts, catalog);
  const auto missing = missing_decisions(draft, decisions);
  if (!missing.empty()) throw WorklistPending(detail::worklist_csv(missing, experts), missing.size());
  return apply_deliberations(draft, decisions);
}

inline CredibilityMap load_or_build_credibility(const PipelineConfig& cfg, const AttributeCatalog& catalog) {
  if (cfg.credibility) {
    detail::require_file(cfg.credibility, "credibility");
    return io::parse_credibility(io::read_file(*cfg.credibility), catalog);
  }
  if (cfg.experts.empty())
    throw Error(ErrorCode::MissingCredibility, "give --credibility or --experts with --deliberations");
  return build_credibility(cfg, catalog);
}

inline Report cmd_groundtruth(const PipelineConfig& cfg) {
  const auto catalog = io::load_catalog(cfg.catalog);
  const auto cred = build_credibility(cfg, catalog);
  std::map<Provenance, std::size_t> by;
  for (const auto& [_, p] : cred.provenance) ++by[p];
  std::ostringstream s;
  s << "credibility pairs: " << cred.size() << " (absent_all " << by[Provenance::AbsentAll] << ", present_all "
    << by[Provenance::PresentAll] << ", deliberated " << by[Provenance::Deliberated] << ")\n";
  return {{{"credibility.csv", io::credibility_to_csv(cred)}}, s.str()};
}

// ---- quality control ----

inline Report cmd_qc_flag(const PipelineConfig& cfg) {
  const auto catalog = io::load_catalog(cfg.catalog);
  detail::require_file(cfg.networks, "networks");
  const auto profile = profile_from_name(cfg.profile);
  const auto nets = detail::load_networks(*cfg.networks, catalog, profile);
  const auto cred = load_or_build_credibility(cfg, catalog);
  const auto records = flag_networks(nets, cred, profile.flag_threshold());
  std::string jsonl;
  std::size_t flagged = 0;
  for (const auto& r : records) {
    jsonl += io::review_to_json(r).dump() + "\n";
    flagged += r.auto_flagged;
  }
  std::ostringstream s;
  s << "networks: " << records.size() << ", flagged for review: " << flagged << ", threshold "
    << profile.flag_threshold() << " zero-credibility links\n";
  return {{{"reviews.jsonl", jsonl}}, s.str()};
}

inline std::vector<WorkerNetwork> networks_with_reviews(const PipelineConfig& cfg, const AttributeCatalog& catalog) {
  detail::require_file(cfg.networks, "networks");
  auto nets = detail::load_networks(*cfg.networks, catalog, profile_from_name(cfg.profile));
  if (cfg.reviews) {
    detail::require_file(cfg.reviews, "reviews");
    apply_statuses(nets, ReviewQueue::load(*cfg.reviews)->records());
  }
  return nets;
}

inline Report cmd_qc_apply(const PipelineConfig& cfg) {
  const auto catalog = io::load_catalog(cfg.catalog);
  const auto nets = networks_with_reviews(cfg, catalog);
  std::map<NetworkStatus, std::size_t> by;
  for (const auto& n : nets) ++by[n.status];
  std::ostringstream s;
  s << "accepted " << by[NetworkStatus::Accepted] << ", rejected " << by[NetworkStatus::Rejected] << ", flagged "
    << by[NetworkStatus::Flagged] << ", pending " << by[NetworkStatus::Pending] << "\n";
  return {{{"networks.jsonl", io::networks_to_jsonl(nets)}}, s.str()};
}

// ---- analysis ----

inline json histogram_json(const std::vector<std::int64_t>& counts, const std::vector<std::string>& labels) {
  json out = json::array();
  for (std::size_t i = 0; i < counts.size(); ++i) out.push_back({{"bin", labels[i]}, {"count", counts[i]}});
  return out;
}

inline Report cmd_analyze(const PipelineConfig& cfg) {
  // Parse every input before computing anything.
  const auto catalog = io::load_catalog(cfg.catalog);
  const auto nets = networks_with_reviews(cfg, catalog);
  std::optional<std::vector<WorkerNetwork>> previous;
  if (cfg.previous) {
    detail::require_file(cfg.previous, "previous");
    previous = io::load_networks(*cfg.previous, catalog);
  }
  const auto cred = load_or_build_credibility(cfg, catalog);

  std::vector<WorkerNetwork> accepted;
  for (const auto& n : nets)
    if (n.status == NetworkStatus::Accepted) accepted.push_back(n);
  if (accepted.empty()) throw Error(ErrorCode::EmptyAcceptedSet, "no accepted networks to analyze");

  const auto agg = aggregate(accepted);
  const auto pr = pearson_votes_vs_credibility(agg, cred);
  const auto disc = build_discrepancy(agg, cred, cfg.threshold);
  const auto hist = discrepancy_histogram(disc);

  json stats;
  stats["networks"] = {{"total", nets.size()}, {"accepted", accepted.size()}};
  stats["total_votes"] = agg.total_votes();
  stats["distinct_links"] = agg.votes.size();
  stats["pearson"] = {{"r", pr.r}, {"p_value", pr.p_value}, {"n", pr.n}};
  stats["anc_histogram"] =
      histogram_json(anc_histogram(accepted, cred), {"[0,0.5)", "[0.5,1)", "[1,1.5)", "[1.5,2)", "[2,2.5)", "[2.5,3]"});
  stats["confidence_histogram"] = histogram_json(confidence_histogram(accepted), {"1", "2", "3", "4", "5"});

  json ac = json::array();
  for (const auto& [l, _] : agg.votes) {
    const auto avg = link_average_confidence(agg, l);
    ac.push_back({{"cause", l.cause.display},
                  {"effect", l.effect.display},
                  {"votes", agg.votes_for(l)},
                  {"average_confidence", avg ? io::rational_to_json(*avg) : json(nullptr)}});
  }
  stats["link_average_confidence"] = ac;

  json anc_per = json::array();
  for (const auto& n : accepted)
    anc_per.push_back({{"worker_id", n.worker_id}, {"anc", io::rational_to_json(anc(n, cred))}});
  stats["anc"] = anc_per;

  json explo = json::array();
  for (const auto& e : exploration_stats(accepted, catalog))
    explo.push_back({{"attribute", e.attribute.display},
                     {"appearances", e.appearance_count},
                     {"workers", e.worker_count}});
  stats["exploration"] = explo;

  if (previous) {
    const auto prev = aggregate_accepted(*previous);
    const auto sat = saturation(prev, agg, catalog, cfg.epsilon);
    stats["saturation"] = {{"applicable", true},
                           {"delta", sat.delta},
                           {"epsilon", cfg.epsilon},
                           {"exploration_complete", sat.exploration_complete},
                           {"saturated", sat.saturated}};
  } else {
    stats["saturation"] = {{"applicable", false}};
  }
  stats["discrepancy"] = {{"threshold", cfg.threshold},
                          {"pairs", hist.total_all},
                          {"visible", hist.total_visible}};

  Report r;
  r.files["adjacency.csv"] = io::adjacency_csv(agg, catalog);
  r.files["votes.csv"] = io::votes_to_csv(agg);
  r.files["stats.json"] = stats.dump(2) + "\n";
  r.files["discrepancy_misinformed.dot"] = export_discrepancy_dot(disc, DotMode::Misinformed);
  r.files["discrepancy_oblivious.dot"] = export_discrepancy_dot(disc, DotMode::Oblivious);
  r.files["discrepancy_correct.dot"] = export_discrepancy_dot(disc, DotMode::Correct);
  r.files["discrepancy_histogram.csv"] = histogram_csv(hist);

  std::ostringstream s;
  s.precision(6);
  s << "accepted networks: " << accepted.size() << " of " << nets.size() << "\n"
    << "pearson r = " << pr.r << ", p = " << pr.p_value << " (n = " << pr.n << ")\n"
    << "discrepancy pairs: " << hist.total_all << ", visible: " << hist.total_visible << "\n";
  r.summary = s.str();
  return r;
}

// ---- causal illusions ----

inline Report cmd_illusion(const PipelineConfig& cfg) {
  const auto catalog = io::load_catalog(cfg.catalog);
  detail::require_file(cfg.query, "query");
  const auto q = io::query_from_json(io::parse_json(io::read_file(*cfg.query), cfg.query->string()), catalog);
  AggregatedNetwork agg;
  if (cfg.votes) {
    detail::require_file(cfg.votes, "votes");
    agg = io::parse_votes(io::read_file(*cfg.votes), catalog);
  } else if (cfg.networks) {
    agg = aggregate_accepted(networks_with_reviews(cfg, catalog));
  } else {
    throw Error(ErrorCode::InvalidArgument, "give --votes or --networks");
  }

  json report;
  report["bogus_direct_votes"] = bogus_direct_votes(agg, q);
  std::ostringstream s;
  s << "bogus direct votes: " << bogus_direct_votes(agg, q) << "\n";
  for (auto c : {SupportCriterion::Weakest, SupportCriterion::Average}) {
    const std::string name(to_string(c));
    try {
      const auto res = illusion_ratio(agg, q, c);
      json per_hop = json::array();
      for (const auto& p : res.best_per_hop) per_hop.push_back(io::path_to_json(p));
      const auto [bogus_m, true_m] = build_trial_matrices(q, agg, c);
      report[name] = {{"ratio", io::rational_to_json(res.ratio)},
                      {"true_support", io::rational_to_json(res.true_support)},
                      {"path", io::path_to_json(res.path)},
                      {"best_per_hop", per_hop},
                      {"trial_matrices", {io::trial_matrix_to_json(bogus_m), io::trial_matrix_to_json(true_m)}}};
      s << name << ": ratio " << to_fraction_string(res.ratio) << " = " << to_double(res.ratio) << " (true support "
        << to_fraction_string(res.true_support) << ")\n";
      for (const auto& p : res.best_per_hop) {
        s << "  " << p.hops() << " hop(s):";
        for (std::size_t i = 0; i < p.path.size(); ++i) s << (i ? " -> " : " ") << p.path[i].display;
        s << "  votes [";
        for (std::size_t i = 0; i < p.link_votes.size(); ++i) s << (i ? "," : "") << p.link_votes[i];
        s << "]\n";
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoTruePath) throw;
      report[name] = {{"ratio", nullptr}, {"warning", e.what()}};
      s << "warning: " << name << ": " << e.what() << "; ratio omitted\n";
    }
  }
  return {{{"illusion.json", report.dump(2) + "\n"}}, s.str()};
}

}  // namespace causalnet::pipeline
