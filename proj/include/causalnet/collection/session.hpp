#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <type_traits>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "causalnet/collection/sassy.hpp"
#include "causalnet/collection/store.hpp"
#include "causalnet/core.hpp"
#include "causalnet/error.hpp"
#include "causalnet/groundtruth.hpp"
#include "causalnet/io.hpp"
#include "causalnet/metrics.hpp"
#include "causalnet/qualitycontrol.hpp"

namespace causalnet::collection {

using nlohmann::json;

enum class Stage { Instructions, Test, Demographics, Creation, Alteration, Evaluation, Usability, Complete };

inline constexpr std::array<Stage, 8> kAllStages{Stage::Instructions, Stage::Test,       Stage::Demographics,
                                                 Stage::Creation,     Stage::Alteration, Stage::Evaluation,
                                                 Stage::Usability,    Stage::Complete};

constexpr std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Instructions: return "instructions";
    case Stage::Test: return "test";
    case Stage::Demographics: return "demographics";
    case Stage::Creation: return "creation";
    case Stage::Alteration: return "alteration";
    case Stage::Evaluation: return "evaluation";
    case Stage::Usability: return "usability";
    case Stage::Complete: return "complete";
  }
  return "instructions";
}

inline Stage stage_from_string(const std::string& s) {
  for (auto st : kAllStages)
    if (s == to_string(st)) return st;
  throw Error(ErrorCode::ParseError, "unknown stage '" + s + "'");
}

inline constexpr std::string_view kDecline = "decline";
inline constexpr int kLikertMin = 1;
inline constexpr int kLikertMax = 5;

struct Session {
  std::string id;
  Stage stage = Stage::Instructions;
  int cohort = 1;
  std::vector<std::string> attribute_order;  // displays
  std::vector<WorkerNetwork> networks;
  std::vector<std::string> demographics;
  std::vector<int> sassy_answers;
  std::optional<Segment> segment;
  std::optional<int> confidence;
  std::vector<int> usability;
  std::optional<std::string> verification_code;
  int test_attempts = 0;

  friend bool operator==(const Session&, const Session&) = default;
};

inline json session_to_json(const Session& s) {
  json nets = json::array();
  for (const auto& n : s.networks) nets.push_back(io::network_to_json(n));
  return {{"id", s.id},
          {"stage", std::string(to_string(s.stage))},
          {"cohort", s.cohort},
          {"attribute_order", s.attribute_order},
          {"networks", nets},
          {"demographics", s.demographics},
          {"sassy_answers", s.sassy_answers},
          {"segment", s.segment ? json(std::string(to_string(*s.segment))) : json(nullptr)},
          {"confidence", s.confidence ? json(*s.confidence) : json(nullptr)},
          {"usability", s.usability},
          {"verification_code", s.verification_code ? json(*s.verification_code) : json(nullptr)},
          {"test_attempts", s.test_attempts}};
}

inline Session session_from_json(const json& j, const AttributeCatalog& catalog) {
  try {
    Session s;
    s.id = j.at("id").get<std::string>();
    s.stage = stage_from_string(j.at("stage").get<std::string>());
    s.cohort = j.at("cohort").get<int>();
    s.attribute_order = j.at("attribute_order").get<std::vector<std::string>>();
    for (const auto& n : j.at("networks")) s.networks.push_back(io::network_from_json(n, catalog));
    s.demographics = j.at("demographics").get<std::vector<std::string>>();
    s.sassy_answers = j.at("sassy_answers").get<std::vector<int>>();
    if (!j.at("segment").is_null()) s.segment = segment_from_string(j.at("segment").get<std::string>());
    if (!j.at("confidence").is_null()) s.confidence = j.at("confidence").get<int>();
    s.usability = j.at("usability").get<std::vector<int>>();
    if (!j.at("verification_code").is_null())
      s.verification_code = j.at("verification_code").get<std::string>();
    s.test_attempts = j.at("test_attempts").get<int>();
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("session: ") + e.what());
  }
}

struct StudyConfig {
  CausalLink gate_link;
  std::vector<std::string> demographic_questions;  // 8 in the shipped config
  std::vector<std::string> usability_statements;   // 5 usability + 2 knowledge
};

inline StudyConfig study_config_from_json(const json& j, const AttributeCatalog& catalog) {
  try {
    StudyConfig c{io::link_from_json(j.at("gate_link"), catalog),
                  j.at("demographic_questions").get<std::vector<std::string>>(),
                  j.at("usability_statements").get<std::vector<std::string>>()};
    if (c.demographic_questions.empty() || c.usability_statements.empty())
      throw Error(ErrorCode::ParseError, "study config needs questions and statements");
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("study config: ") + e.what());
  }
}

inline StudyConfig load_study_config(const std::filesystem::path& p, const AttributeCatalog& catalog) {
  return study_config_from_json(io::parse_json(io::read_file(p), p.string()), catalog);
}

struct ServiceOptions {
  ProtocolProfile profile = ProtocolProfile::final_study();
  std::optional<std::filesystem::path> data_dir;
  std::optional<std::uint64_t> seed;  // attribute-order shuffling only
  double saturation_epsilon = kDefaultSaturationEpsilon;
};

struct LinkOutcome {
  std::size_t network = 0;
  std::size_t links_remaining = 0;  // in the current network
  Stage stage = Stage::Creation;
};

// Drop-down contents for the next round: round 1 offers everything; later rounds pair
// one `selected` node with one `unselected` node.
struct LinkOptions {
  std::size_t network = 0;
  std::size_t round = 1;
  std::vector<std::string> selected;
  std::vector<std::string> unselected;
};

struct AlterationRequest {
  std::size_t network = 0;
  AlterationAction action;
};

struct CohortReport {
  int cohort = 0;
  std::size_t sessions_completed = 0;
  std::size_t networks_accepted = 0;
  std::size_t networks_pending = 0;
  std::size_t networks_rejected = 0;
  AggregatedNetwork aggregate;
  std::optional<SaturationResult> saturation;  // nullopt: first cohort or nothing to compare
  std::vector<ExplorationEntry> exploration;
  std::map<Segment, std::size_t> segments;
  bool all_segments_present = false;
};

inline json cohort_report_to_json(const CohortReport& r, double epsilon) {
  json votes = json::array();
  for (const auto& [l, v] : r.aggregate.votes)
    votes.push_back({{"cause", l.cause.display}, {"effect", l.effect.display}, {"votes", v}});
  json sat = {{"applicable", r.saturation.has_value()}};
  if (r.saturation) {
    sat["delta"] = r.saturation->delta;
    sat["epsilon"] = epsilon;
    sat["saturated"] = r.saturation->saturated;
    sat["exploration_complete"] = r.saturation->exploration_complete;
  }
  json expl = json::array();
  for (const auto& e : r.exploration)
    expl.push_back({{"attribute", e.attribute.display},
                    {"appearance_count", e.appearance_count},
                    {"worker_count", e.worker_count}});
  json segs = json::object();
  for (auto s : kAllSegments) segs[std::string(to_string(s))] = r.segments.count(s) ? r.segments.at(s) : 0;
  return {{"cohort", r.cohort},
          {"sessions_completed", r.sessions_completed},
          {"networks", {{"accepted", r.networks_accepted},
                        {"pending", r.networks_pending},
                        {"rejected", r.networks_rejected}}},
          {"total_votes", r.aggregate.total_votes()},
          {"votes", votes},
          {"saturation", sat},
          {"exploration", expl},
          {"sassy_segments", segs},
          {"all_segments_present", r.all_segments_present}};
}

inline std::string random_token(std::size_t length) {
  static constexpr std::string_view alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
  static_assert(alphabet.size() == 64);
  std::random_device rd;
  std::string out;
  out.reserve(length);
  while (out.size() < length) {
    auto word = rd();
    for (int k = 0; k < 5 && out.size() < length; ++k, word >>= 6) out += alphabet[word & 63u];
  }
  return out;
}

inline constexpr std::size_t kVerificationCodeLength = 12;
inline constexpr std::size_t kSessionIdLength = 22;

// Per-session protocol state machine plus study-level cohort control and the QC queue.
// Each session's transitions run under its own mutex on a copy that is journaled before it
// replaces the live state, so a failed call never leaves a partial update behind.
class SessionService {
 public:
  SessionService(AttributeCatalog catalog, StudyConfig config, SassyTable sassy, ServiceOptions options = {},
                 std::optional<CredibilityMap> credibility = std::nullopt)
      : catalog_(std::move(catalog)),
        config_(std::move(config)),
        sassy_(std::move(sassy)),
        options_(std::move(options)),
        credibility_(std::move(credibility)),
        rng_(options_.seed ? *options_.seed : std::random_device{}()) {
    if (!catalog_.contains(config_.gate_link))
      throw Error(ErrorCode::CatalogMiss, "gate link is not in the catalog");
    if (options_.data_dir) {
      std::filesystem::create_directories(*options_.data_dir);
      load(*options_.data_dir);
      journal_ = std::make_unique<Journal>(*options_.data_dir / "sessions.jsonl");
      reviews_ = ReviewQueue::load(*options_.data_dir / "reviews.jsonl");
      reconcile_reviews();
    } else {
      journal_ = std::make_unique<Journal>();
      reviews_ = std::make_unique<ReviewQueue>();
    }
  }

  const AttributeCatalog& catalog() const { return catalog_; }
  const StudyConfig& config() const { return config_; }
  const ProtocolProfile& profile() const { return options_.profile; }
  const ServiceOptions& options() const { return options_; }

  Session create_session() {
    std::shared_lock study(study_mu_);
    if (stopped_) throw Error(ErrorCode::CohortClosed, "the study has been stopped");
    Session s;
    s.cohort = cohort_;
    for (const auto& a : catalog_.attributes()) s.attribute_order.push_back(a.display);
    if (options_.profile.randomize_attribute_order) {
      std::lock_guard lock(rng_mu_);
      std::shuffle(s.attribute_order.begin(), s.attribute_order.end(), rng_);
    }
    auto entry = std::make_shared<Entry>();
    {
      std::unique_lock lock(sessions_mu_);
      do {
        s.id = random_token(kSessionIdLength);
      } while (sessions_.count(s.id));
      entry->session = s;
      journal_->append({{"type", "session"}, {"session", session_to_json(s)}});
      sessions_.emplace(s.id, entry);
    }
    return s;
  }

  Session get(const std::string& id) const {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    return e->session;
  }

  std::vector<Session> sessions() const {
    std::vector<std::shared_ptr<Entry>> entries;
    {
      std::shared_lock lock(sessions_mu_);
      for (const auto& [_, e] : sessions_) entries.push_back(e);
    }
    std::vector<Session> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
      std::lock_guard lock(e->mu);
      out.push_back(e->session);
    }
    return out;
  }

  // Instructions -> Test on the first attempt; a correct gate link moves on to Demographics.
  bool submit_test(const std::string& id, const CausalLink& answer) {
    return mutate(id, [&](Session& s) {
      require(s, {Stage::Instructions, Stage::Test});
      s.stage = Stage::Test;
      ++s.test_attempts;
      const bool pass = answer == config_.gate_link;
      if (pass) s.stage = Stage::Demographics;
      return pass;
    });
  }

  Segment submit_demographics(const std::string& id, const std::vector<std::string>& answers,
                              const std::vector<int>& sassy_answers) {
    return mutate(id, [&](Session& s) {
      require(s, {Stage::Demographics});
      if (answers.size() != config_.demographic_questions.size())
        throw Error(ErrorCode::MalformedAnswers,
                    "expected " + std::to_string(config_.demographic_questions.size()) +
                        " demographic answers, got " + std::to_string(answers.size()));
      for (const auto& a : answers)
        if (a.find_first_not_of(" \t") == std::string::npos)
          throw Error(ErrorCode::MalformedAnswers, "blank demographic answer (use \"decline\")");
      const Segment seg = sassy_.classify(sassy_answers);
      s.demographics = answers;
      s.sassy_answers = sassy_answers;
      s.segment = seg;
      s.networks = {empty_network(s, 0)};
      s.stage = Stage::Creation;
      return seg;
    });
  }

  LinkOptions link_options(const std::string& id) const {
    const Session s = get(id);
    require(s, {Stage::Creation});
    const auto& net = s.networks.back();
    LinkOptions o;
    o.network = s.networks.size() - 1;
    o.round = net.links.size() + 1;
    for (const auto& d : s.attribute_order) {
      if (net.contains_node(catalog_.at(d)))
        o.selected.push_back(d);
      else
        o.unselected.push_back(d);
    }
    return o;
  }

  // Link violations surface as Error(InvalidLink) carrying the violation name in what().
  LinkOutcome submit_link(const std::string& id, const CausalLink& candidate) {
    return mutate(id, [&](Session& s) {
      require(s, {Stage::Creation});
      auto& net = s.networks.back();
      const auto limit = options_.profile.links_per_network;
      if (auto v = validate_next_link(net, candidate, &catalog_, limit))
        throw LinkRejected(*v);
      net.links.push_back(candidate);
      LinkOutcome out{s.networks.size() - 1, limit - net.links.size(), Stage::Creation};
      if (net.links.size() == limit) {
        if (s.networks.size() < options_.profile.networks_per_worker)
          s.networks.push_back(empty_network(s, s.networks.size()));
        else
          s.stage = Stage::Alteration;
      }
      out.stage = s.stage;
      return out;
    });
  }

  // All actions apply in order, or none do. Deletion must leave a non-empty tree.
  void submit_alteration(const std::string& id, const std::vector<AlterationRequest>& actions) {
    mutate(id, [&](Session& s) {
      require(s, {Stage::Alteration});
      for (const auto& a : actions) {
        if (a.network >= s.networks.size())
          throw Error(ErrorCode::IndexOutOfRange, "no network " + std::to_string(a.network));
        auto next = apply_alteration(s.networks[a.network], a.action, options_.profile);
        if (next.links.empty() || !is_tree(next))
          throw Error(ErrorCode::InvalidLink, "deleting that link would split or empty the network");
        s.networks[a.network] = std::move(next);
      }
      s.stage = Stage::Evaluation;
      return 0;
    });
  }

  void submit_confidence(const std::string& id, int confidence) {
    mutate(id, [&](Session& s) {
      require(s, {Stage::Evaluation});
      if (confidence < kLikertMin || confidence > kLikertMax)
        throw Error(ErrorCode::OutOfRange, "confidence must be 1..5");
      s.confidence = confidence;
      for (auto& n : s.networks) n.confidence = confidence;
      s.stage = Stage::Usability;
      return 0;
    });
  }

  // Final transition: stores the ratings, finalizes the networks for review and issues the code.
  std::string submit_usability(const std::string& id, const std::vector<int>& ratings) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    Session s = e->session;
    require(s, {Stage::Usability});
    if (ratings.size() != config_.usability_statements.size())
      throw Error(ErrorCode::MalformedAnswers,
                  "expected " + std::to_string(config_.usability_statements.size()) + " ratings");
    for (int r : ratings)
      if (r < kLikertMin || r > kLikertMax) throw Error(ErrorCode::OutOfRange, "ratings must be 1..5");
    s.usability = ratings;
    s.stage = Stage::Complete;
    for (auto& n : s.networks) n.status = NetworkStatus::Pending;
    s.verification_code = issue_code();
    journal_->append({{"type", "session"}, {"session", session_to_json(s)}});
    e->session = s;
    enqueue_reviews(s);
    return *s.verification_code;
  }

  // ---- study administration ----

  int current_cohort() const {
    std::shared_lock lock(study_mu_);
    return cohort_;
  }

  bool stopped() const {
    std::shared_lock lock(study_mu_);
    return stopped_;
  }

  // Closes the open cohort and opens the next; returns the new cohort number.
  int close_cohort() {
    std::unique_lock lock(study_mu_);
    if (stopped_) throw Error(ErrorCode::CohortClosed, "the study has been stopped");
    ++cohort_;
    journal_->append({{"type", "study"}, {"cohort", cohort_}, {"stopped", stopped_}});
    return cohort_;
  }

  // Closes the open cohort for good; new sessions are refused.
  void stop_study() {
    std::unique_lock lock(study_mu_);
    stopped_ = true;
    journal_->append({{"type", "study"}, {"cohort", cohort_}, {"stopped", stopped_}});
  }

  bool cohort_closed(int n) const {
    std::shared_lock lock(study_mu_);
    return n < cohort_ || (n == cohort_ && stopped_);
  }

  CohortReport cohort_report(int n) const {
    {
      std::shared_lock lock(study_mu_);
      if (n < 1 || n > cohort_) throw Error(ErrorCode::UnknownCohort, "no cohort " + std::to_string(n));
      if (n == cohort_ && !stopped_) throw Error(ErrorCode::CohortOpen, "cohort " + std::to_string(n) + " is still open");
    }
    const auto all = sessions();
    const auto records = reviews_->records();
    std::map<std::string, ReviewDecision> decision;
    for (const auto& r : records) decision[r.worker_id] = r.decision;

    CohortReport rep;
    rep.cohort = n;
    std::vector<WorkerNetwork> upto, before;
    for (const auto& s : all) {
      if (s.stage != Stage::Complete || s.cohort > n) continue;
      ++rep.sessions_completed;
      if (s.segment) ++rep.segments[*s.segment];
      for (auto net : s.networks) {
        auto it = decision.find(net.worker_id);
        const auto d = it == decision.end() ? ReviewDecision::Pending : it->second;
        net.status = status_for(d);
        if (d == ReviewDecision::Accept) ++rep.networks_accepted;
        if (d == ReviewDecision::Pending) ++rep.networks_pending;
        if (d == ReviewDecision::Reject) ++rep.networks_rejected;
        if (s.cohort < n) before.push_back(net);
        upto.push_back(std::move(net));
      }
    }
    rep.aggregate = aggregate_accepted(upto);
    const auto prev = aggregate_accepted(before);
    if (n > 1 && prev.total_votes() > 0 && rep.aggregate.total_votes() > 0)
      rep.saturation = saturation(prev, rep.aggregate, catalog_, options_.saturation_epsilon);
    std::vector<WorkerNetwork> accepted;
    for (const auto& net : upto)
      if (net.status == NetworkStatus::Accepted) accepted.push_back(net);
    rep.exploration = exploration_stats(accepted, catalog_);
    rep.all_segments_present = rep.segments.size() == kAllSegments.size();
    return rep;
  }

  std::vector<ReviewRecord> reviews() const { return reviews_->records(); }

  ReviewRecord review(const std::string& worker_id, ReviewDecision decision, std::string note) {
    return reviews_->decide(worker_id, decision, std::move(note));
  }

  // Finalized networks in review order with their current review status applied.
  std::vector<WorkerNetwork> finalized_networks() const {
    std::map<std::string, WorkerNetwork> by_worker;
    for (const auto& s : sessions())
      if (s.stage == Stage::Complete)
        for (const auto& n : s.networks) by_worker[n.worker_id] = n;
    std::vector<WorkerNetwork> out;
    for (const auto& r : reviews_->records()) {
      auto it = by_worker.find(r.worker_id);
      if (it == by_worker.end()) continue;
      auto net = it->second;
      net.status = r.auto_flagged && r.decision == ReviewDecision::Pending ? NetworkStatus::Flagged
                                                                           : status_for(r.decision);
      out.push_back(std::move(net));
    }
    return out;
  }

  // Canonical dump of every session, sorted by id.
  std::string snapshot_jsonl() const {
    auto all = sessions();
    std::sort(all.begin(), all.end(), [](const Session& a, const Session& b) { return a.id < b.id; });
    std::string out;
    for (const auto& s : all) out += session_to_json(s).dump() + "\n";
    return out;
  }

  // Thrown for round-rule violations; code() is InvalidLink.
  class LinkRejected : public Error {
   public:
    explicit LinkRejected(LinkViolation v)
        : Error(ErrorCode::InvalidLink, std::string(to_string(v))), violation_(v) {}
    LinkViolation violation() const { return violation_; }

   private:
    LinkViolation violation_;
  };

 private:
  struct Entry {
    mutable std::mutex mu;
    Session session;
  };

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::shared_lock lock(sessions_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session " + id);
    return it->second;
  }

  static void require(const Session& s, std::initializer_list<Stage> allowed) {
    for (auto st : allowed)
      if (s.stage == st) return;
    throw Error(ErrorCode::WrongStage, "session is in stage " + std::string(to_string(s.stage)));
  }

  template <class F>
  std::invoke_result_t<F&, Session&> mutate(const std::string& id, F&& f) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    Session next = e->session;
    auto commit = [&] {
      journal_->append({{"type", "session"}, {"session", session_to_json(next)}});
      e->session = std::move(next);
    };
    if constexpr (std::is_void_v<std::invoke_result_t<F&, Session&>>) {
      f(next);
      commit();
    } else {
      auto result = f(next);
      commit();
      return result;
    }
  }

  WorkerNetwork empty_network(const Session& s, std::size_t k) const {
    WorkerNetwork n;
    n.worker_id = options_.profile.networks_per_worker == 1 ? s.id : s.id + "-" + std::to_string(k + 1);
    return n;
  }

  std::string issue_code() {
    std::lock_guard lock(codes_mu_);
    std::string code;
    do {
      code = random_token(kVerificationCodeLength);
    } while (!codes_.insert(code).second);
    return code;
  }

  void enqueue_reviews(const Session& s) {
    std::lock_guard lock(enqueue_mu_);
    for (const auto& n : s.networks) {
      if (reviews_->get(n.worker_id)) continue;
      const std::size_t index = next_network_index_++;
      if (credibility_) {
        reviews_->add(flag_network(n, index, *credibility_, options_.profile.flag_threshold()));
      } else {
        reviews_->add({n.worker_id, index, 0, false, ReviewDecision::Pending, ""});
      }
    }
  }

  void load(const std::filesystem::path& dir) {
    for (const auto& j : Journal::replay(dir / "sessions.jsonl")) {
      const auto type = j.value("type", std::string());
      if (type == "session") {
        auto s = session_from_json(j.at("session"), catalog_);
        if (s.verification_code) codes_.insert(*s.verification_code);
        auto& e = sessions_[s.id];
        if (!e) e = std::make_shared<Entry>();
        e->session = std::move(s);
      } else if (type == "study") {
        cohort_ = j.at("cohort").get<int>();
        stopped_ = j.at("stopped").get<bool>();
      }
    }
  }

  // A crash between the session write and the review write leaves finalized networks
  // without a review record; add them in session-id order.
  void reconcile_reviews() {
    next_network_index_ = reviews_->records().size();
    for (const auto& [_, e] : sessions_)
      if (e->session.stage == Stage::Complete) enqueue_reviews(e->session);
  }

  AttributeCatalog catalog_;
  StudyConfig config_;
  SassyTable sassy_;
  ServiceOptions options_;
  std::optional<CredibilityMap> credibility_;

  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;

  mutable std::shared_mutex study_mu_;
  int cohort_ = 1;
  bool stopped_ = false;

  std::mutex rng_mu_;
  std::mt19937_64 rng_;

  std::mutex codes_mu_;
  std::set<std::string> codes_;

  std::mutex enqueue_mu_;
  std::size_t next_network_index_ = 0;

  std::unique_ptr<Journal> journal_;
  std::unique_ptr<ReviewQueue> reviews_;
};

}  // namespace causalnet::collection
