#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "causalnet/core.hpp"
#include "causalnet/error.hpp"
#include "causalnet/groundtruth.hpp"
#include "causalnet/io.hpp"

namespace causalnet {

enum class ReviewDecision { Pending, Accept, Reject };

constexpr std::string_view to_string(ReviewDecision d) {
  switch (d) {
    case ReviewDecision::Pending: return "pending";
    case ReviewDecision::Accept: return "accept";
    case ReviewDecision::Reject: return "reject";
  }
  return "pending";
}

inline ReviewDecision review_decision_from_string(const std::string& s) {
  for (auto d : {ReviewDecision::Pending, ReviewDecision::Accept, ReviewDecision::Reject})
    if (s == to_string(d)) return d;
  throw Error(ErrorCode::ParseError, "unknown review decision '" + s + "'");
}

inline NetworkStatus status_for(ReviewDecision d) {
  switch (d) {
    case ReviewDecision::Accept: return NetworkStatus::Accepted;
    case ReviewDecision::Reject: return NetworkStatus::Rejected;
    case ReviewDecision::Pending: break;
  }
  return NetworkStatus::Pending;
}

struct ReviewRecord {
  std::string worker_id;
  std::size_t network_index = 0;  // position in the reviewed network list
  std::size_t zero_cs_count = 0;
  bool auto_flagged = false;
  ReviewDecision decision = ReviewDecision::Pending;
  std::string reviewer_note;

  friend bool operator==(const ReviewRecord&, const ReviewRecord&) = default;
};

inline constexpr std::size_t kDefaultFlagThreshold = 3;

inline std::size_t zero_credibility_count(const WorkerNetwork& net, const CredibilityMap& cred) {
  std::size_t n = 0;
  for (const auto& l : net.links) n += cred.score(l) == 0 ? 1 : 0;
  return n;
}

inline ReviewRecord flag_network(const WorkerNetwork& net, std::size_t index, const CredibilityMap& cred,
                                 std::size_t threshold = kDefaultFlagThreshold) {
  ReviewRecord r;
  r.worker_id = net.worker_id;
  r.network_index = index;
  r.zero_cs_count = zero_credibility_count(net, cred);
  r.auto_flagged = r.zero_cs_count >= threshold;
  r.decision = r.auto_flagged ? ReviewDecision::Pending : ReviewDecision::Accept;
  return r;
}

// Flagged networks wait for manual review; unflagged ones are accepted outright.
inline std::vector<ReviewRecord> flag_networks(const std::vector<WorkerNetwork>& nets,
                                               const CredibilityMap& cred,
                                               std::size_t threshold = kDefaultFlagThreshold) {
  std::vector<ReviewRecord> out;
  out.reserve(nets.size());
  for (std::size_t i = 0; i < nets.size(); ++i) out.push_back(flag_network(nets[i], i, cred, threshold));
  return out;
}

inline ReviewRecord apply_review(ReviewRecord record, ReviewDecision decision, std::string note) {
  if (record.decision != ReviewDecision::Pending)
    throw Error(ErrorCode::AlreadyDecided, "review of " + record.worker_id + " already " +
                                               std::string(to_string(record.decision)));
  if (decision == ReviewDecision::Pending)
    throw Error(ErrorCode::InvalidArgument, "a review decision must be accept or reject");
  record.decision = decision;
  record.reviewer_note = std::move(note);
  return record;
}

// Applies the decision to the record and the matching network status together.
inline ReviewRecord apply_review(ReviewRecord record, ReviewDecision decision, std::string note,
                                 WorkerNetwork& net) {
  auto out = apply_review(std::move(record), decision, std::move(note));
  net.status = status_for(out.decision);
  return out;
}

inline void apply_statuses(std::vector<WorkerNetwork>& nets, const std::vector<ReviewRecord>& records) {
  for (const auto& r : records) {
    if (r.network_index >= nets.size() || nets[r.network_index].worker_id != r.worker_id)
      throw Error(ErrorCode::UnknownRecord, "review record does not match network " + r.worker_id);
    nets[r.network_index].status = r.auto_flagged && r.decision == ReviewDecision::Pending
                                       ? NetworkStatus::Flagged
                                       : status_for(r.decision);
  }
}

namespace io {

inline json review_to_json(const ReviewRecord& r) {
  return {{"worker_id", r.worker_id},
          {"network_index", r.network_index},
          {"zero_cs_count", r.zero_cs_count},
          {"auto_flagged", r.auto_flagged},
          {"decision", std::string(to_string(r.decision))},
          {"reviewer_note", r.reviewer_note}};
}

inline ReviewRecord review_from_json(const json& j) {
  try {
    ReviewRecord r;
    r.worker_id = j.at("worker_id").get<std::string>();
    r.network_index = j.at("network_index").get<std::size_t>();
    r.zero_cs_count = j.at("zero_cs_count").get<std::size_t>();
    r.auto_flagged = j.at("auto_flagged").get<bool>();
    r.decision = review_decision_from_string(j.at("decision").get<std::string>());
    r.reviewer_note = j.value("reviewer_note", std::string());
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("review record: ") + e.what());
  }
}

}  // namespace io

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Shared review store keyed by worker id. Each record transitions at most once
// (compare-and-set under the record's own mutex); every change is appended to an optional
// JSON-lines journal with a timestamp.
class ReviewQueue {
 public:
  explicit ReviewQueue(std::optional<std::filesystem::path> journal = std::nullopt)
      : journal_(std::move(journal)) {}

  // Replays a journal (or a plain record export): the last entry per worker id wins.
  static std::unique_ptr<ReviewQueue> load(const std::filesystem::path& journal) {
    auto q = std::make_unique<ReviewQueue>(journal);
    if (!std::filesystem::exists(journal)) return q;
    std::istringstream in(io::read_file(journal));
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto j = io::parse_json(line, journal.string());
      auto rec = io::review_from_json(j.contains("record") ? j.at("record") : j);
      q->put_unjournaled(std::move(rec));
    }
    return q;
  }

  void add(ReviewRecord r) {
    put_unjournaled(r);
    journal("add", r);
  }

  ReviewRecord decide(const std::string& worker_id, ReviewDecision decision, std::string note) {
    Slot* slot = find_slot(worker_id);
    ReviewRecord out;
    {
      std::lock_guard lock(slot->mu);
      out = apply_review(slot->record, decision, std::move(note));
      slot->record = out;
    }
    journal("decide", out);
    return out;
  }

  std::optional<ReviewRecord> get(const std::string& worker_id) const {
    std::lock_guard lock(map_mu_);
    auto it = slots_.find(worker_id);
    if (it == slots_.end()) return std::nullopt;
    std::lock_guard rl(it->second->mu);
    return it->second->record;
  }

  std::vector<ReviewRecord> records() const {
    std::lock_guard lock(map_mu_);
    std::vector<ReviewRecord> out;
    for (const auto& [_, slot] : slots_) {
      std::lock_guard rl(slot->mu);
      out.push_back(slot->record);
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.network_index < b.network_index; });
    return out;
  }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : records()) out += io::review_to_json(r).dump() + "\n";
    return out;
  }

 private:
  struct Slot {
    mutable std::mutex mu;
    ReviewRecord record;
  };

  void put_unjournaled(ReviewRecord r) {
    std::lock_guard lock(map_mu_);
    auto& slot = slots_[r.worker_id];
    if (!slot) slot = std::make_unique<Slot>();
    std::lock_guard rl(slot->mu);
    slot->record = std::move(r);
  }

  Slot* find_slot(const std::string& worker_id) {
    std::lock_guard lock(map_mu_);
    auto it = slots_.find(worker_id);
    if (it == slots_.end()) throw Error(ErrorCode::UnknownRecord, "no review record for " + worker_id);
    return it->second.get();
  }

  void journal(std::string_view event, const ReviewRecord& r) {
    if (!journal_) return;
    nlohmann::json line = {{"ts", utc_timestamp()}, {"event", event}, {"record", io::review_to_json(r)}};
    std::lock_guard lock(journal_mu_);
    std::ofstream out(*journal_, std::ios::app);
    if (!out) throw Error(ErrorCode::IoError, "cannot append to " + journal_->string());
    out << line.dump() << '\n';
  }

  std::optional<std::filesystem::path> journal_;
  mutable std::mutex map_mu_;
  std::mutex journal_mu_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
};

}  // namespace causalnet
