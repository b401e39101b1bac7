#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <thread>

#include "causalnet/metrics.hpp"
#include "causalnet/qualitycontrol.hpp"
#include "test_support.hpp"

using namespace causalnet;
using causalnet::fixtures::letter_catalog;
using causalnet::fixtures::link;
namespace fx = causalnet::fixtures;

namespace {

// Five-link chain A..F with the first `zeros` links scored 0 and the rest 2.
std::pair<WorkerNetwork, CredibilityMap> chain_with_zeros(std::size_t zeros) {
  const auto c = letter_catalog(6);
  WorkerNetwork net;
  net.worker_id = "w" + std::to_string(zeros);
  CredibilityMap m;
  for (const auto& p : c.valid_pairs()) m.scores[p] = 1;
  for (char ch = 'A'; ch < 'F'; ++ch) {
    const auto l = link(c, ch, static_cast<char>(ch + 1));
    m.scores[l] = static_cast<std::size_t>(ch - 'A') < zeros ? 0 : 2;
    net.links.push_back(l);
  }
  return {net, m};
}

std::filesystem::path temp_path(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() /
           ("causalnet_qc_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST(Flagging, ThresholdBoundaries) {
  for (std::size_t zeros = 0; zeros <= 5; ++zeros) {
    const auto [net, cred] = chain_with_zeros(zeros);
    const auto r = flag_network(net, 0, cred);
    EXPECT_EQ(r.zero_cs_count, zeros);
    EXPECT_EQ(r.auto_flagged, zeros >= 3) << zeros;
    EXPECT_EQ(r.decision, zeros >= 3 ? ReviewDecision::Pending : ReviewDecision::Accept);
  }
  EXPECT_EQ(ProtocolProfile::final_study().flag_threshold(), 3u);
}

TEST(Flagging, ApplyStatusesMarksPendingFlagged) {
  auto [a, cred_a] = chain_with_zeros(3);
  auto [b, cred_b] = chain_with_zeros(1);
  std::vector<WorkerNetwork> nets{a, b};
  std::vector<ReviewRecord> recs{flag_network(a, 0, cred_a), flag_network(b, 1, cred_b)};
  EXPECT_EQ(flag_networks(nets, cred_a)[1].zero_cs_count, 3u);
  apply_statuses(nets, recs);
  EXPECT_EQ(nets[0].status, NetworkStatus::Flagged);
  EXPECT_EQ(nets[1].status, NetworkStatus::Accepted);

  recs[0] = apply_review(recs[0], ReviewDecision::Reject, "off-topic", nets[0]);
  EXPECT_EQ(nets[0].status, NetworkStatus::Rejected);
  EXPECT_THROW(apply_review(recs[0], ReviewDecision::Accept, ""), Error);
  EXPECT_THROW(apply_review(recs[1], ReviewDecision::Reject, ""), Error);

  recs[1].worker_id = "someone else";
  EXPECT_THROW(apply_statuses(nets, recs), Error);
}

TEST(Review, RejectingDecrementsExactlyItsLinks) {
  const auto c = fx::data_catalog();
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<WorkerNetwork> nets;
    for (int i = 0; i < 30; ++i) nets.push_back(fx::random_network(c, rng, 5, "w" + std::to_string(i)));
    const auto before = aggregate_accepted(nets);
    const auto k = static_cast<std::size_t>(trial % 30);
    ReviewRecord rec{nets[k].worker_id, k, 0, true, ReviewDecision::Pending, ""};
    apply_review(rec, ReviewDecision::Reject, "", nets[k]);
    const auto after = aggregate_accepted(nets);
    for (const auto& [l, v] : before.votes) {
      const std::int64_t expected = v - (nets[k].contains(l) ? 1 : 0);
      ASSERT_EQ(after.votes_for(l), expected);
    }
    ASSERT_EQ(after.total_votes(), before.total_votes() - 5);
    ASSERT_EQ(after.contributing_networks, before.contributing_networks - 1);
  }
}

TEST(ReviewQueue, ConcurrentDecisionsApplyOnce) {
  ReviewQueue q;
  for (std::size_t i = 0; i < 20; ++i)
    q.add({"w" + std::to_string(i), i, 3, true, ReviewDecision::Pending, ""});
  std::atomic<int> wins{0}, conflicts{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 20; ++i) {
        try {
          q.decide("w" + std::to_string(i), t % 2 ? ReviewDecision::Accept : ReviewDecision::Reject,
                   "r" + std::to_string(t));
          ++wins;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::AlreadyDecided) ++conflicts;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(wins.load(), 20);
  EXPECT_EQ(conflicts.load(), 8 * 20 - 20);
  for (const auto& r : q.records()) {
    EXPECT_NE(r.decision, ReviewDecision::Pending);
  }
  EXPECT_THROW(q.decide("nobody", ReviewDecision::Accept, ""), Error);
}

TEST(ReviewQueue, JournalReplaysToSameState) {
  const auto path = temp_path("journal.jsonl");
  {
    ReviewQueue q(path);
    q.add({"a", 0, 4, true, ReviewDecision::Pending, ""});
    q.add({"b", 1, 3, true, ReviewDecision::Pending, ""});
    q.add({"c", 2, 0, false, ReviewDecision::Accept, ""});
    q.decide("b", ReviewDecision::Reject, "copied the example, \"verbatim\"");
  }
  const auto again = ReviewQueue::load(path);
  const auto recs = again->records();
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].decision, ReviewDecision::Pending);
  EXPECT_EQ(recs[1].decision, ReviewDecision::Reject);
  EXPECT_EQ(recs[1].reviewer_note, "copied the example, \"verbatim\"");
  EXPECT_EQ(recs[2].decision, ReviewDecision::Accept);

  // A plain export loads too.
  const auto export_path = temp_path("export.jsonl");
  io::write_file_atomic(export_path, again->to_jsonl());
  EXPECT_EQ(ReviewQueue::load(export_path)->records(), recs);
  std::filesystem::remove(path);
  std::filesystem::remove(export_path);
}
