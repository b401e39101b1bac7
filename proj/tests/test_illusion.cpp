#include <gtest/gtest.h>

#include <random>

#include "causalnet/illusion.hpp"
#include "test_support.hpp"

using namespace causalnet;
using causalnet::fixtures::letter_catalog;
using causalnet::fixtures::link;
namespace fx = causalnet::fixtures;

TEST(CrowdScores, WorkedExamples) {
  EXPECT_EQ(crowd_scores({0, 0, 0}), (std::vector<int>{0, 0, 0}));
  EXPECT_EQ(crowd_scores({1, 2, 3, 10, 20, 50}), (std::vector<int>{1, 1, 2, 2, 3, 3}));
  EXPECT_EQ(crowd_scores({2, 2, 2, 9}), (std::vector<int>{1, 1, 1, 3}));
  EXPECT_EQ(crowd_scores({50, 0, 1, 20, 3, 10, 2}), (std::vector<int>{3, 0, 1, 3, 2, 2, 1}));
  EXPECT_EQ(crowd_scores({0, 7, 4}), (std::vector<int>{0, 1, 1}));
}

TEST(CrowdScores, PropertiesOnRandomVectors) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> len(1, 60);
  std::uniform_int_distribution<int> scale(2, 7);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto n = len(rng);
    // Small ranges force many ties, larger ones fewer.
    std::uniform_int_distribution<std::int64_t> vote(0, trial % 3 == 0 ? 4 : 60);
    std::vector<std::int64_t> v(n);
    for (auto& x : v) x = vote(rng);
    const auto cr = crowd_scores(v);
    ASSERT_EQ(cr.size(), n);
    std::size_t nonzero = 0;
    for (auto x : v) nonzero += x > 0;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_GE(cr[i], 0);
      ASSERT_LE(cr[i], 3);
      ASSERT_EQ(v[i] == 0, cr[i] == 0);
      if (nonzero < 3 && v[i] > 0) {
        ASSERT_EQ(cr[i], 1);
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (v[i] >= v[j]) {
          ASSERT_GE(cr[i], cr[j]);
        }
        if (v[i] == v[j]) {
          ASSERT_EQ(cr[i], cr[j]);
        }
      }
    }
    const int k = scale(rng);
    auto scaled = v;
    for (auto& x : scaled) x *= k;
    ASSERT_EQ(crowd_scores(scaled), cr);
    // Smallest nonzero count always lands in the lowest tier.
    if (nonzero > 0) {
      std::int64_t lo = INT64_MAX;
      for (auto x : v)
        if (x > 0) lo = std::min(lo, x);
      for (std::size_t i = 0; i < n; ++i)
        if (v[i] == lo) {
          ASSERT_EQ(cr[i], 1);
        }
    }
  }
}

TEST(Classify, FullGridTrichotomyAndSign) {
  const auto c = letter_catalog(2);
  const auto l = link(c, 'A', 'B');
  for (int cs = 0; cs <= 3; ++cs) {
    for (int cr = 0; cr <= 3; ++cr) {
      const auto e = classify_link(l, 5, cs, cr);
      EXPECT_EQ(e.discrepancy, cs - cr);
      const int classes = (e.cls == DiscrepancyClass::Misinformed) + (e.cls == DiscrepancyClass::Correct) +
                          (e.cls == DiscrepancyClass::Oblivious);
      EXPECT_EQ(classes, 1);
      if (cs < cr) {
        EXPECT_EQ(e.cls, DiscrepancyClass::Misinformed);
      }
      if (cs > cr) {
        EXPECT_EQ(e.cls, DiscrepancyClass::Oblivious);
      }
      if (cs == cr) {
        EXPECT_EQ(e.cls, DiscrepancyClass::Correct);
        EXPECT_EQ(e.grey_level, cs);
      } else {
        EXPECT_FALSE(e.grey_level.has_value());
      }
      const auto swapped = classify_link(l, 5, cr, cs);
      if (cs != cr) {
        EXPECT_NE(swapped.cls, e.cls);
      }
      EXPECT_EQ(swapped.discrepancy, -e.discrepancy);
    }
  }
  EXPECT_EQ(classify_link(l, 0, 3, 0).cls, DiscrepancyClass::Oblivious);
  EXPECT_EQ(classify_link(l, 0, 0, 3).discrepancy, -3);
  EXPECT_FALSE(classify_link(l, 3, 1, 1).visible);
  EXPECT_TRUE(classify_link(l, 4, 1, 1).visible);
  EXPECT_THROW(classify_link(l, 4, 4, 1), Error);
}

namespace {

struct Row {
  int score;
  std::optional<int> cs;
  std::int64_t all;
  std::int64_t visible;
};

// Feeds (votes, cs, cr) entries straight to the histogram: each row gets `visible` links
// with 4+ votes and the rest below the threshold. Oblivious rows use cs = 3.
DiscrepancyNetwork network_for_rows(const std::vector<Row>& rows) {
  const auto c = fx::data_catalog();
  const auto pairs = c.valid_pairs();
  DiscrepancyNetwork d;
  std::size_t next = 0;
  for (const auto& r : rows) {
    int cs, cr;
    if (r.cs) {
      cs = cr = *r.cs;
    } else if (r.score < 0) {
      cs = 0;
      cr = -r.score;
    } else {
      cs = 3;
      cr = 3 - r.score;
    }
    // cr = 0 means no votes, which can never be visible.
    EXPECT_TRUE(cr > 0 || r.visible == 0);
    for (std::int64_t i = 0; i < r.all; ++i) {
      const bool vis = i < r.visible;
      const std::int64_t votes = vis ? 4 + i % 9 : (cr == 0 ? 0 : 1 + i % 3);
      d.entries.push_back(classify_link(pairs.at(next++), votes, cs, cr));
    }
  }
  return d;
}

void expect_rows(const DiscrepancyHistogram& h, const std::vector<Row>& rows) {
  std::int64_t all = 0, vis = 0;
  for (const auto& r : rows) {
    EXPECT_EQ(h.row(r.score, r.cs).count_all, r.all) << r.score;
    EXPECT_EQ(h.row(r.score, r.cs).count_visible, r.visible) << r.score;
    all += r.all;
    vis += r.visible;
  }
  EXPECT_EQ(h.total_all, all);
  EXPECT_EQ(h.total_visible, vis);
}

const std::vector<Row> kFormativeRows{{-3, {}, 16, 16}, {-2, {}, 28, 28}, {-1, {}, 77, 21},
                                      {0, 3, 14, 14},   {0, 2, 4, 4},     {0, 1, 11, 0},
                                      {0, 0, 110, 0},   {1, {}, 16, 3},   {2, {}, 4, 0},
                                      {3, {}, 1, 0}};

const std::vector<Row> kFinalRows{{-3, {}, 0, 0}, {-2, {}, 7, 7}, {-1, {}, 40, 40}, {0, 3, 4, 4},
                                  {0, 2, 9, 9},   {0, 1, 6, 6},   {0, 0, 75, 0},    {1, {}, 27, 21},
                                  {2, {}, 9, 5},  {3, {}, 4, 0}};

}  // namespace

TEST(Histogram, FormativeTableFixture) {
  const auto d = network_for_rows(kFormativeRows);
  const auto h = discrepancy_histogram(d);
  expect_rows(h, kFormativeRows);
  EXPECT_EQ(h.total_all, 281);
  EXPECT_EQ(h.total_visible, 86);
}

TEST(Histogram, FinalTableFixture) {
  const auto d = network_for_rows(kFinalRows);
  const auto h = discrepancy_histogram(d);
  expect_rows(h, kFinalRows);
  EXPECT_EQ(h.total_all, 181);
  EXPECT_EQ(h.total_visible, 92);
}

TEST(Histogram, CsvLayout) {
  const auto h = discrepancy_histogram(network_for_rows(kFormativeRows));
  EXPECT_EQ(histogram_csv(h),
            "type,score,count_all,count_visible\n"
            "misinformed,-3,16,16\n"
            "misinformed,-2,28,28\n"
            "misinformed,-1,77,21\n"
            "correct,0 (cs = 3),14,14\n"
            "correct,0 (cs = 2),4,4\n"
            "correct,0 (cs = 1),11,0\n"
            "correct,0 (cs = 0),110,0\n"
            "oblivious,1,16,3\n"
            "oblivious,2,4,0\n"
            "oblivious,3,1,0\n"
            "total,,281,86\n");
}

TEST(BuildDiscrepancy, EmptyAggregatePutsEverythingAtZeroCrowdScore) {
  const auto c = fx::data_catalog();
  std::mt19937_64 rng(8);
  const auto cred = fx::random_credibility(c, rng);
  const auto h = discrepancy_histogram(build_discrepancy(AggregatedNetwork{}, cred));
  std::array<std::int64_t, 4> by_cs{};
  for (const auto& [_, s] : cred.scores) ++by_cs[static_cast<std::size_t>(s)];
  EXPECT_EQ(h.row(0, 0).count_all, by_cs[0]);
  EXPECT_EQ(h.row(1).count_all, by_cs[1]);
  EXPECT_EQ(h.row(2).count_all, by_cs[2]);
  EXPECT_EQ(h.row(3).count_all, by_cs[3]);
  EXPECT_EQ(h.total_visible, 0);
}

TEST(BuildDiscrepancy, PartitionsUniverseAndMatchesRecomputation) {
  const auto c = fx::data_catalog();
  std::mt19937_64 rng(12);
  const auto cred = fx::random_credibility(c, rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<WorkerNetwork> nets;
    for (int i = 0; i < 40 + trial * 5; ++i) nets.push_back(fx::random_network(c, rng));
    const auto agg = aggregate(nets);
    const auto d = build_discrepancy(agg, cred);
    ASSERT_EQ(d.entries.size(), cred.size());
    const auto cr = crowd_scores(agg, c.valid_pairs());
    std::int64_t visible = 0;
    for (const auto& e : d.entries) {
      ASSERT_EQ(e.cr, cr.at(e.link));
      ASSERT_EQ(e.cs, cred.score(e.link));
      ASSERT_EQ(e.visible, agg.votes_for(e.link) >= 4);
      visible += e.visible;
    }
    const auto h = discrepancy_histogram(d);
    std::int64_t sum = 0;
    for (const auto& r : h.rows) sum += r.count_all;
    ASSERT_EQ(sum, static_cast<std::int64_t>(c.valid_pairs().size()));
    ASSERT_EQ(h.total_visible, visible);

    // Scaling every vote leaves the classification untouched.
    AggregatedNetwork scaled = agg;
    for (auto& [_, v] : scaled.votes) v *= 3;
    const auto ds = build_discrepancy(scaled, cred, 12);
    for (std::size_t i = 0; i < d.entries.size(); ++i) {
      ASSERT_EQ(ds.entries[i].cr, d.entries[i].cr);
      ASSERT_EQ(ds.entries[i].cls, d.entries[i].cls);
      ASSERT_EQ(ds.entries[i].visible, d.entries[i].visible);
    }
  }
}

TEST(BuildDiscrepancy, VotedLinkWithoutCredibilityFails) {
  const auto c = letter_catalog(3);
  AggregatedNetwork agg;
  agg.votes[link(c, 'A', 'B')] = 2;
  try {
    build_discrepancy(agg, CredibilityMap{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingCredibility);
  }
}

TEST(Dot, SingleOrangeEdgeAndEmptyBody) {
  const auto c = letter_catalog(2);
  DiscrepancyNetwork d;
  d.entries.push_back(classify_link(link(c, 'A', 'B'), 6, 1, 3));
  EXPECT_EQ(export_discrepancy_dot(d, DotMode::Misinformed),
            "digraph discrepancy {\n  \"up A\" -> \"up B\" [color=\"#FF8C00\", label=\"-2\"];\n}\n");
  EXPECT_EQ(export_discrepancy_dot(d, DotMode::Oblivious), "digraph discrepancy {\n}\n");
  d.entries[0].visible = false;
  EXPECT_EQ(export_discrepancy_dot(d, DotMode::All), "digraph discrepancy {\n}\n");
}

TEST(Dot, EdgeSetEqualsBruteForceFilter) {
  const auto c = fx::data_catalog();
  std::mt19937_64 rng(13);
  const auto cred = fx::random_credibility(c, rng);
  std::vector<WorkerNetwork> nets;
  for (int i = 0; i < 400; ++i) nets.push_back(fx::random_network(c, rng));
  const auto d = build_discrepancy(aggregate(nets), cred);
  for (auto mode : {DotMode::Misinformed, DotMode::Oblivious, DotMode::Correct, DotMode::All}) {
    std::set<std::string> expected;
    for (const auto& e : d.entries) {
      if (!e.visible) continue;
      const bool keep = mode == DotMode::All ||
                        (mode == DotMode::Misinformed && e.discrepancy < 0) ||
                        (mode == DotMode::Oblivious && e.discrepancy > 0) ||
                        (mode == DotMode::Correct && e.discrepancy == 0);
      if (keep) expected.insert("\"" + e.link.cause.display + "\" -> \"" + e.link.effect.display + "\"");
    }
    const auto dot = export_discrepancy_dot(d, mode);
    std::set<std::string> got;
    std::istringstream in(dot);
    std::string line;
    while (std::getline(in, line)) {
      const auto arrow = line.find(" [");
      if (line.rfind("  \"", 0) == 0) got.insert(line.substr(2, arrow - 2));
    }
    EXPECT_EQ(got, expected);
    EXPECT_EQ(dot, export_discrepancy_dot(d, mode));
  }
}

TEST(Legend, Colors) {
  EXPECT_EQ(legend_color(-3, 0), "#8B0000");
  EXPECT_EQ(legend_color(-1, 0), "#FFD700");
  EXPECT_EQ(legend_color(3, 3), "#00008B");
  EXPECT_EQ(legend_color(0, 3), "#2F2F2F");
  EXPECT_EQ(legend_color(0, 0), "#D3D3D3");
}
