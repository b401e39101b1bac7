#include <gtest/gtest.h>

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "causalnet/csv.hpp"
#include "causalnet/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using causalnet::ErrorCode;

namespace {

const std::string kBin = CAUSALNET_CLI;
const std::string kData = CAUSALNET_DATA_DIR;
const std::string kFix = kData + "/fixture";

struct Run {
  int rc;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = kBin + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("causalnet_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string catalog() { return "--catalog " + kData + "/catalog_final.json"; }
  static std::string experts() {
    return "--experts " + kFix + "/expert_a.json " + kFix + "/expert_b.json " + kFix + "/expert_c.json";
  }
  static std::string deliberations() { return "--deliberations " + kFix + "/deliberations.csv"; }

  std::string credibility() {
    const auto r = run("groundtruth " + catalog() + " " + experts() + " " + deliberations() + " --out " + path("gt"));
    EXPECT_EQ(r.rc, 0);
    return path("gt/credibility.csv");
  }

  fs::path dir_;
};

// Independent two-pass Pearson over the credibility universe (unvoted pairs are 0 votes).
double oracle_r(const std::string& cred_csv, const std::string& votes_csv) {
  std::map<std::pair<std::string, std::string>, double> votes;
  auto vrows = causalnet::csv::parse(votes_csv);
  for (std::size_t i = 1; i < vrows.size(); ++i) votes[{vrows[i][0], vrows[i][1]}] = std::stod(vrows[i][2]);
  std::vector<long double> x, y;
  auto crows = causalnet::csv::parse(cred_csv);
  for (std::size_t i = 1; i < crows.size(); ++i) {
    auto it = votes.find({crows[i][0], crows[i][1]});
    x.push_back(it == votes.end() ? 0.0L : it->second);
    y.push_back(std::stold(crows[i][2]));
  }
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

}  // namespace

TEST(ExitCodes, DistinctPerErrorCode) {
  std::set<int> seen{causalnet::pipeline::kExitOk, causalnet::pipeline::kExitInternal,
                     causalnet::pipeline::kExitUsage};
  for (int i = 0; i <= static_cast<int>(ErrorCode::IoError); ++i) {
    const int rc = causalnet::pipeline::exit_code(static_cast<ErrorCode>(i));
    EXPECT_TRUE(seen.insert(rc).second) << i;
    EXPECT_LT(rc, 64);
  }
  EXPECT_EQ(causalnet::pipeline::exit_code(ErrorCode::MissingDecision), 2);
  EXPECT_EQ(causalnet::pipeline::exit_code(ErrorCode::TooFewExperts), 3);
  EXPECT_EQ(causalnet::pipeline::exit_code(ErrorCode::CatalogMiss), 4);
}

TEST_F(Cli, GroundTruthWritesCredibility) {
  const auto csv = slurp(credibility());
  const auto rows = causalnet::csv::parse(csv);
  ASSERT_GT(rows.size(), 1u);
  EXPECT_EQ(rows[0], (causalnet::csv::Row{"cause", "effect", "cs", "provenance"}));
  // 32 attributes over 16 bases: every cross-base ordered pair.
  EXPECT_EQ(rows.size() - 1, 32u * 30u);
  std::map<std::string, int> prov;
  for (std::size_t i = 1; i < rows.size(); ++i) ++prov[rows[i][3]];
  EXPECT_EQ(prov["deliberated"], 6);
}

TEST_F(Cli, MissingDeliberationPrintsWorklist) {
  const auto r = run("groundtruth " + catalog() + " " + experts() + " --out " + path("gt"));
  EXPECT_EQ(r.rc, 2);
  const auto rows = causalnet::csv::parse(r.out);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0][0], "cause");
  EXPECT_FALSE(fs::exists(path("gt")));
}

TEST_F(Cli, TwoExpertsIsExitThree) {
  const auto r = run("groundtruth " + catalog() + " --experts " + kFix + "/expert_a.json " + kFix +
                     "/expert_b.json " + deliberations() + " --out " + path("gt"));
  EXPECT_EQ(r.rc, 3);
}

TEST_F(Cli, AnalyzeIsDeterministicAndMatchesOracle) {
  const auto cred = credibility();
  const std::string args = "analyze " + catalog() + " --networks " + kFix + "/networks.jsonl --credibility " + cred;
  ASSERT_EQ(run(args + " --out " + path("a1")).rc, 0);
  ASSERT_EQ(run(args + " --out " + path("a2")).rc, 0);
  const auto r3 = run("analyze " + catalog() + " --networks " + kFix + "/networks.jsonl " + experts() + " " +
                      deliberations() + " --out " + path("a3"));
  ASSERT_EQ(r3.rc, 0);
  EXPECT_NE(r3.out.find("pearson r = "), std::string::npos);

  const std::vector<std::string> files = {"adjacency.csv",           "votes.csv",
                                          "stats.json",              "discrepancy_misinformed.dot",
                                          "discrepancy_oblivious.dot", "discrepancy_correct.dot",
                                          "discrepancy_histogram.csv"};
  for (const auto& f : files) {
    ASSERT_TRUE(fs::exists(path("a1/" + f))) << f;
    EXPECT_EQ(slurp(path("a1/" + f)), slurp(path("a2/" + f))) << f;
    EXPECT_EQ(slurp(path("a1/" + f)), slurp(path("a3/" + f))) << f;
  }
  EXPECT_EQ(std::distance(fs::directory_iterator(path("a1")), fs::directory_iterator()),
            static_cast<std::ptrdiff_t>(files.size()));

  const auto stats = json::parse(slurp(path("a1/stats.json")));
  EXPECT_EQ(stats.at("networks").at("accepted"), 55);
  EXPECT_NEAR(stats.at("pearson").at("r").get<double>(), oracle_r(slurp(cred), slurp(path("a1/votes.csv"))), 1e-9);
  EXPECT_EQ(stats.at("pearson").at("n"), 960);
  EXPECT_EQ(stats.at("saturation").at("applicable"), false);

  // Histogram partitions the credibility universe.
  const auto hist = causalnet::csv::parse(slurp(path("a1/discrepancy_histogram.csv")));
  long sum = 0;
  for (std::size_t i = 1; i + 1 < hist.size(); ++i) sum += std::stol(hist[i][2]);
  EXPECT_EQ(sum, 960);
  EXPECT_EQ(hist.back()[2], "960");
}

TEST_F(Cli, VotesEqualToCredibilityGiveUnitCorrelation) {
  const auto cred = credibility();
  std::ifstream in(kFix + "/networks.jsonl");
  std::string line, subset;
  for (int i = 0; i < 3 && std::getline(in, line); ++i) {
    auto j = json::parse(line);
    j["status"] = "accepted";
    subset += j.dump() + "\n";
  }
  spit(path("three.jsonl"), subset);
  ASSERT_EQ(run("analyze " + catalog() + " --networks " + path("three.jsonl") + " --credibility " + cred +
                " --out " + path("a"))
                .rc,
            0);

  // Rewrite credibility so cs equals the vote count of every pair.
  std::map<std::pair<std::string, std::string>, std::string> votes;
  const auto vrows = causalnet::csv::parse(slurp(path("a/votes.csv")));
  for (std::size_t i = 1; i < vrows.size(); ++i) votes[{vrows[i][0], vrows[i][1]}] = vrows[i][2];
  auto crows = causalnet::csv::parse(slurp(cred));
  std::string out = "cause,effect,cs,provenance\n";
  for (std::size_t i = 1; i < crows.size(); ++i) {
    auto it = votes.find({crows[i][0], crows[i][1]});
    crows[i][2] = it == votes.end() ? "0" : it->second;
    out += causalnet::csv::join(crows[i]) + "\n";
  }
  spit(path("equal.csv"), out);
  ASSERT_EQ(run("analyze " + catalog() + " --networks " + path("three.jsonl") + " --credibility " +
                path("equal.csv") + " --out " + path("b"))
                .rc,
            0);
  const auto stats = json::parse(slurp(path("b/stats.json")));
  EXPECT_DOUBLE_EQ(stats.at("pearson").at("r").get<double>(), 1.0);
}

TEST_F(Cli, NoAcceptedNetworksIsAnError) {
  const auto cred = credibility();
  std::ifstream in(kFix + "/networks.jsonl");
  std::string line, all;
  while (std::getline(in, line)) {
    auto j = json::parse(line);
    j["status"] = "rejected";
    all += j.dump() + "\n";
  }
  spit(path("rejected.jsonl"), all);
  const auto r = run("analyze " + catalog() + " --networks " + path("rejected.jsonl") + " --credibility " + cred +
                     " --out " + path("a"));
  EXPECT_EQ(r.rc, causalnet::pipeline::exit_code(ErrorCode::EmptyAcceptedSet));
  EXPECT_FALSE(fs::exists(path("a")));
}

TEST_F(Cli, MissingInputFailsBeforeAnyOutput) {
  const auto r = run("analyze " + catalog() + " --networks " + path("nope.jsonl") + " " + experts() + " " +
                     deliberations() + " --out " + path("a"));
  EXPECT_EQ(r.rc, causalnet::pipeline::exit_code(ErrorCode::IoError));
  EXPECT_FALSE(fs::exists(path("a")));
  EXPECT_EQ(run("analyze --bogus-flag").rc, causalnet::pipeline::kExitUsage);
}

TEST_F(Cli, IllusionFixtures) {
  auto r = run("illusion --catalog " + kData + "/catalog_formative.json --votes " + kData +
               "/fig8_votes.csv --query " + kData + "/query_solar.json --out " + path("f8"));
  ASSERT_EQ(r.rc, 0);
  auto j = json::parse(slurp(path("f8/illusion.json")));
  EXPECT_EQ(j.at("average").at("ratio").at("exact"), "4");
  EXPECT_EQ(j.at("bogus_direct_votes"), 95);

  r = run("illusion " + catalog() + " --votes " + kData + "/fig12_votes.csv --query " + kData +
          "/query_solar.json --out " + path("f12"));
  ASSERT_EQ(r.rc, 0);
  j = json::parse(slurp(path("f12/illusion.json")));
  EXPECT_EQ(j.at("weakest").at("ratio").at("exact"), "5/4");
  EXPECT_NEAR(j.at("average").at("ratio").at("value").get<double>(), 0.36, 0.005);
  EXPECT_NE(r.out.find("4 hop(s)"), std::string::npos);

  spit(path("bad.json"), R"({"bogus":["warmer oceans"],"true":"more fossil fuel burning","outcome":["increasing temperature"]})");
  EXPECT_EQ(run("illusion " + catalog() + " --votes " + kData + "/fig12_votes.csv --query " + path("bad.json")).rc, 4);

  // Nothing votes out of "less coal burning": warning, ratio omitted, success.
  spit(path("nopath.json"),
       R"({"bogus":["increasing solar radiation"],"true":"less coal burning","outcome":["increasing temperature"]})");
  r = run("illusion " + catalog() + " --votes " + kData + "/fig12_votes.csv --query " + path("nopath.json") +
          " --out " + path("np"));
  EXPECT_EQ(r.rc, 0);
  EXPECT_NE(r.out.find("ratio omitted"), std::string::npos);
  EXPECT_TRUE(json::parse(slurp(path("np/illusion.json"))).at("average").at("ratio").is_null());
}

TEST_F(Cli, QualityControlRoundTrip) {
  const auto cred = credibility();
  const std::string nets = " --networks " + kFix + "/networks.jsonl";
  ASSERT_EQ(run("qc flag " + catalog() + nets + " --credibility " + cred + " --out " + path("qc")).rc, 0);
  const auto reviews = path("qc/reviews.jsonl");
  const auto list = run("qc list --reviews " + reviews);
  ASSERT_EQ(list.rc, 0);
  EXPECT_EQ(std::count(list.out.begin(), list.out.end(), '\n'), 60);

  std::string flagged;
  std::istringstream lines(slurp(reviews));
  for (std::string l; std::getline(lines, l);) {
    const auto j = json::parse(l);
    if (j.at("auto_flagged").get<bool>()) {
      flagged = j.at("worker_id");
      break;
    }
  }
  ASSERT_FALSE(flagged.empty());
  EXPECT_EQ(run("qc reject " + flagged + " --reviews " + reviews + " --note spam").rc, 0);
  EXPECT_EQ(run("qc accept " + flagged + " --reviews " + reviews).rc,
            causalnet::pipeline::exit_code(ErrorCode::AlreadyDecided));
  EXPECT_EQ(run("qc accept nobody --reviews " + reviews).rc, causalnet::pipeline::exit_code(ErrorCode::UnknownRecord));

  ASSERT_EQ(run("qc apply " + catalog() + nets + " --reviews " + reviews + " --out " + path("final")).rc, 0);
  std::istringstream fin(slurp(path("final/networks.jsonl")));
  for (std::string l; std::getline(fin, l);) {
    const auto j = json::parse(l);
    if (j.at("worker_id") == flagged) {
      EXPECT_EQ(j.at("status"), "rejected");
    }
  }
}

TEST_F(Cli, ConfigFileSuppliesFlags) {
  const auto cred = credibility();
  spit(path("pipeline.json"), json{{"catalog", kData + "/catalog_final.json"},
                                   {"networks", kFix + "/networks.jsonl"},
                                   {"credibility", cred},
                                   {"threshold", 2},
                                   {"out", "from_config"}}
                                  .dump());
  ASSERT_EQ(run("analyze --config " + path("pipeline.json")).rc, 0);
  auto stats = json::parse(slurp(path("from_config/stats.json")));
  EXPECT_EQ(stats.at("discrepancy").at("threshold"), 2);
  ASSERT_EQ(run("analyze --config " + path("pipeline.json") + " --threshold 6").rc, 0);
  stats = json::parse(slurp(path("from_config/stats.json")));
  EXPECT_EQ(stats.at("discrepancy").at("threshold"), 6);
}

TEST_F(Cli, ServeRunsHeadless) {
  const std::string log = path("serve.log");
  const std::string cmd = "CATALOG_PATH=" + kData + "/catalog_final.json SASSY_TABLE_PATH=" + kData +
                          "/sassy_placeholder.json STUDY_CONFIG_PATH=" + kData +
                          "/study_config.json BIND_ADDR=127.0.0.1:0 DATA_DIR=" + path("svc") + " " + kBin +
                          " serve > " + log + " 2>&1 & echo $!";
  FILE* p = popen(cmd.c_str(), "r");
  int pid = 0;
  ASSERT_EQ(fscanf(p, "%d", &pid), 1);
  pclose(p);

  int port = 0;
  for (int i = 0; i < 200 && port == 0; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
    const auto text = slurp(log);
    const auto at = text.find("listening on 127.0.0.1:");
    if (at != std::string::npos) port = std::stoi(text.substr(at + 23));
  }
  ASSERT_GT(port, 0) << slurp(log);

  httplib::Client c("127.0.0.1", port);
  auto h = c.Get("/health");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  auto s = c.Post("/sessions", "", "application/json");
  ASSERT_TRUE(s);
  EXPECT_EQ(s->status, 201);

  ::kill(pid, SIGTERM);
  bool gone = false;
  for (int i = 0; i < 200 && !gone; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
    gone = ::kill(pid, 0) != 0;
  }
  EXPECT_TRUE(gone);
  EXPECT_TRUE(fs::exists(path("svc/sessions.jsonl")));
}
