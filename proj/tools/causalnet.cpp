#include <algorithm>
#include <csignal>
#include <iostream>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>

#include "causalnet/collection/server.hpp"
#include "causalnet/collection/session.hpp"
#include "causalnet/pipeline.hpp"

using namespace causalnet;
namespace pl = causalnet::pipeline;
namespace fs = std::filesystem;

namespace {

// Flag values; explicitly given flags override --config.
struct Flags {
  std::string config, catalog, networks, deliberations, credibility, reviews, previous, votes, query, out, profile;
  std::vector<std::string> experts;
  std::int64_t threshold = kDefaultSignificanceThreshold;
  double epsilon = kDefaultSaturationEpsilon;
  std::multimap<std::string, CLI::Option*> opts;
};

void add_common(CLI::App* sub, Flags& f, std::initializer_list<std::string> which) {
  auto add = [&](const std::string& name, std::string& target, const std::string& help) {
    f.opts.emplace(name, sub->add_option("--" + name, target, help));
  };
  for (const auto& w : which) {
    if (w == "catalog") add(w, f.catalog, "attribute catalog JSON");
    if (w == "networks") add(w, f.networks, "worker networks JSONL");
    if (w == "deliberations") add(w, f.deliberations, "deliberated scores CSV (cause,effect,score,note)");
    if (w == "credibility") add(w, f.credibility, "credibility CSV from `groundtruth`");
    if (w == "reviews") add(w, f.reviews, "review records JSONL");
    if (w == "previous") add(w, f.previous, "earlier networks JSONL for the saturation check");
    if (w == "votes") add(w, f.votes, "aggregated votes CSV (cause,effect,votes)");
    if (w == "query") add(w, f.query, "illusion query JSON");
    if (w == "out") add(w, f.out, "output directory");
    if (w == "profile") add(w, f.profile, "protocol profile: final | formative");
    if (w == "experts") f.opts.emplace(w, sub->add_option("--experts", f.experts, "expert network JSON files"));
    if (w == "threshold")
      f.opts.emplace(w, sub->add_option("--threshold", f.threshold, "significance threshold (minimum votes)"));
    if (w == "epsilon") f.opts.emplace(w, sub->add_option("--epsilon", f.epsilon, "saturation epsilon"));
  }
  sub->add_option("--config", f.config, "JSON file with the same keys as the flags");
}

pl::PipelineConfig resolve(const Flags& f) {
  pl::PipelineConfig cfg;
  if (!f.config.empty()) {
    const fs::path p = f.config;
    pl::merge_config_json(cfg, io::parse_json(io::read_file(p), p.string()), p.parent_path());
  }
  auto given = [&](const std::string& n) {
    const auto [lo, hi] = f.opts.equal_range(n);
    return std::any_of(lo, hi, [](const auto& kv) { return kv.second->count() > 0; });
  };
  auto opt_path = [&](const std::string& n, const std::string& v, std::optional<fs::path>& dst) {
    if (given(n)) dst = v;
  };
  if (given("catalog")) cfg.catalog = f.catalog;
  opt_path("networks", f.networks, cfg.networks);
  opt_path("deliberations", f.deliberations, cfg.deliberations);
  opt_path("credibility", f.credibility, cfg.credibility);
  opt_path("reviews", f.reviews, cfg.reviews);
  opt_path("previous", f.previous, cfg.previous);
  opt_path("votes", f.votes, cfg.votes);
  opt_path("query", f.query, cfg.query);
  opt_path("out", f.out, cfg.out);
  if (given("experts")) cfg.experts.assign(f.experts.begin(), f.experts.end());
  if (given("threshold")) cfg.threshold = f.threshold;
  if (given("epsilon")) cfg.epsilon = f.epsilon;
  if (given("profile")) cfg.profile = f.profile;
  if (cfg.catalog.empty()) throw Error(ErrorCode::InvalidArgument, "missing required input --catalog");
  return cfg;
}

int emit(const pl::Report& r, const pl::PipelineConfig& cfg, bool out_required = true) {
  if (cfg.out) {
    pl::write_report(r, *cfg.out);
  } else if (out_required) {
    throw Error(ErrorCode::InvalidArgument, "missing required input --out");
  }
  std::cout << r.summary;
  return pl::kExitOk;
}

struct ServeFlags {
  std::string bind = "127.0.0.1:8080";
  std::string data_dir, profile = "final", catalog, sassy, credibility, study_config;
  std::optional<std::uint64_t> seed;
  double epsilon = kDefaultSaturationEpsilon;
};

int serve(const ServeFlags& f) {
  const auto catalog = io::load_catalog(f.catalog);
  const auto config = collection::load_study_config(f.study_config, catalog);
  auto sassy = collection::load_sassy_table(f.sassy);
  std::optional<CredibilityMap> cred;
  if (!f.credibility.empty()) cred = io::parse_credibility(io::read_file(f.credibility), catalog);

  collection::ServiceOptions opts;
  opts.profile = pl::profile_from_name(f.profile);
  if (!f.data_dir.empty()) opts.data_dir = fs::path(f.data_dir);
  opts.seed = f.seed;
  opts.saturation_epsilon = f.epsilon;
  collection::SessionService svc(catalog, config, std::move(sassy), opts, std::move(cred));

  const auto colon = f.bind.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "bind address must be host:port");
  const std::string host = f.bind.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(f.bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "bad port in '" + f.bind + "'");
  }

  // Block termination signals in every thread; a dedicated thread waits for them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  collection::CollectionServer server(svc);
  const int bound = server.bind(host, port);
  if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + f.bind);
  std::cout << "listening on " << host << ":" << bound << " (profile " << opts.profile.name << ")" << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  server.run();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return pl::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowdsourced causal-network analysis"};
  app.require_subcommand(1);
  Flags f;

  auto* gt = app.add_subcommand("groundtruth", "merge expert networks into a credibility map");
  add_common(gt, f, {"catalog", "experts", "deliberations", "out"});

  auto* qc = app.add_subcommand("qc", "quality control of worker networks");
  qc->require_subcommand(1);
  auto* qc_flag = qc->add_subcommand("flag", "flag networks with too many zero-credibility links");
  add_common(qc_flag, f, {"catalog", "networks", "credibility", "experts", "deliberations", "profile", "out"});
  auto* qc_list = qc->add_subcommand("list", "list review records");
  add_common(qc_list, f, {"reviews"});
  std::string worker, note;
  auto* qc_accept = qc->add_subcommand("accept", "accept a flagged network");
  auto* qc_reject = qc->add_subcommand("reject", "reject a flagged network");
  for (auto* s : {qc_accept, qc_reject}) {
    add_common(s, f, {"reviews"});
    s->add_option("worker_id", worker, "worker id of the network")->required();
    s->add_option("--note", note, "reviewer note");
  }
  auto* qc_apply = qc->add_subcommand("apply", "write networks with review decisions applied");
  add_common(qc_apply, f, {"catalog", "networks", "reviews", "profile", "out"});

  auto* an = app.add_subcommand("analyze", "aggregate accepted networks and emit reports");
  add_common(an, f,
             {"catalog", "networks", "reviews", "credibility", "experts", "deliberations", "previous", "threshold",
              "epsilon", "profile", "out"});

  auto* il = app.add_subcommand("illusion", "quantify a causal illusion against a true cause");
  add_common(il, f, {"catalog", "query", "networks", "votes", "reviews", "profile", "out"});

  ServeFlags sf;
  auto* sv = app.add_subcommand("serve", "run the collection service");
  sv->add_option("--bind", sf.bind, "host:port")->envname("BIND_ADDR");
  sv->add_option("--data-dir", sf.data_dir, "directory for the session journal")->envname("DATA_DIR");
  sv->add_option("--profile", sf.profile, "final | formative")->envname("PROFILE");
  sv->add_option("--catalog", sf.catalog, "attribute catalog JSON")->envname("CATALOG_PATH")->required();
  sv->add_option("--sassy-table", sf.sassy, "SASSY answer-pattern table JSON")
      ->envname("SASSY_TABLE_PATH")
      ->required();
  sv->add_option("--credibility", sf.credibility, "credibility CSV for automatic flagging")
      ->envname("CREDIBILITY_PATH");
  sv->add_option("--study-config", sf.study_config, "study configuration JSON")
      ->envname("STUDY_CONFIG_PATH")
      ->required();
  sv->add_option("--seed", sf.seed, "seed for attribute-order shuffling");
  sv->add_option("--epsilon", sf.epsilon, "saturation epsilon for cohort reports");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? pl::kExitOk : pl::kExitUsage;
  }

  try {
    if (*gt) return emit(pl::cmd_groundtruth(resolve(f)), resolve(f));
    if (*qc_flag) return emit(pl::cmd_qc_flag(resolve(f)), resolve(f));
    if (*qc_apply) return emit(pl::cmd_qc_apply(resolve(f)), resolve(f));
    if (*qc_list || *qc_accept || *qc_reject) {
      if (f.reviews.empty()) throw Error(ErrorCode::InvalidArgument, "missing required input --reviews");
      if (!fs::exists(f.reviews)) throw Error(ErrorCode::IoError, "no such file: " + f.reviews);
      auto queue = ReviewQueue::load(f.reviews);
      if (*qc_list) {
        for (const auto& r : queue->records())
          std::cout << r.worker_id << "\t" << r.network_index << "\tzero_cs=" << r.zero_cs_count
                    << (r.auto_flagged ? "\tflagged" : "\t-") << "\t" << to_string(r.decision) << "\n";
        return pl::kExitOk;
      }
      const auto r = queue->decide(worker, *qc_accept ? ReviewDecision::Accept : ReviewDecision::Reject, note);
      std::cout << io::review_to_json(r).dump() << "\n";
      return pl::kExitOk;
    }
    if (*an) return emit(pl::cmd_analyze(resolve(f)), resolve(f));
    if (*il) return emit(pl::cmd_illusion(resolve(f)), resolve(f), false);
    if (*sv) return serve(sf);
  } catch (const pl::WorklistPending& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cout << e.worklist();
    return pl::exit_code(e.code());
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pl::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pl::kExitInternal;
  }
  return pl::kExitUsage;
}
