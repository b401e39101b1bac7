#pragma once

#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "causalnet/collection/session.hpp"
#include "causalnet/error.hpp"
#include "causalnet/io.hpp"

namespace causalnet::collection {

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownCohort:
    case ErrorCode::UnknownRecord: return 404;
    case ErrorCode::WrongStage:
    case ErrorCode::CohortOpen:
    case ErrorCode::AlreadyDecided: return 409;
    case ErrorCode::CohortClosed: return 403;
    case ErrorCode::InvalidLink:
    case ErrorCode::ActionDisabledByProfile:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::MalformedAnswers:
    case ErrorCode::OutOfRange: return 422;
    case ErrorCode::IoError: return 500;
    default: return 400;
  }
}

inline AlterationKind alteration_kind_from_string(const std::string& s) {
  for (auto k : {AlterationKind::ChangeDirection, AlterationKind::Delete, AlterationKind::NoOp})
    if (s == to_string(k)) return k;
  throw Error(ErrorCode::ParseError, "unknown alteration action '" + s + "'");
}

// Session state plus what a client needs to render it: narrative and DOT per network.
inline nlohmann::json session_view(const Session& s, const ProtocolProfile& profile) {
  auto j = session_to_json(s);
  nlohmann::json views = nlohmann::json::array();
  for (const auto& n : s.networks) {
    std::string dot = "digraph network {\n";
    for (const auto& l : n.links)
      dot += "  \"" + l.cause.display + "\" -> \"" + l.effect.display + "\";\n";
    dot += "}\n";
    views.push_back({{"narrative", n.links.empty() ? "" : generate_narrative(n)},
                     {"dot", dot},
                     {"links_remaining", profile.links_per_network - std::min(n.links.size(), profile.links_per_network)}});
  }
  j["views"] = views;
  return j;
}

// HTTP+JSON front end for a SessionService. Errors come back as
// {"error": "<ErrorCode>", "message": "...", ["violation": "<LinkViolation>"]}.
class CollectionServer {
 public:
  explicit CollectionServer(SessionService& service) : svc_(service) { routes(); }

  // Binds host:port (port 0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port) {
    if (port == 0) return srv_.bind_to_any_port(host);
    return srv_.bind_to_port(host, port) ? port : -1;
  }

  bool run() { return srv_.listen_after_bind(); }
  void stop() { srv_.stop(); }
  void wait_until_ready() const { srv_.wait_until_ready(); }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;
  using json = nlohmann::json;

  static void reply(Res& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <class F>
  static httplib::Server::Handler guarded(F f) {
    return [f](const Req& req, Res& res) {
      try {
        f(req, res);
      } catch (const SessionService::LinkRejected& e) {
        reply(res,
              {{"error", std::string(to_string(e.code()))},
               {"violation", std::string(to_string(e.violation()))},
               {"message", e.what()}},
              http_status(e.code()));
      } catch (const Error& e) {
        reply(res, {{"error", std::string(to_string(e.code()))}, {"message", e.what()}}, http_status(e.code()));
      } catch (const json::exception& e) {
        reply(res, {{"error", "ParseError"}, {"message", e.what()}}, 400);
      }
    };
  }

  static json body(const Req& req) { return io::parse_json(req.body, "request body"); }

  void routes() {
    srv_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
    srv_.Options(R"(/.*)", [](const Req&, Res& res) { res.status = 204; });

    srv_.Get("/health", [](const Req&, Res& res) { reply(res, {{"status", "ok"}}); });

    srv_.Get("/config", guarded([this](const Req&, Res& res) {
      json attrs = json::array();
      for (const auto& a : svc_.catalog().attributes()) attrs.push_back(a.display);
      const auto& p = svc_.profile();
      reply(res, {{"profile",
                   {{"name", p.name},
                    {"links_per_network", p.links_per_network},
                    {"networks_per_worker", p.networks_per_worker},
                    {"allow_delete", p.allow_delete}}},
                  {"catalog_version", svc_.catalog().version()},
                  {"attributes", attrs},
                  {"demographic_questions", svc_.config().demographic_questions},
                  {"usability_statements", svc_.config().usability_statements}});
    }));

    srv_.Post("/sessions", guarded([this](const Req&, Res& res) {
      reply(res, session_view(svc_.create_session(), svc_.profile()), 201);
    }));

    srv_.Get(R"(/sessions/([A-Za-z0-9_-]+))", guarded([this](const Req& req, Res& res) {
      reply(res, session_view(svc_.get(req.matches[1]), svc_.profile()));
    }));

    srv_.Post(R"(/sessions/([A-Za-z0-9_-]+)/test)", guarded([this](const Req& req, Res& res) {
      const std::string id = req.matches[1];
      const bool pass = svc_.submit_test(id, io::link_from_json(body(req), svc_.catalog()));
      reply(res, {{"passed", pass}, {"stage", std::string(to_string(svc_.get(id).stage))}});
    }));

    srv_.Post(R"(/sessions/([A-Za-z0-9_-]+)/demographics)", guarded([this](const Req& req, Res& res) {
      const auto b = body(req);
      const auto seg = svc_.submit_demographics(req.matches[1],
                                                b.at("demographics").get<std::vector<std::string>>(),
                                                b.at("sassy").get<std::vector<int>>());
      reply(res, {{"segment", std::string(to_string(seg))}, {"stage", "creation"}});
    }));

    srv_.Get(R"(/sessions/([A-Za-z0-9_-]+)/options)", guarded([this](const Req& req, Res& res) {
      const auto o = svc_.link_options(req.matches[1]);
      reply(res, {{"network", o.network}, {"round", o.round}, {"selected", o.selected}, {"unselected", o.unselected}});
    }));

    srv_.Post(R"(/sessions/([A-Za-z0-9_-]+)/links)", guarded([this](const Req& req, Res& res) {
      const std::string id = req.matches[1];
      const auto out = svc_.submit_link(id, io::link_from_json(body(req), svc_.catalog()));
      const auto s = svc_.get(id);
      reply(res, {{"network", out.network},
                  {"links_remaining", out.links_remaining},
                  {"stage", std::string(to_string(out.stage))},
                  {"narrative", generate_narrative(s.networks.at(out.network))}});
    }));

    srv_.Post(R"(/sessions/([A-Za-z0-9_-]+)/alteration)", guarded([this](const Req& req, Res& res) {
      const std::string id = req.matches[1];
      const auto b = body(req);
      std::vector<AlterationRequest> actions;
      for (const auto& a : b.at("actions"))
        actions.push_back({a.value("network", std::size_t{0}),
                           {a.at("link_index").get<std::size_t>(),
                            alteration_kind_from_string(a.at("action").get<std::string>())}});
      svc_.submit_alteration(id, actions);
      reply(res, session_view(svc_.get(id), svc_.profile()));
    }));

    srv_.Post(R"(/sessions/([A-Za-z0-9_-]+)/confidence)", guarded([this](const Req& req, Res& res) {
      svc_.submit_confidence(req.matches[1], body(req).at("confidence").get<int>());
      reply(res, {{"stage", "usability"}});
    }));

    srv_.Post(R"(/sessions/([A-Za-z0-9_-]+)/usability)", guarded([this](const Req& req, Res& res) {
      const auto code = svc_.submit_usability(req.matches[1], body(req).at("ratings").get<std::vector<int>>());
      reply(res, {{"stage", "complete"}, {"verification_code", code}});
    }));

    // ---- admin ----

    srv_.Post("/admin/cohorts/close", guarded([this](const Req&, Res& res) {
      reply(res, {{"closed", svc_.current_cohort()}, {"open", svc_.close_cohort()}});
    }));

    srv_.Post("/admin/study/stop", guarded([this](const Req&, Res& res) {
      svc_.stop_study();
      reply(res, {{"stopped", true}, {"last_cohort", svc_.current_cohort()}});
    }));

    srv_.Get(R"(/admin/cohorts/(\d+))", guarded([this](const Req& req, Res& res) {
      const int n = std::stoi(req.matches[1]);
      reply(res, cohort_report_to_json(svc_.cohort_report(n), svc_.options().saturation_epsilon));
    }));

    srv_.Get("/admin/reviews", guarded([this](const Req&, Res& res) {
      json out = json::array();
      for (const auto& r : svc_.reviews()) out.push_back(io::review_to_json(r));
      reply(res, out);
    }));

    srv_.Post(R"(/admin/reviews/([A-Za-z0-9_-]+))", guarded([this](const Req& req, Res& res) {
      const auto b = body(req);
      const auto r = svc_.review(req.matches[1], review_decision_from_string(b.at("decision").get<std::string>()),
                                 b.value("note", std::string()));
      reply(res, io::review_to_json(r));
    }));

    srv_.Get("/admin/networks", guarded([this](const Req&, Res& res) {
      res.set_content(io::networks_to_jsonl(svc_.finalized_networks()), "application/x-ndjson");
    }));
  }

  SessionService& svc_;
  httplib::Server srv_;
};

}  // namespace causalnet::collection
