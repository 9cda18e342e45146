#include "vulneval/error.hpp"
#include "vulneval/service.hpp"

#include <httplib.h>

// <sys/param.h> via httplib.
#undef roundup

namespace vulneval::service {

using nlohmann::json;

namespace {

int status_for(const Error& e) {
    const auto& k = e.kind();
    if (k == "UnknownEvaluation" || k == "NotFound") return 404;
    if (k == "AlreadyReviewed" || k == "Busy" || k == "VersionConflict") return 409;
    if (k == "InvariantViolation" || k == "InvalidReview" || k == "UnknownReference") return 422;
    if (k == "BackendUnavailable") return 503;
    return 400;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, std::string_view message) {
    send_json(res, status, {{"error", kind}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw Error("InvalidJson", e.what());
    }
}

std::optional<std::string> query(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) return std::nullopt;
    auto v = req.get_param_value(key);
    if (v.empty()) return std::nullopt;
    return v;
}

std::optional<std::int64_t> query_int(const httplib::Request& req, const char* key) {
    const auto v = query(req, key);
    if (!v) return std::nullopt;
    try {
        std::size_t used = 0;
        const auto n = std::stoll(*v, &used);
        if (used == v->size()) return n;
    } catch (const std::exception&) {
    }
    throw Error("InvalidQuery", std::string("query parameter '") + key + "' must be an integer");
}

std::optional<std::uint64_t> expected_revision(const httplib::Request& req) {
    const auto v = query_int(req, "expected_revision");
    if (v && *v < 0) throw Error("InvalidQuery", "expected_revision must not be negative");
    return v ? std::optional<std::uint64_t>(static_cast<std::uint64_t>(*v)) : std::nullopt;
}

// Accepts one record or an array of records.
template <typename F>
json for_each_record(const json& body, F make) {
    if (body.is_array()) {
        json out = json::array();
        for (const auto& item : body) out.push_back(make(item));
        return out;
    }
    return make(body);
}

}  // namespace

struct Server::Impl {
    Service& service;
    ServerOptions options;
    httplib::Server http;

    Impl(Service& s, ServerOptions o) : service(s), options(std::move(o)) { routes(); }

    template <typename F>
    httplib::Server::Handler wrap(F f) {
        return [this, f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const Error& e) {
                json body = {{"error", e.kind()}, {"message", e.what()}};
                if (const auto* af = dynamic_cast<const AlignmentFailure*>(&e)) body["orphans"] = af->orphans();
                send_json(res, status_for(e), body);
            } catch (const json::exception& e) {
                send_error(res, 400, "InvalidRecord", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "Internal", e.what());
            }
        };
    }

    void routes() {
        http.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            if (!options.bearer_token || req.path == "/healthz") return httplib::Server::HandlerResponse::Unhandled;
            if (req.get_header_value("Authorization") == "Bearer " + *options.bearer_token)
                return httplib::Server::HandlerResponse::Unhandled;
            send_error(res, 401, "Unauthorized", "missing or invalid bearer token");
            return httplib::Server::HandlerResponse::Handled;
        });

        http.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}});
        });

        http.Post("/assets", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            const auto rev = expected_revision(req);
            send_json(res, 200, for_each_record(body, [&](const json& j) {
                          return catalog::to_json(service.add_asset(catalog::asset_from_json(j), rev));
                      }));
        }));

        http.Post("/notifications", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            const auto rev = expected_revision(req);
            send_json(res, 200, for_each_record(body, [&](const json& j) {
                          return catalog::to_json(
                              service.add_notification(catalog::notification_from_json(j), rev));
                      }));
        }));

        http.Post("/batch/run", wrap([this](const httplib::Request& req, httplib::Response& res) {
            std::optional<Timestamp> since = query_int(req, "since");
            if (!req.body.empty()) {
                const auto body = parse_body(req);
                if (body.is_object() && body.contains("since") && !body.at("since").is_null())
                    since = body.at("since").get<Timestamp>();
            }
            send_json(res, 200, to_json(service.run_batch(since)));
        }));

        http.Get("/evaluations", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const auto status = query(req, "status").value_or("AiDraft");
            std::optional<catalog::VexCategory> category;
            if (const auto c = query(req, "category")) {
                category = catalog::category_from_string(*c);
                if (!category) throw Error("InvalidQuery", "unknown category '" + *c + "'");
            }
            std::vector<catalog::Evaluation> items;
            if (status == "AiDraft") {
                items = service.review_queue(
                    {query(req, "org"), query(req, "product"), query(req, "notification"), category});
            } else {
                catalog::EvaluationFilter f;
                if (status != "all") {
                    f.status = catalog::provenance_from_string(status);
                    if (!f.status) throw Error("InvalidQuery", "unknown status '" + status + "'");
                }
                f.category = category;
                f.organization = query(req, "org");
                f.product = query(req, "product");
                f.notification_id = query(req, "notification");
                items = service.store().list_evaluations(f);
            }
            const auto total = items.size();
            const auto cursor = static_cast<std::size_t>(std::max<std::int64_t>(0, query_int(req, "cursor").value_or(0)));
            const auto limit = query_int(req, "limit");
            const auto begin = std::min(cursor, total);
            const auto end = limit && *limit >= 0 ? std::min(total, begin + static_cast<std::size_t>(*limit)) : total;
            json out = json::array();
            for (auto i = begin; i < end; ++i) out.push_back(catalog::to_json(items[i]));
            send_json(res, 200,
                      {{"items", out}, {"total", total}, {"next_cursor", end < total ? json(end) : json(nullptr)}});
        }));

        http.Get(R"(/evaluations/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const auto id = req.matches[1].str();
            const auto e = service.store().get_evaluation(id);
            if (!e) throw UnknownEvaluation(id);
            send_json(res, 200, catalog::to_json(*e));
        }));

        http.Get(R"(/evaluations/([^/]+)/context)", wrap([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, service.evaluation_context(req.matches[1].str()));
        }));

        http.Post(R"(/evaluations/([^/]+)/review)", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const auto action = review_from_json(req.matches[1].str(), parse_body(req));
            send_json(res, 200, catalog::to_json(service.submit_review(action)));
        }));

        http.Get("/export/retraining", wrap([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, to_json(service.export_retraining(query_int(req, "since").value_or(0))));
        }));

        http.Get("/stats", wrap([this](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, to_json(service.stats()));
        }));

        http.Get("/config/justifications", wrap([this](const httplib::Request&, httplib::Response& res) {
            json labels = json::array();
            for (auto j : {catalog::VexJustification::ComponentNotPresent,
                           catalog::VexJustification::VulnerableCodeNotPresent,
                           catalog::VexJustification::VulnerableCodeNotInExecutePath,
                           catalog::VexJustification::VulnerableCodeCannotBeControlledByAdversary,
                           catalog::VexJustification::InlineMitigationsAlreadyExist, catalog::VexJustification::Other,
                           catalog::VexJustification::None})
                labels.push_back({{"token", catalog::to_string(j)}, {"label", catalog::justification_label(j)}});
            send_json(res, 200, {{"labels", labels}, {"aliases", service.config().vocabulary.to_json()}});
        }));

        // Live vector feedback: {"vector": text, "notification_id"?: id}.
        http.Post("/cvss/validate", wrap([this](const httplib::Request& req, httplib::Response& res) {
            const auto body = parse_body(req);
            if (!body.is_object() || !body.contains("vector")) throw Error("InvalidRecord", "body needs 'vector'");
            std::optional<cvss::CvssVector> base;
            if (const auto nid = body.value("notification_id", std::string{}); !nid.empty()) {
                const auto n = service.store().get_notification(nid);
                if (!n) throw NotFound("notification " + nid);
                base = n->base_temporal_vector;
            }
            try {
                const auto v = catalog::parse_environmental(body.at("vector").get<std::string>(), base);
                const auto scores = cvss::score_vector(v);
                json s = {{"base", scores.base}};
                if (scores.temporal) s["temporal"] = *scores.temporal;
                if (scores.environmental) s["environmental"] = *scores.environmental;
                send_json(res, 200, {{"valid", true}, {"vector", cvss::serialize_vector(v)}, {"scores", s}});
            } catch (const Error& e) {
                send_json(res, 200, {{"valid", false}, {"error", e.kind()}, {"message", e.what()}});
            }
        }));
    }
};

Server::Server(Service& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {}

Server::~Server() { stop(); }

bool Server::listen(const std::string& host, int port) { return impl_->http.listen(host, port); }

int Server::bind_any_port(const std::string& host) { return impl_->http.bind_to_any_port(host); }

bool Server::listen_after_bind() { return impl_->http.listen_after_bind(); }

void Server::stop() {
    if (impl_) impl_->http.stop();
}

bool Server::running() const { return impl_->http.is_running(); }

}  // namespace vulneval::service
