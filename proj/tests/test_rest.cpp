#include "support/fixtures.hpp"
#include "support/rest.hpp"
#include "vulneval/error.hpp"

#include <doctest.h>

using namespace vulneval;
using namespace vulneval::service;
using nlohmann::json;

namespace {

struct Env {
    fixture::TempDir dir{"rest"};
    catalog::Store store{fixture::ticking_clock()};
    inference::MockBackend mock;
    std::unique_ptr<Service> svc;

    Env() {
        auto s = fixture::synthetic_org(6, 2, 1);
        mock.load(fixture::affected_mock_fixtures(s.pool));
        ServiceConfig cfg;
        cfg.export_dir = dir.path;
        svc = std::make_unique<Service>(store, mock, cfg);
    }
};

json asset_json(const std::string& id, const catalog::ComponentRef& c) {
    auto a = fixture::advisory_asset();
    a.id = id;
    a.software_name = "Software " + id;
    a.components = {c};
    return catalog::to_json(a);
}

json notification_json(const std::string& id, const catalog::ComponentRef& c) {
    auto n = fixture::advisory_notification_enriched();
    n.id = id;
    n.affected_components = {c};
    return catalog::to_json(n);
}

const catalog::ComponentRef kRst{"Rapid Storage Technology (RST)", "Intel", "15.7.x"};

}  // namespace

TEST_CASE("REST: health, auth and error mapping") {
    Env env;
    resttest::Running run(*env.svc, {std::string("tok")});
    resttest::Client anon(run.port);
    CHECK(anon.get("/healthz").status == 200);
    auto r = anon.get("/stats");
    CHECK(r.status == 401);
    CHECK(r.body.at("error") == "Unauthorized");
    resttest::Client wrong(run.port, "nope");
    CHECK(wrong.get("/stats").status == 401);

    resttest::Client c(run.port, "tok");
    CHECK(c.get("/stats").status == 200);
    CHECK(c.get("/evaluations/E404").status == 404);
    CHECK(c.get("/evaluations/E404").body.at("error") == "UnknownEvaluation");
    CHECK(c.post_raw("/assets", "{not json").status == 400);
    CHECK(c.post("/assets", json{{"id", "x"}}).status == 400);
    CHECK(c.post("/evaluations/E404/review", json{{"action", "Accept"}}).status == 404);
    CHECK(c.get("/evaluations?status=Bogus").status == 400);
}

TEST_CASE("REST: ingest, batch, queue, review, export, stats") {
    Env env;
    resttest::Running run(*env.svc);
    resttest::Client c(run.port);

    auto r = c.post("/assets", json::array({asset_json("A1", kRst), asset_json("A2", kRst)}));
    REQUIRE(r.status == 200);
    CHECK(r.body.size() == 2);
    CHECK(r.body[0].at("revision") == 1);
    // Optimistic concurrency on records.
    CHECK(c.post("/assets?expected_revision=0", asset_json("A1", kRst)).status == 409);
    CHECK(c.post("/assets?expected_revision=1", asset_json("A1", kRst)).status == 200);

    r = c.post("/notifications", notification_json("N1", kRst));
    REQUIRE(r.status == 200);
    CHECK(r.body.at("enrichment").at("typical_severity") == "VeryHigh");

    r = c.post("/batch/run", json::object());
    REQUIRE(r.status == 200);
    CHECK(r.body.at("drafts_created") == 2);
    CHECK(c.post("/batch/run", json::object()).body.at("drafts_created") == 0);

    r = c.get("/evaluations");
    REQUIRE(r.status == 200);
    CHECK(r.body.at("total") == 2);
    const auto items = r.body.at("items");
    CHECK(items[0].at("provenance") == "AiDraft");
    CHECK(items[0].at("vex_category") == "Affected");
    CHECK(items[0].at("vex_justification") == "None");
    const std::string id0 = items[0].at("id"), id1 = items[1].at("id");

    r = c.get("/evaluations?limit=1");
    CHECK(r.body.at("items").size() == 1);
    CHECK(r.body.at("next_cursor") == 1);
    r = c.get("/evaluations?limit=1&cursor=1");
    CHECK(r.body.at("items")[0].at("id") == id1);
    CHECK(r.body.at("next_cursor").is_null());

    CHECK(c.get("/evaluations/" + id0).body.at("id") == id0);
    const auto ctx = c.get("/evaluations/" + id0 + "/context");
    CHECK(ctx.status == 200);

    r = c.post("/evaluations/" + id0 + "/review", json{{"action", "Accept"}, {"reviewer", "r1"}, {"duration_seconds", 50}});
    REQUIRE(r.status == 200);
    CHECK(r.body.at("provenance") == "ExpertAccepted");
    r = c.post("/evaluations/" + id0 + "/review", json{{"action", "Accept"}});
    CHECK(r.status == 409);
    CHECK(r.body.at("error") == "AlreadyReviewed");

    // Flip to NotAffected without a justification: rules give Other, vector dropped.
    r = c.post("/evaluations/" + id1 + "/review",
               json{{"action", "Correct"},
                    {"reviewer", "r2"},
                    {"duration_seconds", 70},
                    {"corrected_fields", {{"vex_category", "NotAffected"}}}});
    REQUIRE(r.status == 200);
    CHECK(r.body.at("provenance") == "ExpertCorrected");
    CHECK(r.body.at("vex_justification") == "Other");
    CHECK(r.body.at("environmental_vector").is_null());
    CHECK(r.body.at("history").size() == 1);

    CHECK(c.get("/evaluations").body.at("total") == 0);
    CHECK(c.get("/evaluations?status=all").body.at("total") == 2);
    CHECK(c.get("/evaluations?status=ExpertCorrected").body.at("total") == 1);

    r = c.get("/export/retraining?since=0");
    REQUIRE(r.status == 200);
    CHECK(r.body.at("evaluations") == 2);
    CHECK(r.body.at("entries") == 7);  // 4 + 3, the NotAffected vector entry is not applicable
    CHECK(r.body.at("not_applicable") == 1);

    r = c.get("/stats");
    CHECK(r.body.at("accepted") == 1);
    CHECK(r.body.at("corrected") == 1);
    CHECK(r.body.at("acceptance_rate") == 0.5);
    CHECK(r.body.at("mean_review_seconds") == 60.0);
    CHECK(r.body.at("time_saved_seconds") == 2 * (194.0 - 60.0));
}

TEST_CASE("REST: review validation") {
    Env env;
    resttest::Running run(*env.svc);
    resttest::Client c(run.port);
    c.post("/assets", asset_json("A1", kRst));
    c.post("/notifications", notification_json("N1", kRst));
    c.post("/batch/run", json::object());
    const std::string id = c.get("/evaluations").body.at("items")[0].at("id");

    auto r = c.post("/evaluations/" + id + "/review", json{{"action", "Approve"}});
    CHECK(r.status == 422);
    r = c.post("/evaluations/" + id + "/review", json{{"action", "Correct"}, {"corrected_fields", {{"colour", "red"}}}});
    CHECK(r.status == 422);
    r = c.post("/evaluations/" + id + "/review",
               json{{"action", "Correct"}, {"corrected_fields", {{"environmental_vector", "Attack Vector is Sideways."}}}});
    CHECK(r.status == 422);
    CHECK(r.body.at("error") == "InvariantViolation");
    r = c.post("/evaluations/" + id + "/review",
               json{{"action", "Correct"}, {"corrected_fields", {{"vex_justification", "Other"}}}});
    CHECK(r.status == 422);  // Affected forces None, so nothing changes
    r = c.post("/evaluations/" + id + "/review", json{{"action", "Accept"}, {"corrected_fields", {{"internal_comment", "x"}}}});
    CHECK(r.status == 422);
    CHECK(c.get("/evaluations/" + id).body.at("provenance") == "AiDraft");
}

TEST_CASE("REST: vector validation and justification config") {
    Env env;
    resttest::Running run(*env.svc);
    resttest::Client c(run.port);
    c.post("/notifications", notification_json("N1", kRst));

    auto r = c.post("/cvss/validate", json{{"vector", fixture::kAdvisoryVector}});
    REQUIRE(r.status == 200);
    CHECK(r.body.at("valid") == true);
    CHECK(r.body.at("scores").at("base") == 6.7);
    CHECK(r.body.at("scores").at("temporal") == 5.8);

    r = c.post("/cvss/validate", json{{"vector", "Modified Attack Vector is Network."}, {"notification_id", "N1"}});
    CHECK(r.body.at("valid") == true);
    CHECK(r.body.at("vector") == std::string(fixture::kAdvisoryVector) + "/MAV:N");

    r = c.post("/cvss/validate", json{{"vector", "CVSS:3.1/AV:X"}});
    CHECK(r.body.at("valid") == false);
    CHECK(r.body.at("error") == "MalformedVector");
    CHECK(c.post("/cvss/validate", json{{"vector", "x"}, {"notification_id", "N-missing"}}).status == 404);

    r = c.get("/config/justifications");
    REQUIRE(r.status == 200);
    CHECK(r.body.at("labels").size() == 7);
    CHECK(r.body.at("labels")[0].at("token") == "ComponentNotPresent");
}

TEST_CASE("REST: concurrent batch requests get Busy") {
    struct Slow final : inference::Backend {
        std::string name() const override { return "slow"; }
        std::vector<std::string> generate_raw(const std::vector<std::string>& prompts, const inference::GenParams&,
                                              std::optional<std::size_t>) override {
            std::this_thread::sleep_for(std::chrono::milliseconds(400));
            return std::vector<std::string>(prompts.size(), "Category: Affected");
        }
    } slow;
    fixture::TempDir dir("rest");
    catalog::Store store(fixture::ticking_clock());
    ServiceConfig cfg;
    cfg.export_dir = dir.path;
    cfg.drafting.concurrency = 1;
    Service svc(store, slow, cfg);
    resttest::Running run(svc);
    resttest::Client c(run.port);
    c.post("/assets", asset_json("A1", kRst));
    c.post("/notifications", notification_json("N1", kRst));

    std::thread first([&] {
        resttest::Client c2(run.port);
        CHECK(c2.post("/batch/run", json::object()).status == 200);
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(150));
    const auto r = c.post("/batch/run", json::object());
    CHECK(r.status == 409);
    CHECK(r.body.at("error") == "Busy");
    first.join();
}
