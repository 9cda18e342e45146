#pragma once

// The end-to-end scenario: synthetic organisation, mock backend, batch run
// and reviews over REST, retraining export, second batch run.

#include "support/fixtures.hpp"
#include "support/rest.hpp"
#include "vulneval/promptgen.hpp"
#include "vulneval/tokenizer.hpp"

#include <fstream>

namespace e2e {

struct Outcome {
    std::size_t first_drafts = 0;
    std::size_t second_drafts = 0;
    std::size_t reviewed = 0;
    std::size_t exported = 0;      // reported by the service
    std::size_t file_entries = 0;  // lines in the file that parse and fit the budget
    std::size_t total_pairs = 0;   // applicable pairs by scan
    double seconds = 0;
    std::string error;
};

inline Outcome run(std::size_t n_assets = 50, std::size_t n_notifications = 20, std::size_t n_review = 10) {
    using namespace vulneval;
    using clock = std::chrono::steady_clock;
    Outcome out;
    const auto t0 = clock::now();
    try {
        fixture::TempDir dir("e2e");
        catalog::Store store(dir.path / "db", fixture::ticking_clock());
        const auto org = fixture::synthetic_org(n_assets, n_notifications, 42);
        inference::MockBackend mock;
        mock.load(fixture::affected_mock_fixtures(org.pool));
        service::ServiceConfig cfg;
        cfg.export_dir = dir.path / "export";
        service::Service svc(store, mock, cfg);
        resttest::Running server(svc, {std::string("e2e-token")});
        resttest::Client c(server.port, "e2e-token");

        const auto array_of = [](const auto& records) {
            auto a = nlohmann::json::array();
            for (const auto& rec : records) a.push_back(catalog::to_json(rec));
            return a;
        };
        auto posted = c.post("/assets", array_of(org.assets));
        if (posted.status != 200) throw std::runtime_error("POST /assets " + posted.body.dump());
        posted = c.post("/notifications", array_of(org.notifications));
        if (posted.status != 200) throw std::runtime_error("POST /notifications " + posted.body.dump());

        for (const auto& n : org.notifications) out.total_pairs += store.applicable_assets(n).size();

        auto r = c.post("/batch/run", nlohmann::json::object());
        if (r.status != 200) throw std::runtime_error("batch " + r.body.dump());
        out.first_drafts = r.body.at("drafts_created").get<std::size_t>();

        const auto queue = c.get("/evaluations?limit=" + std::to_string(n_review));
        for (const auto& item : queue.body.at("items")) {
            const auto id = item.at("id").get<std::string>();
            const auto rv = c.post("/evaluations/" + id + "/review",
                                   {{"action", "Accept"}, {"reviewer", "expert"}, {"duration_seconds", 45}});
            if (rv.status != 200) throw std::runtime_error("review " + rv.body.dump());
            ++out.reviewed;
        }

        r = c.get("/export/retraining?since=0");
        if (r.status != 200) throw std::runtime_error("export " + r.body.dump());
        out.exported = r.body.at("entries").get<std::size_t>();
        const auto tok = promptgen::make_default_tokenizer();
        std::ifstream in(r.body.at("path").get<std::string>());
        for (std::string line; std::getline(in, line);) {
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) continue;
            const auto e = promptgen::sft_entry_from_json(j);
            if (!e.prompt.empty() && !e.response.empty() && tok->count(e.text()) <= promptgen::kDefaultMaxTokens) ++out.file_entries;
        }

        r = c.post("/batch/run", nlohmann::json::object());
        if (r.status != 200) throw std::runtime_error("batch " + r.body.dump());
        out.second_drafts = r.body.at("drafts_created").get<std::size_t>();
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    out.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    return out;
}

}  // namespace e2e
