#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "support/fixtures.hpp"
#include "vulneval/catalog.hpp"
#include "vulneval/cskg.hpp"
#include "vulneval/error.hpp"
#include "vulneval/store.hpp"

using namespace vulneval;
using namespace vulneval::catalog;

namespace {

// All CAPEC ids reachable by walking the raw records: CVE id, its CWE list,
// the CWE's related list, kept only if a CAPEC entry exists.
std::set<std::string> enumerate_paths(const std::vector<ingest::CveRecord>& cves,
                                      const std::vector<ingest::CweEntry>& cwes,
                                      const std::vector<ingest::CapecEntry>& capecs, const std::string& cve_id) {
    std::set<std::string> out;
    for (const auto& c : cves) {
        if (c.id != cve_id) continue;
        for (const auto& cwe_id : c.cwe_ids)
            for (const auto& w : cwes) {
                if (w.id != cwe_id) continue;
                for (const auto& cap : w.related_capec_ids)
                    for (const auto& e : capecs)
                        if (e.id == cap) out.insert(cap);
            }
    }
    return out;
}

Evaluation draft(const std::string& id, const std::string& asset, const std::string& n, VexCategory c) {
    Evaluation e;
    e.id = id;
    e.asset_id = asset;
    e.notification_id = n;
    e.vex_category = c;
    e.vex_justification = c == VexCategory::Affected ? VexJustification::None : VexJustification::ComponentNotPresent;
    if (c == VexCategory::Affected)
        e.environmental_vector = cvss::parse_vector("CVSS:3.1/AV:L/AC:H/PR:L/UI:R/S:U/C:H/I:H/A:H/MAV:L");
    return e;
}

}  // namespace

TEST_CASE("graph construction and the three-hop fixture") {
    const auto g = fixture::advisory_graph();
    const auto caps = cskg::capecs_for_cve(g, "CVE-2022-43456");
    REQUIRE(caps.size() == 1);
    CHECK(caps[0].id == "CAPEC-471");
    CHECK(cskg::capecs_for_cve(g, "CVE-1999-0001").empty());
    CHECK(g.diagnostics().empty());

    CHECK(cskg::build_graph({}, {}, {}).empty());

    auto bad = fixture::advisory_cve();
    bad.cwe_ids = {"CWE-999"};
    const auto dangling = cskg::build_graph({bad}, {}, {});
    REQUIRE(dangling.diagnostics().size() == 1);
    CHECK(dangling.diagnostics()[0] == cskg::DanglingReference{"CVE-2022-43456", "CWE-999"});
}

TEST_CASE("two CWEs sharing a CAPEC yield it once, numeric order") {
    ingest::CveRecord c;
    c.id = "CVE-2020-0001";
    c.description = "x";
    c.cwe_ids = {"CWE-1", "CWE-2"};
    const auto g = cskg::build_graph({c}, {{"CWE-1", "", "", {"CAPEC-10", "CAPEC-9"}}, {"CWE-2", "", "", {"CAPEC-10"}}},
                                     {{"CAPEC-9", "", {}, ingest::Severity::Low, {}},
                                      {"CAPEC-10", "", {}, ingest::Severity::Low, {}}});
    const auto caps = cskg::capecs_for_cve(g, c.id);
    REQUIRE(caps.size() == 2);
    CHECK(caps[0].id == "CAPEC-9");
    CHECK(caps[1].id == "CAPEC-10");
}

TEST_CASE("enrichment of the advisory notification") {
    const auto e = cskg::enrich_notification(fixture::advisory_graph(), {"CVE-2022-43456"});
    CHECK(e.prerequisites == std::vector<std::string>{fixture::kAdvisoryPrerequisite});
    CHECK(e.typical_severity == ingest::Severity::VeryHigh);
    CHECK(e.mitigations == fixture::advisory_mitigations());
    CHECK(std::find(e.mitigations.begin(), e.mitigations.end(), "Design: Enforce principle of least privilege.") !=
          e.mitigations.end());
    CHECK(e.contributing_capec_ids == std::vector<std::string>{"CAPEC-471"});

    const auto none = cskg::enrich_notification(fixture::advisory_graph(), {});
    CHECK(none.prerequisites.empty());
    CHECK(none.mitigations.empty());
    CHECK(none.typical_severity == ingest::Severity::Unknown);

    CHECK(cskg::enrichment_from_json(cskg::to_json(e)) == e);
}

TEST_CASE("enrichment takes the maximum severity") {
    ingest::CveRecord a, b;
    a.id = "CVE-2020-0001";
    a.cwe_ids = {"CWE-1"};
    b.id = "CVE-2020-0002";
    b.cwe_ids = {"CWE-2"};
    const auto g = cskg::build_graph({a, b}, {{"CWE-1", "", "", {"CAPEC-1"}}, {"CWE-2", "", "", {"CAPEC-2"}}},
                                     {{"CAPEC-1", "", {"p"}, ingest::Severity::Medium, {"m"}},
                                      {"CAPEC-2", "", {"p", "q"}, ingest::Severity::High, {"m"}}});
    const auto e = cskg::enrich_notification(g, {a.id, b.id});
    CHECK(e.typical_severity == ingest::Severity::High);
    CHECK(e.prerequisites == std::vector<std::string>{"p", "q"});
    CHECK(e.mitigations == std::vector<std::string>{"m"});
}

TEST_CASE("graph reachability is sound and monotone on random fixtures") {
    std::mt19937_64 rng(101);
    for (int round = 0; round < 200; ++round) {
        std::vector<ingest::CveRecord> cves;
        std::vector<ingest::CweEntry> cwes;
        std::vector<ingest::CapecEntry> capecs;
        for (int i = 0; i < 4; ++i) {
            ingest::CveRecord c;
            c.id = "CVE-2020-000" + std::to_string(i);
            for (int k = 0; k < 3; ++k)
                if (rng() % 2) c.cwe_ids.push_back("CWE-" + std::to_string(rng() % 6));
            cves.push_back(c);
        }
        for (int w = 0; w < 5; ++w) {  // CWE-5 may be dangling
            ingest::CweEntry e{"CWE-" + std::to_string(w), "", "", {}};
            for (int k = 0; k < 3; ++k)
                if (rng() % 2) e.related_capec_ids.push_back("CAPEC-" + std::to_string(rng() % 8));
            cwes.push_back(e);
        }
        for (int p = 0; p < 7; ++p)  // CAPEC-7 may be dangling
            capecs.push_back({"CAPEC-" + std::to_string(p), "", {"pre" + std::to_string(p)},
                              static_cast<ingest::Severity>(rng() % 6), {"mit" + std::to_string(p)}});

        const auto g = cskg::build_graph(cves, cwes, capecs);
        for (const auto& c : cves) {
            std::set<std::string> got;
            for (const auto& e : cskg::capecs_for_cve(g, c.id)) got.insert(e.id);
            REQUIRE(got == enumerate_paths(cves, cwes, capecs, c.id));
        }

        // Adding an edge never shrinks an enrichment.
        auto more = cwes;
        more[rng() % more.size()].related_capec_ids.push_back("CAPEC-" + std::to_string(rng() % 7));
        const auto g2 = cskg::build_graph(cves, more, capecs);
        for (const auto& c : cves) {
            const auto before = cskg::enrich_notification(g, {c.id});
            const auto after = cskg::enrich_notification(g2, {c.id});
            for (const auto& p : before.prerequisites)
                REQUIRE(std::find(after.prerequisites.begin(), after.prerequisites.end(), p) != after.prerequisites.end());
            for (const auto& m : before.mitigations)
                REQUIRE(std::find(after.mitigations.begin(), after.mitigations.end(), m) != after.mitigations.end());
            REQUIRE(static_cast<int>(after.typical_severity) >= static_cast<int>(before.typical_severity));
        }
    }
}

TEST_CASE("cskg export lists nodes and dangling edges") {
    auto bad = fixture::advisory_cve();
    bad.cwe_ids.push_back("CWE-999");
    auto g = cskg::build_graph({bad}, {fixture::cwe427()}, {fixture::capec471()});
    const auto j = cskg::export_json(g);
    CHECK(j.at("capec_nodes") == nlohmann::json::array({"CAPEC-471"}));
    CHECK(j.at("dangling").size() == 1);
    // Append-only growth resolves the dangling edge.
    g.add_cwe({"CWE-999", "", "", {}});
    g.refresh_diagnostics();
    CHECK(g.diagnostics().empty());
}

TEST_CASE("component matching") {
    const auto asset = fixture::advisory_asset();
    Notification n;
    n.affected_components = {{"Rapid Storage Technology (RST)", "Intel", "15.7.x"}};
    const auto m = match_components(asset, n);
    REQUIRE(m.size() == 1);
    CHECK(m[0].render() == "Rapid Storage Technology (RST) - Intel - 15.7.x");

    n.affected_components = {{"OpenSSL", "OpenSSL", "3.0"}};
    CHECK(match_components(asset, n).empty());

    CHECK(version_matches("15.7.3", "15.7.x"));
    CHECK(version_matches("15.7.3", "15.7.*"));
    CHECK_FALSE(version_matches("15.8.1", "15.7.x"));
    CHECK_FALSE(version_matches("15.70", "15.7.x"));
    CHECK(version_matches("anything", "x"));
    CHECK(version_matches(" 25.0 ", "25.0"));
    CHECK(normalize("  Rapid  Storage\tTechnology ") == "rapid storage technology");
}

TEST_CASE("version wildcard agrees with a prefix oracle over a generated table") {
    std::vector<std::string> versions;
    for (int a = 14; a <= 16; ++a)
        for (int b = 6; b <= 8; ++b) {
            versions.push_back(std::to_string(a) + "." + std::to_string(b));
            for (int c = 0; c < 12; c += 5) versions.push_back(std::to_string(a) + "." + std::to_string(b) + "." + std::to_string(c));
        }
    for (const auto& pattern : versions) {
        const auto wild = pattern + ".x";
        for (const auto& v : versions) {
            const bool expect = v.size() > pattern.size() + 1 && v.compare(0, pattern.size() + 1, pattern + ".") == 0;
            REQUIRE(version_matches(v, wild) == expect);
            REQUIRE(version_matches(v, pattern) == (v == pattern));
        }
    }
}

TEST_CASE("justification vocabulary") {
    JustificationVocabulary v;
    CHECK(v.match("Component not present") == VexJustification::ComponentNotPresent);
    CHECK(v.match("component_not_present") == VexJustification::ComponentNotPresent);
    CHECK(v.match("ComponentNotPresent.") == VexJustification::ComponentNotPresent);
    CHECK(v.match("  inline mitigations ALREADY exist ") == VexJustification::InlineMitigationsAlreadyExist);
    CHECK_FALSE(v.match("code is unreachable in our build"));
    CHECK_FALSE(v.match(""));
    v.add_alias(VexJustification::VulnerableCodeNotInExecutePath, "code is unreachable in our build");
    CHECK(v.match("Code is unreachable in our build.") == VexJustification::VulnerableCodeNotInExecutePath);
}

TEST_CASE("record JSON round trips") {
    const auto a = fixture::advisory_asset();
    CHECK(asset_from_json(to_json(a)) == a);
    const auto n = fixture::advisory_notification_enriched();
    CHECK(notification_from_json(to_json(n)) == n);
    auto e = draft("E1", a.id, n.id, VexCategory::Affected);
    e.flags = {"vector_invalid"};
    e.history.push_back({5, "rev", "Accept", to_json(draft("E1", a.id, n.id, VexCategory::NotAffected))});
    CHECK(evaluation_from_json(to_json(e)) == e);

    CHECK_THROWS_AS(asset_from_json(nlohmann::json{{"organization", "x"}}), InvalidRecord);
    CHECK_THROWS_AS(evaluation_from_json(nlohmann::json{{"id", "E"}, {"asset_id", "A"}, {"notification_id", "N"},
                                                        {"vex_category", "Maybe"}}),
                    InvalidRecord);
    // Legacy CVSS v2 strings are kept but never scored.
    auto legacy = to_json(n);
    legacy["base_temporal_vector"] = "AV:N/AC:L/Au:N/C:P/I:P/A:P";
    legacy["cvss_version"] = "2.0";
    const auto ln = notification_from_json(legacy);
    CHECK_FALSE(ln.base_temporal_vector);
    CHECK(ln.legacy_vector == "AV:N/AC:L/Au:N/C:P/I:P/A:P");
}

TEST_CASE("invariants") {
    auto e = draft("E1", "A", "N", VexCategory::Affected);
    CHECK_FALSE(check_invariants(e));
    e.vex_justification = VexJustification::Other;
    CHECK(check_invariants(e));
    auto n = draft("E2", "A", "N", VexCategory::NotAffected);
    CHECK_FALSE(check_invariants(n));
    n.environmental_vector = cvss::parse_vector("CVSS:3.1/AV:L/AC:H/PR:L/UI:R/S:U/C:H/I:H/A:H");
    CHECK(check_invariants(n));
}

TEST_CASE("store upsert, lookup and references") {
    Store s(fixture::ticking_clock());
    const auto a = s.upsert_asset(fixture::advisory_asset());
    CHECK(a.revision == 1);
    CHECK(s.get_asset(a.id) == a);
    const auto n = s.upsert_notification(fixture::advisory_notification());

    CHECK_THROWS_AS(s.upsert_evaluation(draft("E1", "missing", n.id, VexCategory::Affected)), UnknownReference);
    CHECK_THROWS_AS(s.upsert_evaluation(draft("E1", a.id, "missing", VexCategory::Affected)), UnknownReference);
    auto broken = draft("E1", a.id, n.id, VexCategory::Affected);
    broken.vex_justification = VexJustification::Other;
    CHECK_THROWS_AS(s.upsert_evaluation(broken), InvariantViolation);

    const auto e = s.upsert_evaluation(draft("E1", a.id, n.id, VexCategory::Affected), 0);
    CHECK(s.find_evaluation(a.id, n.id)->id == "E1");
    CHECK_THROWS_AS(s.upsert_evaluation(draft("E1", a.id, n.id, VexCategory::Affected), 0), VersionConflict);
    auto second = s.upsert_evaluation(draft("E1", a.id, n.id, VexCategory::Affected), 1);
    CHECK(second.revision == 2);
    CHECK(second.created_at == e.created_at);
    CHECK(second.updated_at > e.updated_at);
    CHECK(s.notifications_for_cve("CVE-2022-43456") == std::vector<std::string>{n.id});
}

TEST_CASE("applicable assets") {
    Store s(fixture::ticking_clock());
    auto make = [](std::string id, ComponentRef c) {
        Asset a;
        a.id = std::move(id);
        a.software_name = "sw " + a.id;
        a.components = {std::move(c)};
        return a;
    };
    s.upsert_asset(make("A3", {"libfoo", "Foo", "1.2.3"}));
    s.upsert_asset(make("A1", {"libbar", "Bar", "1.0"}));
    s.upsert_asset(make("A2", {"LibFoo", "foo", "1.2.9"}));
    Notification n;
    n.id = "N";
    n.affected_components = {{"libfoo", "Foo", "1.2.x"}};
    CHECK(s.applicable_assets(n) == std::vector<std::string>{"A2", "A3"});
    n.affected_components = {{"libbar", "Bar", "1.0"}};
    CHECK(s.applicable_assets(n) == std::vector<std::string>{"A1"});
    n.affected_components = {{"unused", "Nobody", "1"}};
    CHECK(s.applicable_assets(n).empty());

    // Brute-force scan oracle.
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        n.affected_components = {{rng() % 2 ? "libfoo" : "libbar", rng() % 2 ? "Foo" : "Bar",
                                  std::string(rng() % 2 ? "1.2.x" : "1.0")}};
        std::vector<std::string> expect;
        for (const auto& a : s.list_assets())
            if (!match_components(a, n).empty()) expect.push_back(a.id);
        REQUIRE(s.applicable_assets(n) == expect);
    }
}

TEST_CASE("evaluation filters agree with a scan") {
    Store s(fixture::ticking_clock());
    auto a = fixture::advisory_asset();
    s.upsert_asset(a);
    auto a2 = a;
    a2.id = "A-OTHER";
    a2.organization = "HC";
    s.upsert_asset(a2);
    for (int i = 0; i < 10; ++i) {
        auto n = fixture::advisory_notification();
        n.id = "N" + std::to_string(i);
        s.upsert_notification(n);
        auto e = draft("E" + std::to_string(i), i % 3 ? a.id : a2.id, n.id,
                       i % 2 ? VexCategory::Affected : VexCategory::NotAffected);
        if (i % 4 == 0) e.provenance = Provenance::ExpertAccepted;
        s.upsert_evaluation(e);
    }
    const auto all = s.list_evaluations();
    CHECK(all.size() == 10);
    EvaluationFilter f;
    f.status = Provenance::AiDraft;
    f.category = VexCategory::Affected;
    const auto got = s.list_evaluations(f);
    std::vector<Evaluation> expect;
    std::copy_if(all.begin(), all.end(), std::back_inserter(expect), [](const Evaluation& e) {
        return e.provenance == Provenance::AiDraft && e.vex_category == VexCategory::Affected;
    });
    CHECK(got == expect);
    EvaluationFilter org;
    org.organization = "HC";
    for (const auto& e : s.list_evaluations(org)) CHECK(e.asset_id == "A-OTHER");
    CHECK(s.list_evaluations(org).size() == 4);
}

TEST_CASE("durable store replays its journal") {
    fixture::TempDir dir("store");
    std::string next;
    {
        Store s(dir.path, fixture::ticking_clock());
        s.upsert_asset(fixture::advisory_asset());
        s.upsert_notification(fixture::advisory_notification_enriched());
        auto e = draft(s.next_evaluation_id(), "A-SYNGO", "N-43456", VexCategory::Affected);
        s.upsert_evaluation(e);
        next = s.next_evaluation_id();
    }
    {
        Store s(dir.path, fixture::ticking_clock());
        CHECK(s.list_assets().size() == 1);
        CHECK(s.get_notification("N-43456")->enrichment);
        CHECK(s.list_evaluations().size() == 1);
        // Ids handed out but never stored may be reissued; stored ones never are.
        const auto fresh = s.next_evaluation_id();
        CHECK_FALSE(s.get_evaluation(fresh));
        CHECK(fresh >= next);
        s.compact();
    }
    Store s(dir.path, fixture::ticking_clock());
    CHECK(s.list_evaluations().size() == 1);
    auto stored = *s.get_asset("A-SYNGO");
    CHECK(stored.revision == 1);
    stored.created_at = stored.updated_at = 0;
    stored.revision = 0;
    CHECK(stored == fixture::advisory_asset());
}

TEST_CASE("JSONL import and export") {
    Store s(fixture::ticking_clock());
    std::istringstream assets(to_json(fixture::advisory_asset()).dump() + "\n\n");
    std::istringstream notes(to_json(fixture::advisory_notification()).dump() + "\n");
    std::istringstream evals(
        R"({"id":"E9","asset_id":"A-SYNGO","notification_id":"N-43456","vex_category":"Affected","environmental_vector":"Modified Attack Vector is Network."})"
        "\n");
    const auto counts = s.import_jsonl(&assets, &notes, &evals);
    CHECK(counts.assets == 1);
    CHECK(counts.notifications == 1);
    CHECK(counts.evaluations == 1);
    const auto e = s.get_evaluation("E9");
    REQUIRE(e);
    CHECK(e->vex_justification == VexJustification::None);
    CHECK(e->provenance == Provenance::AiDraft);
    REQUIRE(e->environmental_vector);
    CHECK(e->environmental_vector->metrics.get(cvss::Metric::MAV) == 'N');
    CHECK(e->environmental_vector->metrics.get(cvss::Metric::AV) == 'L');

    std::ostringstream out;
    s.export_evaluations(out);
    Store t(fixture::ticking_clock());
    std::istringstream a2(to_json(fixture::advisory_asset()).dump()), n2(to_json(fixture::advisory_notification()).dump()),
        e2(out.str());
    t.import_jsonl(&a2, &n2, &e2);
    CHECK(t.get_evaluation("E9")->environmental_vector == e->environmental_vector);
}
