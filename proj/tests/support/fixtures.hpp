#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>
#include <string>
#include <vector>

#include <json.hpp>

#include "vulneval/catalog.hpp"
#include "vulneval/cskg.hpp"
#include "vulneval/cvss.hpp"
#include "vulneval/ingest.hpp"
#include "vulneval/store.hpp"

namespace fixture {

using namespace vulneval;

inline const char* kAdvisoryVector = "CVSS:3.1/AV:L/AC:H/PR:L/UI:R/S:U/C:H/I:H/A:H/E:U/RL:O/RC:C";
inline const char* kAdvisoryPrerequisite = "The attacker must be able to write to redirect search paths on the victim host.";
inline const char* kAdvisoryResponse =
    "The vulnerability deployed in the system is controlled. Exploitation of this vulnerability requires privileged "
    "local access and high Attack Complexity. Exploitability score (0.8) is below threshold. Device access is "
    "protected by username and password. The application is executed in Kiosk mode. PII is encrypted in the "
    "database. The database cannot be accessed remotely. Firewall rules are configured. The system is protected by "
    "whitelisting.";

inline std::vector<std::string> advisory_mitigations() {
    return {"Implementation: Host integrity monitoring.",
            "Design: Ensure that the program's compound parts, including all system dependencies, classpath, path, "
            "and so on, are secured to the same or higher level assurance as the program.",
            "Design: Enforce principle of least privilege."};
}

inline std::string data_path(const std::string& name) { return std::string(VULNEVAL_TEST_DATA) + "/" + name; }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline std::vector<catalog::ComponentRef> advisory_components() {
    return {{"Intel Chipset Device Software", "Intel", "10.1.1.44"},
            {"Intel Graphics Drivers", "Intel", "21.20.x"},
            {"Intel Management Engine Components Installer Driver", "Intel", "11.7.0.1043"},
            {"Intel Network Connections", "Intel", "25.0"},
            {"Intel Trusted Connect Service Client", "Intel", "1.47.715.0"},
            {"Rapid Storage Technology (RST)", "Intel", "15.7.x"}};
}

inline catalog::Asset advisory_asset() {
    catalog::Asset a;
    a.id = "A-SYNGO";
    a.organization = "DI-DnA";
    a.software_name = "Syngo Carbon Monitoring";
    a.product_label = "Syngo Carbon Monitoring";
    a.product_description = "VB12A";
    a.components = advisory_components();
    return a;
}

inline catalog::Notification advisory_notification() {
    catalog::Notification n;
    n.id = "N-43456";
    n.title = "Intel RST advisory";
    n.description =
        "Uncontrolled search path in some Intel RST software may allow an authenticated user to potentially enable "
        "escalation of privilege via local access.";
    n.cve_ids = {"CVE-2022-43456"};
    n.affected_components = advisory_components();
    n.base_temporal_vector = cvss::parse_vector(kAdvisoryVector);
    n.cvss_version = "3.1";
    return n;
}

// CVE-2022-43456 -> CWE-427 -> CAPEC-471.
inline ingest::CveRecord advisory_cve() {
    ingest::CveRecord c;
    c.id = "CVE-2022-43456";
    c.title = "Intel RST uncontrolled search path";
    c.description = advisory_notification().description;
    c.cvss_vector = kAdvisoryVector;
    c.cvss_version = "3.1";
    c.cwe_ids = {"CWE-427"};
    return c;
}

inline ingest::CweEntry cwe427() {
    return {"CWE-427", "Uncontrolled Search Path Element", "The product uses a fixed or controlled search path.",
            {"CAPEC-471"}};
}

inline ingest::CapecEntry capec471() {
    ingest::CapecEntry e;
    e.id = "CAPEC-471";
    e.name = "Search Order Hijacking";
    e.prerequisites = {kAdvisoryPrerequisite};
    e.typical_severity = ingest::Severity::VeryHigh;
    e.mitigations = advisory_mitigations();
    return e;
}

inline cskg::Cskg advisory_graph() { return cskg::build_graph({advisory_cve()}, {cwe427()}, {capec471()}); }

inline catalog::Notification advisory_notification_enriched() {
    auto n = advisory_notification();
    n.enrichment = cskg::enrich_notification(advisory_graph(), n.cve_ids);
    return n;
}

// Monotone fake clock for stores, starting at `start` ms and stepping 1 ms.
inline catalog::Clock ticking_clock(catalog::Timestamp start = 1'700'000'000'000) {
    auto t = std::make_shared<std::atomic<catalog::Timestamp>>(start);
    return [t] { return t->fetch_add(1); };
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> seq{0};
        path = std::filesystem::temp_directory_path() /
               ("vulneval-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(seq++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

// Synthetic organisation: `n_assets` assets and `n_notifications`
// notifications over a shared pool of components. Every notification affects
// two pool components, so each applies to several assets.
struct Synthetic {
    std::vector<catalog::Asset> assets;
    std::vector<catalog::Notification> notifications;
    std::vector<catalog::ComponentRef> pool;
};

inline Synthetic synthetic_org(std::size_t n_assets, std::size_t n_notifications, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Synthetic s;
    for (int i = 0; i < 12; ++i)
        s.pool.push_back({"Component " + std::string(1, static_cast<char>('A' + i)), "Vendor" + std::to_string(i % 3),
                          std::to_string(1 + i % 4) + "." + std::to_string(i) + ".x"});
    const char* orgs[] = {"DI-DnA", "DI-AT", "HC-LAB"};
    for (std::size_t i = 0; i < n_assets; ++i) {
        catalog::Asset a;
        a.id = "A" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        a.organization = orgs[i % 3];
        a.software_name = "Software " + std::to_string(i);
        a.software_version = std::to_string(1 + i % 5) + ".0";
        a.product_label = "Product " + std::to_string(i % 7);
        a.product_description = "model " + std::to_string(i);
        // Two components each; versions concrete so wildcard patterns match.
        for (int k = 0; k < 2; ++k) {
            auto c = s.pool[(i * 5 + static_cast<std::size_t>(k) * 7) % s.pool.size()];
            c.version = c.version.substr(0, c.version.size() - 1) + std::to_string(rng() % 9);
            a.components.push_back(c);
        }
        s.assets.push_back(a);
    }
    for (std::size_t i = 0; i < n_notifications; ++i) {
        catalog::Notification n;
        n.id = "N" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        n.title = "Advisory " + std::to_string(i);
        n.description = "Improper input validation in " + s.pool[i % s.pool.size()].name +
                        " may allow an unauthenticated user to cause denial of service via network access.";
        n.cve_ids = {"CVE-2023-" + std::to_string(10000 + i)};
        n.affected_components = {s.pool[i % s.pool.size()], s.pool[(i + 5) % s.pool.size()]};
        n.base_temporal_vector = cvss::parse_vector(i % 2 ? "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:H/E:P/RL:O/RC:C"
                                                          : "CVSS:3.1/AV:L/AC:H/PR:L/UI:R/S:U/C:H/I:H/A:H");
        n.cvss_version = "3.1";
        n.enrichment = cskg::Enrichment{{"The attacker must reach the service."},
                                        ingest::Severity::High,
                                        {"Design: Validate all input."},
                                        {"CAPEC-153"}};
        s.notifications.push_back(n);
    }
    return s;
}

// Mock fixtures keyed by kind and a bare components line, so that every
// prompt reaches them through the component-overlap fallback. Affected-heavy:
// every category fixture answers Affected.
inline nlohmann::json affected_mock_fixtures(const std::vector<catalog::ComponentRef>& pool) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : pool) {
        const std::string input = "\n\nComponents present in software: " + c.render() + "\n\n";
        out.push_back({{"kind", "Category"}, {"input", input}, {"response", "None. Category: Affected"}});
        out.push_back({{"kind", "InternalComment"},
                       {"input", input},
                       {"response", "The component " + c.name + " is deployed and reachable from the network."}});
        out.push_back({{"kind", "CustomerComment"},
                       {"input", input},
                       {"response", "Apply the vendor update for " + c.name + "."}});
        out.push_back({{"kind", "Vector"},
                       {"input", input},
                       {"response", "Modified Attack Vector is Local. Confidentiality Requirement is High."}});
    }
    return out;
}

}  // namespace fixture
