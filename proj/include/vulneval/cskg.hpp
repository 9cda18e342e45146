#pragma once

// Local reconstruction of the CVE -> CWE -> CAPEC slice of a cybersecurity
// knowledge graph, and the notification enrichment computed from it.

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vulneval/ingest.hpp"

namespace vulneval::cskg {

struct DanglingReference {
    std::string from;  // CVE or CWE id holding the reference
    std::string to;    // referenced CWE or CAPEC id that has no node

    friend bool operator==(const DanglingReference&, const DanglingReference&) = default;
};

struct Enrichment {
    std::vector<std::string> prerequisites;
    ingest::Severity typical_severity = ingest::Severity::Unknown;
    std::vector<std::string> mitigations;
    std::vector<std::string> contributing_capec_ids;

    bool empty() const noexcept { return contributing_capec_ids.empty(); }
    friend bool operator==(const Enrichment&, const Enrichment&) = default;
};

// CAPEC ids compare by their numeric part so that CAPEC-9 sorts before CAPEC-10.
struct CapecIdLess {
    bool operator()(const std::string& a, const std::string& b) const;
};

class Cskg {
public:
    using CapecSet = std::set<std::string, CapecIdLess>;

    const std::map<std::string, std::set<std::string>>& cve_to_cwe() const noexcept { return cve_to_cwe_; }
    const std::map<std::string, CapecSet>& cwe_to_capec() const noexcept { return cwe_to_capec_; }
    const std::map<std::string, ingest::CapecEntry, CapecIdLess>& capec_index() const noexcept {
        return capec_index_;
    }
    const std::vector<DanglingReference>& diagnostics() const noexcept { return dangling_; }

    bool empty() const noexcept { return cve_to_cwe_.empty() && cwe_to_capec_.empty() && capec_index_.empty(); }

    // Append-only growth: adds nodes and edges, never removes.
    void add_cve(const ingest::CveRecord& cve);
    void add_cwe(const ingest::CweEntry& cwe);
    void add_capec(const ingest::CapecEntry& capec);
    // Recomputes dangling references against the current node sets.
    void refresh_diagnostics();

private:
    std::map<std::string, std::set<std::string>> cve_to_cwe_;
    std::map<std::string, CapecSet> cwe_to_capec_;
    std::set<std::string> cwe_nodes_;
    std::map<std::string, ingest::CapecEntry, CapecIdLess> capec_index_;
    std::vector<DanglingReference> dangling_;
};

Cskg build_graph(const std::vector<ingest::CveRecord>& cves, const std::vector<ingest::CweEntry>& cwes,
                 const std::vector<ingest::CapecEntry>& capecs);

// Union over the CVE's CWEs of their CAPECs that exist in the index, ascending
// numeric CAPEC id. Unknown CVE -> empty.
std::vector<ingest::CapecEntry> capecs_for_cve(const Cskg& graph, const std::string& cve_id);

// Aggregates every constituent CVE: CAPECs visited in ascending id order,
// prerequisite/mitigation lists concatenated then deduplicated (first seen
// wins), severity = maximum known severity.
Enrichment enrich_notification(const Cskg& graph, const std::vector<std::string>& cve_ids);

nlohmann::json export_json(const Cskg& graph);

nlohmann::json to_json(const Enrichment& e);
Enrichment enrichment_from_json(const nlohmann::json& j);

}  // namespace vulneval::cskg
