#include "vulneval/cskg.hpp"

#include <algorithm>
#include <cstdlib>

namespace vulneval::cskg {

namespace {

unsigned long long numeric_part(const std::string& id) {
    const auto dash = id.rfind('-');
    const char* p = id.c_str() + (dash == std::string::npos ? 0 : dash + 1);
    return std::strtoull(p, nullptr, 10);
}

void append_unique(std::vector<std::string>& out, std::set<std::string>& seen, const std::vector<std::string>& in) {
    for (const auto& s : in)
        if (seen.insert(s).second) out.push_back(s);
}

}  // namespace

bool CapecIdLess::operator()(const std::string& a, const std::string& b) const {
    const auto na = numeric_part(a), nb = numeric_part(b);
    if (na != nb) return na < nb;
    return a < b;
}

void Cskg::add_cve(const ingest::CveRecord& cve) {
    auto& cwes = cve_to_cwe_[cve.id];
    cwes.insert(cve.cwe_ids.begin(), cve.cwe_ids.end());
}

void Cskg::add_cwe(const ingest::CweEntry& cwe) {
    cwe_nodes_.insert(cwe.id);
    auto& capecs = cwe_to_capec_[cwe.id];
    capecs.insert(cwe.related_capec_ids.begin(), cwe.related_capec_ids.end());
}

void Cskg::add_capec(const ingest::CapecEntry& capec) { capec_index_.emplace(capec.id, capec); }

void Cskg::refresh_diagnostics() {
    dangling_.clear();
    for (const auto& [cve, cwes] : cve_to_cwe_)
        for (const auto& cwe : cwes)
            if (!cwe_nodes_.contains(cwe)) dangling_.push_back({cve, cwe});
    for (const auto& [cwe, capecs] : cwe_to_capec_)
        for (const auto& capec : capecs)
            if (!capec_index_.contains(capec)) dangling_.push_back({cwe, capec});
}

Cskg build_graph(const std::vector<ingest::CveRecord>& cves, const std::vector<ingest::CweEntry>& cwes,
                 const std::vector<ingest::CapecEntry>& capecs) {
    Cskg g;
    for (const auto& c : cves) g.add_cve(c);
    for (const auto& c : cwes) g.add_cwe(c);
    for (const auto& c : capecs) g.add_capec(c);
    g.refresh_diagnostics();
    return g;
}

std::vector<ingest::CapecEntry> capecs_for_cve(const Cskg& graph, const std::string& cve_id) {
    std::vector<ingest::CapecEntry> out;
    const auto cve = graph.cve_to_cwe().find(cve_id);
    if (cve == graph.cve_to_cwe().end()) return out;

    Cskg::CapecSet ids;
    for (const auto& cwe : cve->second) {
        const auto edges = graph.cwe_to_capec().find(cwe);
        if (edges == graph.cwe_to_capec().end()) continue;
        ids.insert(edges->second.begin(), edges->second.end());
    }
    for (const auto& id : ids) {
        const auto entry = graph.capec_index().find(id);
        if (entry != graph.capec_index().end()) out.push_back(entry->second);
    }
    return out;
}

Enrichment enrich_notification(const Cskg& graph, const std::vector<std::string>& cve_ids) {
    std::map<std::string, ingest::CapecEntry, CapecIdLess> capecs;
    for (const auto& cve : cve_ids)
        for (auto& c : capecs_for_cve(graph, cve)) capecs.emplace(c.id, std::move(c));

    Enrichment e;
    std::set<std::string> seen_prereq, seen_mitigation;
    for (const auto& [id, capec] : capecs) {
        e.contributing_capec_ids.push_back(id);
        append_unique(e.prerequisites, seen_prereq, capec.prerequisites);
        append_unique(e.mitigations, seen_mitigation, capec.mitigations);
        e.typical_severity = std::max(e.typical_severity, capec.typical_severity);
    }
    return e;
}

nlohmann::json export_json(const Cskg& graph) {
    nlohmann::json cve_to_cwe = nlohmann::json::object();
    for (const auto& [cve, cwes] : graph.cve_to_cwe()) cve_to_cwe[cve] = cwes;
    nlohmann::json cwe_to_capec = nlohmann::json::object();
    for (const auto& [cwe, capecs] : graph.cwe_to_capec())
        cwe_to_capec[cwe] = std::vector<std::string>(capecs.begin(), capecs.end());
    nlohmann::json capecs = nlohmann::json::array();
    for (const auto& [id, c] : graph.capec_index()) capecs.push_back(id);
    nlohmann::json dangling = nlohmann::json::array();
    for (const auto& d : graph.diagnostics()) dangling.push_back({{"from", d.from}, {"to", d.to}});
    return {{"cve_to_cwe", cve_to_cwe}, {"cwe_to_capec", cwe_to_capec}, {"capec_nodes", capecs},
            {"dangling", dangling}};
}

nlohmann::json to_json(const Enrichment& e) {
    return {{"prerequisites", e.prerequisites},
            {"typical_severity", std::string(ingest::to_token(e.typical_severity))},
            {"mitigations", e.mitigations},
            {"contributing_capec_ids", e.contributing_capec_ids}};
}

Enrichment enrichment_from_json(const nlohmann::json& j) {
    Enrichment e;
    e.prerequisites = j.value("prerequisites", std::vector<std::string>{});
    e.typical_severity = ingest::severity_from_string(j.value("typical_severity", std::string{}));
    e.mitigations = j.value("mitigations", std::vector<std::string>{});
    e.contributing_capec_ids = j.value("contributing_capec_ids", std::vector<std::string>{});
    return e;
}

}  // namespace vulneval::cskg
