#include "vulneval/catalog.hpp"

#include <algorithm>
#include <cctype>

#include "vulneval/error.hpp"

namespace vulneval::catalog {

namespace {

using nlohmann::json;

std::string squash(std::string_view s) {
    std::string out;
    for (char c : s)
        if (std::isalnum(static_cast<unsigned char>(c)))
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

constexpr VexJustification kAllJustifications[] = {
    VexJustification::ComponentNotPresent,
    VexJustification::VulnerableCodeNotPresent,
    VexJustification::VulnerableCodeNotInExecutePath,
    VexJustification::VulnerableCodeCannotBeControlledByAdversary,
    VexJustification::InlineMitigationsAlreadyExist,
    VexJustification::Other,
    VexJustification::None,
};

std::string required_string(const json& j, const char* key, const char* record) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string() || it->get<std::string>().empty())
        throw InvalidRecord(std::string(record) + ": missing required field '" + key + "'");
    return it->get<std::string>();
}

std::string optional_string(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_string()) throw InvalidRecord(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

Timestamp optional_time(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return 0;
    if (!it->is_number_integer()) throw InvalidRecord(std::string("field '") + key + "' must be an integer");
    return it->get<Timestamp>();
}

std::uint64_t optional_revision(const json& j) {
    const auto it = j.find("revision");
    if (it == j.end() || it->is_null()) return 0;
    if (!it->is_number_unsigned() && !it->is_number_integer())
        throw InvalidRecord("field 'revision' must be an integer");
    return it->get<std::uint64_t>();
}

std::vector<ComponentRef> components_from(const json& j, const char* key) {
    std::vector<ComponentRef> out;
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return out;
    if (!it->is_array()) throw InvalidRecord(std::string("field '") + key + "' must be a list");
    for (const auto& c : *it) out.push_back(component_from_json(c));
    return out;
}

json components_to(const std::vector<ComponentRef>& cs) {
    json out = json::array();
    for (const auto& c : cs) out.push_back(to_json(c));
    return out;
}

}  // namespace

std::string ComponentRef::render() const { return name + " - " + vendor + " - " + version; }

// Enums ---------------------------------------------------------------------

std::string_view to_string(VexCategory c) noexcept { return c == VexCategory::Affected ? "Affected" : "NotAffected"; }

std::string_view to_string(VexJustification j) noexcept {
    switch (j) {
        case VexJustification::ComponentNotPresent: return "ComponentNotPresent";
        case VexJustification::VulnerableCodeNotPresent: return "VulnerableCodeNotPresent";
        case VexJustification::VulnerableCodeNotInExecutePath: return "VulnerableCodeNotInExecutePath";
        case VexJustification::VulnerableCodeCannotBeControlledByAdversary:
            return "VulnerableCodeCannotBeControlledByAdversary";
        case VexJustification::InlineMitigationsAlreadyExist: return "InlineMitigationsAlreadyExist";
        case VexJustification::Other: return "Other";
        default: return "None";
    }
}

std::string_view justification_label(VexJustification j) noexcept {
    switch (j) {
        case VexJustification::ComponentNotPresent: return "Component not present";
        case VexJustification::VulnerableCodeNotPresent: return "Vulnerable code not present";
        case VexJustification::VulnerableCodeNotInExecutePath: return "Vulnerable code not in execute path";
        case VexJustification::VulnerableCodeCannotBeControlledByAdversary:
            return "Vulnerable code cannot be controlled by adversary";
        case VexJustification::InlineMitigationsAlreadyExist: return "Inline mitigations already exist";
        case VexJustification::Other: return "Other";
        default: return "None";
    }
}

std::string_view to_string(Provenance p) noexcept {
    switch (p) {
        case Provenance::AiDraft: return "AiDraft";
        case Provenance::ExpertCorrected: return "ExpertCorrected";
        default: return "ExpertAccepted";
    }
}

std::optional<VexCategory> category_from_string(std::string_view s) noexcept {
    const auto k = squash(s);
    if (k == "affected") return VexCategory::Affected;
    if (k == "notaffected") return VexCategory::NotAffected;
    return std::nullopt;
}

std::optional<VexJustification> justification_from_token(std::string_view s) noexcept {
    for (auto j : kAllJustifications)
        if (to_string(j) == s) return j;
    return std::nullopt;
}

std::optional<Provenance> provenance_from_string(std::string_view s) noexcept {
    for (auto p : {Provenance::AiDraft, Provenance::ExpertCorrected, Provenance::ExpertAccepted})
        if (to_string(p) == s) return p;
    return std::nullopt;
}

JustificationVocabulary::JustificationVocabulary() {
    for (auto j : kAllJustifications) {
        add_alias(j, to_string(j));
        add_alias(j, justification_label(j));
    }
    add_alias(VexJustification::ComponentNotPresent, "component_not_present");
    add_alias(VexJustification::VulnerableCodeNotPresent, "vulnerable_code_not_present");
    add_alias(VexJustification::VulnerableCodeNotInExecutePath, "vulnerable_code_not_in_execute_path");
    add_alias(VexJustification::VulnerableCodeCannotBeControlledByAdversary,
              "vulnerable_code_cannot_be_controlled_by_adversary");
    add_alias(VexJustification::InlineMitigationsAlreadyExist, "inline_mitigations_already_exist");
}

std::optional<VexJustification> JustificationVocabulary::match(std::string_view text) const {
    const auto key = squash(text);
    if (key.empty()) return std::nullopt;
    for (const auto& [alias, j] : aliases_)
        if (alias == key) return j;
    return std::nullopt;
}

void JustificationVocabulary::add_alias(VexJustification j, std::string_view alias) {
    auto key = squash(alias);
    if (key.empty()) return;
    for (const auto& a : aliases_)
        if (a.first == key) return;
    aliases_.emplace_back(std::move(key), j);
}

void JustificationVocabulary::load_aliases(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidRecord("justification label file must be a JSON object");
    for (const auto& [token, aliases] : j.items()) {
        const auto label = justification_from_token(token);
        if (!label) throw InvalidRecord("unknown justification label '" + token + "'");
        if (!aliases.is_array()) throw InvalidRecord("aliases for '" + token + "' must be a list");
        for (const auto& a : aliases) add_alias(*label, a.get<std::string>());
    }
}

nlohmann::json JustificationVocabulary::to_json() const {
    json out = json::array();
    for (auto j : kAllJustifications)
        out.push_back({{"token", std::string(to_string(j))}, {"label", std::string(justification_label(j))}});
    return out;
}

std::optional<std::string> check_invariants(const Evaluation& e) {
    if (e.vex_category == VexCategory::Affected && e.vex_justification != VexJustification::None)
        return "Affected evaluation must have justification None";
    if (e.vex_category == VexCategory::NotAffected && e.environmental_vector)
        return "NotAffected evaluation must not carry an environmental vector";
    if (e.environmental_vector && !e.environmental_vector->valid())
        return "environmental vector lacks base metrics";
    return std::nullopt;
}

// Matching ------------------------------------------------------------------

std::string normalize(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string component_key(const ComponentRef& c) { return normalize(c.name) + '\x1f' + normalize(c.vendor); }

bool version_matches(std::string_view version, std::string_view pattern) {
    const auto v = normalize(version);
    const auto p = normalize(pattern);
    if (v == p) return true;
    if (p == "x" || p == "*") return true;
    if (p.size() >= 2 && (p.back() == 'x' || p.back() == '*') && p[p.size() - 2] == '.') {
        const auto prefix = std::string_view(p).substr(0, p.size() - 1);
        return v.starts_with(prefix);
    }
    return false;
}

std::vector<ComponentRef> match_components(const Asset& asset, const Notification& notification) {
    std::vector<ComponentRef> out;
    for (const auto& mine : asset.components) {
        const auto key = component_key(mine);
        const bool hit = std::any_of(
            notification.affected_components.begin(), notification.affected_components.end(),
            [&](const ComponentRef& theirs) {
                return component_key(theirs) == key && version_matches(mine.version, theirs.version);
            });
        if (hit) out.push_back(mine);
    }
    return out;
}

cvss::CvssVector parse_environmental(std::string_view text, const std::optional<cvss::CvssVector>& base) {
    const auto begin = text.find_first_not_of(" \t\r\n");
    if (begin != std::string_view::npos && text.substr(begin).starts_with("CVSS:")) return cvss::parse_vector(text);
    const auto fragment = cvss::describe_to_vector(text);
    if (!base) throw MalformedVector(std::string(text), "no base vector to attach environmental metrics to");
    cvss::CvssVector out = *base;
    for (const auto& mi : cvss::all_metrics())
        if (mi.group == cvss::Group::Environmental) out.metrics.erase(mi.metric);
    out.metrics.overlay(fragment.only(cvss::Group::Environmental));
    return out;
}

// JSON ----------------------------------------------------------------------

json to_json(const ComponentRef& c) { return {{"name", c.name}, {"vendor", c.vendor}, {"version", c.version}}; }

ComponentRef component_from_json(const json& j) {
    if (j.is_string()) {
        // "name - vendor - version"
        const auto s = j.get<std::string>();
        const auto a = s.find(" - ");
        const auto b = a == std::string::npos ? a : s.find(" - ", a + 3);
        if (b == std::string::npos) throw InvalidRecord("component string must be 'name - vendor - version': " + s);
        return {s.substr(0, a), s.substr(a + 3, b - a - 3), s.substr(b + 3)};
    }
    if (!j.is_object()) throw InvalidRecord("component must be an object or a rendered string");
    ComponentRef c{required_string(j, "name", "component"), required_string(j, "vendor", "component"),
                   optional_string(j, "version")};
    return c;
}

json to_json(const Asset& a) {
    return {{"id", a.id},
            {"organization", a.organization},
            {"software_name", a.software_name},
            {"software_version", a.software_version},
            {"product_label", a.product_label},
            {"product_description", a.product_description},
            {"components", components_to(a.components)},
            {"created_at", a.created_at},
            {"updated_at", a.updated_at},
            {"revision", a.revision}};
}

Asset asset_from_json(const json& j) {
    if (!j.is_object()) throw InvalidRecord("asset must be a JSON object");
    Asset a;
    a.id = required_string(j, "id", "asset");
    a.organization = optional_string(j, "organization");
    a.software_name = required_string(j, "software_name", "asset");
    a.software_version = optional_string(j, "software_version");
    a.product_label = optional_string(j, "product_label");
    a.product_description = optional_string(j, "product_description");
    a.components = components_from(j, "components");
    a.created_at = optional_time(j, "created_at");
    a.updated_at = optional_time(j, "updated_at");
    a.revision = optional_revision(j);
    return a;
}

json to_json(const Notification& n) {
    json j = {{"id", n.id},
              {"title", n.title},
              {"description", n.description},
              {"cve_ids", n.cve_ids},
              {"affected_components", components_to(n.affected_components)},
              {"cvss_version", n.cvss_version},
              {"created_at", n.created_at},
              {"updated_at", n.updated_at},
              {"revision", n.revision}};
    if (n.base_temporal_vector) j["base_temporal_vector"] = cvss::serialize_vector(*n.base_temporal_vector);
    else if (n.legacy_vector) j["base_temporal_vector"] = *n.legacy_vector;
    else j["base_temporal_vector"] = nullptr;
    j["enrichment"] = n.enrichment ? cskg::to_json(*n.enrichment) : json(nullptr);
    return j;
}

Notification notification_from_json(const json& j) {
    if (!j.is_object()) throw InvalidRecord("notification must be a JSON object");
    Notification n;
    n.id = required_string(j, "id", "notification");
    n.title = optional_string(j, "title");
    n.description = required_string(j, "description", "notification");
    if (const auto it = j.find("cve_ids"); it != j.end() && it->is_array())
        for (const auto& c : *it) n.cve_ids.push_back(c.get<std::string>());
    if (n.cve_ids.empty()) throw InvalidRecord("notification " + n.id + ": cve_ids must be non-empty");
    n.affected_components = components_from(j, "affected_components");
    n.cvss_version = optional_string(j, "cvss_version");
    if (const auto vec = optional_string(j, "base_temporal_vector"); !vec.empty()) {
        if (vec.starts_with("CVSS:3.")) {
            n.base_temporal_vector = cvss::parse_vector(vec);
            if (n.cvss_version.empty()) n.cvss_version = std::string(cvss::to_string(n.base_temporal_vector->version));
        } else {
            n.legacy_vector = vec;
            if (n.cvss_version.empty()) n.cvss_version = "2.0";
        }
    }
    if (const auto it = j.find("enrichment"); it != j.end() && it->is_object())
        n.enrichment = cskg::enrichment_from_json(*it);
    n.created_at = optional_time(j, "created_at");
    n.updated_at = optional_time(j, "updated_at");
    n.revision = optional_revision(j);
    return n;
}

json to_json(const HistoryEntry& h) {
    return {{"at", h.at}, {"reviewer", h.reviewer}, {"action", h.action}, {"snapshot", h.snapshot}};
}

json to_json(const Evaluation& e) {
    json history = json::array();
    for (const auto& h : e.history) history.push_back(to_json(h));
    return {{"id", e.id},
            {"asset_id", e.asset_id},
            {"notification_id", e.notification_id},
            {"vex_category", std::string(to_string(e.vex_category))},
            {"vex_justification", std::string(to_string(e.vex_justification))},
            {"internal_comment", e.internal_comment},
            {"customer_comment", e.customer_comment},
            {"environmental_vector",
             e.environmental_vector ? json(cvss::serialize_vector(*e.environmental_vector)) : json(nullptr)},
            {"provenance", std::string(to_string(e.provenance))},
            {"flags", e.flags},
            {"history", history},
            {"reviewer", e.reviewer},
            {"review_duration_seconds", e.review_duration_seconds ? json(*e.review_duration_seconds) : json(nullptr)},
            {"created_at", e.created_at},
            {"updated_at", e.updated_at},
            {"reviewed_at", e.reviewed_at},
            {"revision", e.revision}};
}

Evaluation evaluation_from_json(const json& j) {
    if (!j.is_object()) throw InvalidRecord("evaluation must be a JSON object");
    Evaluation e;
    e.id = required_string(j, "id", "evaluation");
    e.asset_id = required_string(j, "asset_id", "evaluation");
    e.notification_id = required_string(j, "notification_id", "evaluation");

    const auto cat = category_from_string(required_string(j, "vex_category", "evaluation"));
    if (!cat) throw InvalidRecord("evaluation " + e.id + ": bad vex_category");
    e.vex_category = *cat;
    if (const auto just = optional_string(j, "vex_justification"); !just.empty()) {
        const auto parsed = justification_from_token(just);
        if (!parsed) {
            static const JustificationVocabulary vocab;
            const auto fuzzy = vocab.match(just);
            if (!fuzzy) throw InvalidRecord("evaluation " + e.id + ": bad vex_justification '" + just + "'");
            e.vex_justification = *fuzzy;
        } else {
            e.vex_justification = *parsed;
        }
    } else {
        e.vex_justification = e.vex_category == VexCategory::Affected ? VexJustification::None : VexJustification::Other;
    }
    e.internal_comment = optional_string(j, "internal_comment");
    e.customer_comment = optional_string(j, "customer_comment");
    if (const auto vec = optional_string(j, "environmental_vector"); !vec.empty())
        e.environmental_vector = cvss::parse_vector(vec);
    if (const auto p = optional_string(j, "provenance"); !p.empty()) {
        const auto prov = provenance_from_string(p);
        if (!prov) throw InvalidRecord("evaluation " + e.id + ": bad provenance '" + p + "'");
        e.provenance = *prov;
    }
    if (const auto it = j.find("flags"); it != j.end() && it->is_array())
        for (const auto& f : *it) e.flags.insert(f.get<std::string>());
    if (const auto it = j.find("history"); it != j.end() && it->is_array()) {
        for (const auto& h : *it) {
            HistoryEntry entry;
            entry.at = optional_time(h, "at");
            entry.reviewer = optional_string(h, "reviewer");
            entry.action = optional_string(h, "action");
            entry.snapshot = h.value("snapshot", json(nullptr));
            e.history.push_back(std::move(entry));
        }
    }
    e.reviewer = optional_string(j, "reviewer");
    if (const auto it = j.find("review_duration_seconds"); it != j.end() && it->is_number_integer())
        e.review_duration_seconds = it->get<std::int64_t>();
    e.created_at = optional_time(j, "created_at");
    e.updated_at = optional_time(j, "updated_at");
    e.reviewed_at = optional_time(j, "reviewed_at");
    e.revision = optional_revision(j);
    return e;
}

}  // namespace vulneval::catalog
