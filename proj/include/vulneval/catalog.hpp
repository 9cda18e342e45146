#pragma once

// Organizational datasets (assets, notifications, evaluations), their JSONL
// record schemas, and the component matching that decides which assets a
// notification applies to.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vulneval/cskg.hpp"
#include "vulneval/cvss.hpp"

namespace vulneval::catalog {

using Timestamp = std::int64_t;  // milliseconds since the Unix epoch

struct ComponentRef {
    std::string name;
    std::string vendor;
    std::string version;  // exact, or a wildcard pattern such as "15.7.x"

    std::string render() const;  // "name - vendor - version"
    friend bool operator==(const ComponentRef&, const ComponentRef&) = default;
};

struct Asset {
    std::string id;
    std::string organization;
    std::string software_name;
    std::string software_version;
    std::string product_label;
    std::string product_description;
    std::vector<ComponentRef> components;
    Timestamp created_at = 0;
    Timestamp updated_at = 0;
    std::uint64_t revision = 0;

    friend bool operator==(const Asset&, const Asset&) = default;
};

struct Notification {
    std::string id;
    std::string title;
    std::string description;
    std::vector<std::string> cve_ids;
    std::vector<ComponentRef> affected_components;
    std::optional<cvss::CvssVector> base_temporal_vector;
    std::optional<std::string> legacy_vector;  // CVSS v2 strings: stored, never scored
    std::string cvss_version;
    std::optional<cskg::Enrichment> enrichment;
    Timestamp created_at = 0;
    Timestamp updated_at = 0;
    std::uint64_t revision = 0;

    friend bool operator==(const Notification&, const Notification&) = default;
};

enum class VexCategory { Affected, NotAffected };

enum class VexJustification {
    ComponentNotPresent,
    VulnerableCodeNotPresent,
    VulnerableCodeNotInExecutePath,
    VulnerableCodeCannotBeControlledByAdversary,
    InlineMitigationsAlreadyExist,
    Other,
    None,
};

enum class Provenance { AiDraft, ExpertCorrected, ExpertAccepted };

std::string_view to_string(VexCategory c) noexcept;
std::string_view to_string(VexJustification j) noexcept;  // enum token
std::string_view to_string(Provenance p) noexcept;
std::optional<VexCategory> category_from_string(std::string_view s) noexcept;  // case-insensitive
std::optional<VexJustification> justification_from_token(std::string_view s) noexcept;
std::optional<Provenance> provenance_from_string(std::string_view s) noexcept;

// Human-readable label for the category prompt response, e.g.
// "Component not present".
std::string_view justification_label(VexJustification j) noexcept;

// Accepted spellings per justification. Matching ignores case, whitespace and
// punctuation. Defaults cover the enum tokens, the human-readable labels and
// the CSAF/OpenVEX snake_case labels; a label file can add aliases.
class JustificationVocabulary {
public:
    JustificationVocabulary();  // defaults

    std::optional<VexJustification> match(std::string_view text) const;
    void add_alias(VexJustification j, std::string_view alias);
    // {"ComponentNotPresent": ["not shipped", ...], ...}
    void load_aliases(const nlohmann::json& j);
    nlohmann::json to_json() const;

private:
    std::vector<std::pair<std::string, VexJustification>> aliases_;  // normalized key -> label
};

struct HistoryEntry {
    Timestamp at = 0;
    std::string reviewer;
    std::string action;          // "Accept" | "Correct"
    nlohmann::json snapshot;     // the evaluation as it was before the review

    friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

struct Evaluation {
    std::string id;
    std::string asset_id;
    std::string notification_id;
    VexCategory vex_category = VexCategory::NotAffected;
    VexJustification vex_justification = VexJustification::Other;
    std::string internal_comment;
    std::string customer_comment;
    std::optional<cvss::CvssVector> environmental_vector;
    Provenance provenance = Provenance::AiDraft;
    std::set<std::string> flags;  // review-priority markers set by correction rules
    std::vector<HistoryEntry> history;
    std::string reviewer;
    std::optional<std::int64_t> review_duration_seconds;
    Timestamp created_at = 0;
    Timestamp updated_at = 0;
    Timestamp reviewed_at = 0;
    std::uint64_t revision = 0;

    friend bool operator==(const Evaluation&, const Evaluation&) = default;
};

// Affected => justification None; NotAffected => no vector. Returns the first
// broken rule, if any.
std::optional<std::string> check_invariants(const Evaluation& e);

// Matching ------------------------------------------------------------------

// Case-fold, trim and collapse inner whitespace.
std::string normalize(std::string_view s);
std::string component_key(const ComponentRef& c);  // normalized "name\x1fvendor"

// Exact match after normalization, or wildcard-suffix prefix match: a
// pattern "15.7.x" (or "15.7.*") accepts any version starting with "15.7.";
// a bare "x" or "*" accepts any version.
bool version_matches(std::string_view version, std::string_view pattern);

// Asset components that the notification affects, in asset inventory order.
std::vector<ComponentRef> match_components(const Asset& asset, const Notification& notification);

// JSON ----------------------------------------------------------------------

nlohmann::json to_json(const ComponentRef& c);
nlohmann::json to_json(const Asset& a);
nlohmann::json to_json(const Notification& n);
nlohmann::json to_json(const Evaluation& e);
nlohmann::json to_json(const HistoryEntry& h);

// Throw InvalidRecord on missing required fields or bad enum values.
ComponentRef component_from_json(const nlohmann::json& j);
Asset asset_from_json(const nlohmann::json& j);
Notification notification_from_json(const nlohmann::json& j);
Evaluation evaluation_from_json(const nlohmann::json& j);

// Accepts a full vector string or a "<Name> is <Value>." description overlaid
// on the base vector. Throws MalformedVector / UnparsableDescription.
cvss::CvssVector parse_environmental(std::string_view text, const std::optional<cvss::CvssVector>& base);

}  // namespace vulneval::catalog
