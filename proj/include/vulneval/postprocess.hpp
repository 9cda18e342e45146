#pragma once

// Turns raw completions into evaluation fields and applies the four
// deterministic correction rules.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vulneval/catalog.hpp"

namespace vulneval::postprocess {

// Stop marker already stripped.
struct RawDraft {
    std::string category_text;
    std::string internal_text;
    std::string customer_text;
    std::string vector_text;

    friend bool operator==(const RawDraft&, const RawDraft&) = default;
};

struct ParsedCategory {
    std::optional<catalog::VexCategory> category;  // nullopt: undetermined
    std::string justification_text;
};

// Splits on the last "Category:"; the text before it is the justification
// candidate, the word after it the category.
ParsedCategory parse_category(std::string_view text);

// Partially structured evaluation, before rules.
struct DraftFields {
    std::optional<catalog::VexCategory> category;
    std::string justification_text;
    std::string internal_comment;
    std::string customer_comment;
    std::optional<cvss::CvssVector> environmental_vector;

    friend bool operator==(const DraftFields&, const DraftFields&) = default;
};

// category/justification from parse_category, comments verbatim (trimmed),
// no vector (R4 parses vector_text).
DraftFields parse_draft(const RawDraft& draft);

// Fields of a stored evaluation, for re-applying the rules after review.
DraftFields fields_of(const catalog::Evaluation& e);

// Review-priority markers.
inline constexpr std::string_view kFlagCategoryUndetermined = "category_undetermined";
inline constexpr std::string_view kFlagJustificationUnrecognized = "justification_unrecognized";
inline constexpr std::string_view kFlagCustomerCommentMissing = "customer_comment_missing";
inline constexpr std::string_view kFlagVectorInvalid = "vector_invalid";

struct CorrectionReport {
    std::vector<std::string> rules_fired;     // subset of R1..R4, in rule order
    std::vector<std::string> fields_changed;  // evaluation field names

    friend bool operator==(const CorrectionReport&, const CorrectionReport&) = default;
};

struct RuleContext {
    const catalog::JustificationVocabulary* vocabulary = nullptr;  // defaults when null
    std::optional<cvss::CvssVector> base_vector;                    // notification base/temporal
};

struct Corrected {
    catalog::VexCategory vex_category = catalog::VexCategory::NotAffected;
    catalog::VexJustification vex_justification = catalog::VexJustification::Other;
    std::string internal_comment;
    std::string customer_comment;
    std::optional<cvss::CvssVector> environmental_vector;
    std::set<std::string> flags;
    CorrectionReport report;

    // Writes the corrected fields into `e`; flags are merged.
    void apply_to(catalog::Evaluation& e) const;
};

// R1 NotAffected clears the vector. R2 unrecognized justification becomes
// Other. R3 Other with an empty customer comment copies the internal one and
// flags. R4 Affected sets justification None and requires a parseable vector
// (the given one, else vector_text); otherwise the vector is cleared and
// flagged. Never changes the category once determined. Total and idempotent.
Corrected apply_rules(const RawDraft& draft, const DraftFields& fields, const RuleContext& ctx = {});

}  // namespace vulneval::postprocess
