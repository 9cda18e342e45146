#include "vulneval/postprocess.hpp"

#include <algorithm>
#include <cctype>

#include "vulneval/error.hpp"

namespace vulneval::postprocess {

using catalog::VexCategory;
using catalog::VexJustification;

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string squash(std::string_view s) {
    std::string out;
    for (unsigned char c : s)
        if (std::isalnum(c)) out += static_cast<char>(std::tolower(c));
    return out;
}

bool carries_environmental(const std::optional<cvss::CvssVector>& v) {
    return v && v->valid() && v->metrics.has_group(cvss::Group::Environmental);
}

void note(std::vector<std::string>& list, std::string_view item) {
    if (std::find(list.begin(), list.end(), item) == list.end()) list.emplace_back(item);
}

}  // namespace

ParsedCategory parse_category(std::string_view text) {
    ParsedCategory out;
    const auto low = lower(text);
    const auto at = low.rfind("category:");
    if (at == std::string::npos) {
        out.justification_text = std::string(trim(text));
        return out;
    }
    out.justification_text = std::string(trim(text.substr(0, at)));
    auto rest = trim(text.substr(at + 9));
    // "Not Affected." and "NotAffected" both accepted; trailing text ignored
    // only after a sentence end.
    const auto stop = rest.find_first_of(".\n");
    const auto word = squash(rest.substr(0, stop));
    if (word == "affected") out.category = VexCategory::Affected;
    else if (word == "notaffected") out.category = VexCategory::NotAffected;
    return out;
}

DraftFields parse_draft(const RawDraft& draft) {
    DraftFields f;
    auto parsed = parse_category(draft.category_text);
    f.category = parsed.category;
    f.justification_text = std::move(parsed.justification_text);
    f.internal_comment = std::string(trim(draft.internal_text));
    f.customer_comment = std::string(trim(draft.customer_text));
    return f;
}

DraftFields fields_of(const catalog::Evaluation& e) {
    DraftFields f;
    f.category = e.vex_category;
    f.justification_text = std::string(catalog::to_string(e.vex_justification));
    f.internal_comment = e.internal_comment;
    f.customer_comment = e.customer_comment;
    f.environmental_vector = e.environmental_vector;
    return f;
}

void Corrected::apply_to(catalog::Evaluation& e) const {
    e.vex_category = vex_category;
    e.vex_justification = vex_justification;
    e.internal_comment = internal_comment;
    e.customer_comment = customer_comment;
    e.environmental_vector = environmental_vector;
    e.flags.insert(flags.begin(), flags.end());
}

Corrected apply_rules(const RawDraft& draft, const DraftFields& fields, const RuleContext& ctx) {
    static const catalog::JustificationVocabulary kDefaultVocabulary;
    const auto& vocab = ctx.vocabulary ? *ctx.vocabulary : kDefaultVocabulary;

    Corrected out;
    out.internal_comment = fields.internal_comment;
    out.customer_comment = fields.customer_comment;
    out.environmental_vector = fields.environmental_vector;
    auto& report = out.report;

    bool undetermined = !fields.category;
    if (undetermined) {
        out.flags.emplace(kFlagCategoryUndetermined);
        note(report.fields_changed, "vex_category");
    }
    out.vex_category = fields.category.value_or(VexCategory::NotAffected);

    if (out.vex_category == VexCategory::NotAffected) {
        // R1
        if (out.environmental_vector) {
            out.environmental_vector.reset();
            note(report.rules_fired, "R1");
            note(report.fields_changed, "environmental_vector");
        }
        // R2
        const auto matched = undetermined ? std::nullopt : vocab.match(fields.justification_text);
        if (matched && *matched != VexJustification::None) {
            out.vex_justification = *matched;
        } else {
            out.vex_justification = VexJustification::Other;
            if (!undetermined) {
                note(report.rules_fired, "R2");
                out.flags.emplace(kFlagJustificationUnrecognized);
            }
            note(report.fields_changed, "vex_justification");
        }
        // R3
        if (out.vex_justification == VexJustification::Other && out.customer_comment.empty()) {
            note(report.rules_fired, "R3");
            out.flags.emplace(kFlagCustomerCommentMissing);
            if (!out.internal_comment.empty()) {
                out.customer_comment = out.internal_comment;
                note(report.fields_changed, "customer_comment");
            }
        }
        return out;
    }

    // R4
    bool fired = false;
    out.vex_justification = VexJustification::None;
    if (vocab.match(fields.justification_text) != VexJustification::None) {
        fired = true;
        note(report.fields_changed, "vex_justification");
    }
    if (!carries_environmental(out.environmental_vector)) {
        fired = true;
        out.environmental_vector.reset();
        try {
            auto parsed = catalog::parse_environmental(draft.vector_text, ctx.base_vector);
            if (carries_environmental(parsed)) out.environmental_vector = std::move(parsed);
        } catch (const Error&) {
            // left cleared; flagged below
        }
        if (!out.environmental_vector) out.flags.emplace(kFlagVectorInvalid);
        note(report.fields_changed, "environmental_vector");
    }
    if (fired) note(report.rules_fired, "R4");
    return out;
}

}  // namespace vulneval::postprocess
