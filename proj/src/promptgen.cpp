#include "vulneval/promptgen.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "vulneval/error.hpp"

namespace vulneval::promptgen {

namespace {

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += sep;
        out += s;
    }
    return out;
}

std::string numbered(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ' ';
        out += "(" + std::to_string(i + 1) + ") " + items[i];
    }
    return out;
}

std::string or_none(std::string s) { return s.empty() ? "None." : s; }

}  // namespace

std::string_view to_string(InstructionKind k) noexcept {
    switch (k) {
        case InstructionKind::Category: return "Category";
        case InstructionKind::InternalComment: return "InternalComment";
        case InstructionKind::CustomerComment: return "CustomerComment";
        default: return "Vector";
    }
}

std::optional<InstructionKind> kind_from_string(std::string_view s) noexcept {
    for (auto k : kAllKinds)
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::optional<InstructionKind> PromptConfig::kind_of_prompt(std::string_view prompt) const {
    constexpr std::string_view marker = "### Instruction: ";
    const auto at = prompt.find(marker);
    if (at == std::string_view::npos) return std::nullopt;
    auto line = prompt.substr(at + marker.size());
    line = line.substr(0, line.find('\n'));
    for (auto k : kAllKinds)
        if (instruction(k) == line) return k;
    return std::nullopt;
}

PromptContext build_context(const catalog::Asset& asset, const catalog::Notification& notification) {
    PromptContext ctx;
    ctx.organization = ingest::clean_text(asset.organization);
    ctx.software = ingest::clean_text(asset.software_name + " " + asset.software_version);
    ctx.product = ingest::clean_text(asset.product_label + " " + asset.product_description);
    ctx.notification_text = ingest::clean_text(notification.description);
    if (notification.enrichment) {
        for (const auto& p : notification.enrichment->prerequisites)
            if (auto c = ingest::clean_text(p); !c.empty()) ctx.prerequisites.push_back(std::move(c));
        for (const auto& m : notification.enrichment->mitigations)
            if (auto c = ingest::clean_text(m); !c.empty()) ctx.mitigations.push_back(std::move(c));
        ctx.typical_severity = notification.enrichment->typical_severity;
    }
    ctx.common_components = catalog::match_components(asset, notification);
    if (notification.base_temporal_vector) {
        const auto& v = *notification.base_temporal_vector;
        cvss::Parts parts{true, v.metrics.has_group(cvss::Group::Temporal), false};
        ctx.base_temporal_description = cvss::describe_vector(v, parts);
    }
    ctx.cvss_version = notification.cvss_version;
    return ctx;
}

std::string render_prompt(const PromptContext& ctx, InstructionKind kind, const PromptConfig& config) {
    std::vector<std::string> missing;
    const auto require = [&](const std::string& value, const char* label) {
        if (value.empty()) missing.emplace_back(label);
    };
    require(ctx.organization, "Organization");
    require(ctx.software, "Software");
    require(ctx.product, "Product");
    require(ctx.notification_text, "Notification");
    if (ctx.common_components.empty()) missing.emplace_back("Components present in software");
    require(ctx.base_temporal_description, "Base and Temporal Vectors");
    require(ctx.cvss_version, "CVSS Version");
    if (!missing.empty()) throw IncompleteContext(std::move(missing));

    std::vector<std::string> components;
    for (const auto& c : ctx.common_components) components.push_back(c.render());

    std::string out;
    const auto field = [&](std::string_view label, const std::string& value) {
        out += label;
        out += ": ";
        out += value;
        out += "\n\n";
    };
    out += config.preamble;
    out += "\n\n### Instruction: ";
    out += config.instruction(kind);
    out += "\n\n### Input:\n\n";
    field("Organization", ctx.organization);
    field("Software", ctx.software);
    field("Product", ctx.product);
    field("Notification", ctx.notification_text);
    field("Prerequisites", or_none(join(ctx.prerequisites, " ")));
    field("Typical severity", std::string(ingest::to_string(ctx.typical_severity)) + ".");
    if (kind == InstructionKind::InternalComment) field("Mitigations", or_none(numbered(ctx.mitigations)));
    field("Components present in software", join(components, ", "));
    field("Base and Temporal Vectors", ctx.base_temporal_description);
    field("CVSS Version", ctx.cvss_version);
    out += config.response_marker;
    return out;
}

std::string_view input_section(std::string_view prompt) noexcept {
    constexpr std::string_view marker = "### Input:";
    const auto begin = prompt.find(marker);
    if (begin == std::string_view::npos) return {};
    auto rest = prompt.substr(begin + marker.size());
    const auto end = rest.rfind("### Response:");
    return end == std::string_view::npos ? rest : rest.substr(0, end);
}

std::string category_response(catalog::VexCategory category, catalog::VexJustification justification) {
    return std::string(catalog::justification_label(justification)) + ". Category: " +
           std::string(catalog::to_string(category));
}

SftBuild build_sft_entries(const catalog::Evaluation& evaluation, const PromptContext& ctx,
                           const Tokenizer& tokenizer, const PromptConfig& config) {
    SftBuild out;
    for (const auto kind : kAllKinds) {
        std::optional<std::string> gold;
        switch (kind) {
            case InstructionKind::Category:
                gold = category_response(evaluation.vex_category, evaluation.vex_justification);
                break;
            case InstructionKind::InternalComment:
                if (!evaluation.internal_comment.empty()) gold = evaluation.internal_comment;
                break;
            case InstructionKind::CustomerComment:
                if (!evaluation.customer_comment.empty()) gold = evaluation.customer_comment;
                break;
            case InstructionKind::Vector:
                if (evaluation.vex_category == catalog::VexCategory::NotAffected) {
                    ++out.not_applicable;
                    continue;
                }
                if (evaluation.environmental_vector &&
                    evaluation.environmental_vector->metrics.has_group(cvss::Group::Environmental))
                    gold = cvss::describe_vector(*evaluation.environmental_vector, cvss::Parts::env());
                break;
        }

        SftEntry entry;
        entry.kind = kind;
        entry.evaluation_id = evaluation.id;
        entry.prompt = render_prompt(ctx, kind, config);
        if (gold) {
            entry.response = *gold + "\n" + config.stop_marker;
            entry.token_count = tokenizer.count(entry.text());
            out.entries.push_back(std::move(entry));
        } else {
            entry.complete = false;
            entry.token_count = tokenizer.count(entry.prompt);
            out.incomplete.push_back(std::move(entry));
        }
    }
    return out;
}

FilterResult filter_corpus(std::vector<SftEntry> entries, std::size_t max_tokens) {
    FilterResult out;
    for (auto& e : entries) {
        if (e.complete && e.token_count <= max_tokens) out.kept.push_back(std::move(e));
        else out.dropped.push_back(std::move(e));
    }
    return out;
}

std::string build_dapt_document(const ingest::CveRecord& cve) {
    std::vector<std::string> sections;
    if (!cve.title.empty()) sections.push_back("Title: " + cve.title);
    if (!cve.description.empty()) sections.push_back("Description: " + cve.description);
    if (cve.cvss_vector && cve.cvss_version && cve.cvss_version->starts_with("3.")) {
        try {
            const auto v = cvss::parse_vector(*cve.cvss_vector);
            sections.push_back("CVSS Vector: " + cvss::describe(v.metrics));
        } catch (const MalformedVector&) {
            // Unparsable vectors carry no description.
        }
    }
    if (!cve.affected_versions.empty()) sections.push_back("Affected versions: " + join(cve.affected_versions, ", "));
    if (!cve.unaffected_versions.empty())
        sections.push_back("Unaffected versions: " + join(cve.unaffected_versions, ", "));
    if (cve.mitigations && !cve.mitigations->empty()) sections.push_back("Mitigations: " + *cve.mitigations);
    return join(sections, "\n");
}

nlohmann::json to_json(const SftEntry& e) {
    return {{"kind", std::string(to_string(e.kind))},
            {"prompt", e.prompt},
            {"response", e.response},
            {"tokens", e.token_count}};
}

SftEntry sft_entry_from_json(const nlohmann::json& j) {
    SftEntry e;
    const auto kind = kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw InvalidRecord("unknown SFT entry kind " + j.at("kind").dump());
    e.kind = *kind;
    e.prompt = j.at("prompt").get<std::string>();
    e.response = j.at("response").get<std::string>();
    e.token_count = j.at("tokens").get<std::size_t>();
    e.complete = !e.response.empty();
    return e;
}

std::vector<double> parse_split(std::string_view spec) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        auto end = spec.find('/', pos);
        if (end == std::string_view::npos) end = spec.size();
        const std::string part(spec.substr(pos, end - pos));
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(part, &used);
        } catch (const std::exception&) {
            throw Error("InvalidSplit", "bad split component '" + part + "'");
        }
        if (used != part.size() || v < 0 || !std::isfinite(v))
            throw Error("InvalidSplit", "bad split component '" + part + "'");
        out.push_back(v);
        pos = end + 1;
    }
    const double sum = std::accumulate(out.begin(), out.end(), 0.0);
    if (out.empty() || std::fabs(sum - 1.0) > 1e-6)
        throw Error("InvalidSplit", "split ratios must sum to 1: " + std::string(spec));
    return out;
}

std::vector<std::vector<std::size_t>> split_indices(std::size_t n, const std::vector<double>& ratios,
                                                    std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Fisher-Yates with an explicitly specified engine so that the split is
    // identical across standard library implementations.
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    std::vector<std::vector<std::size_t>> out(ratios.size());
    double cumulative = 0;
    std::size_t begin = 0;
    for (std::size_t s = 0; s < ratios.size(); ++s) {
        cumulative += ratios[s];
        const auto end = s + 1 == ratios.size() ? n
                                                : std::min(n, static_cast<std::size_t>(std::llround(cumulative * n)));
        for (std::size_t i = begin; i < end; ++i) out[s].push_back(order[i]);
        std::sort(out[s].begin(), out[s].end());
        begin = std::max(begin, end);
    }
    return out;
}

}  // namespace vulneval::promptgen
