#pragma once

// Instruction-tuning corpus construction in the Alpaca layout: DAPT
// documents, SFT entries and zero-shot inference prompts.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vulneval/catalog.hpp"
#include "vulneval/ingest.hpp"
#include "vulneval/tokenizer.hpp"

namespace vulneval::promptgen {

enum class InstructionKind { Category, InternalComment, CustomerComment, Vector };

inline constexpr std::array<InstructionKind, 4> kAllKinds = {
    InstructionKind::Category, InstructionKind::InternalComment, InstructionKind::CustomerComment,
    InstructionKind::Vector};

std::string_view to_string(InstructionKind k) noexcept;
std::optional<InstructionKind> kind_from_string(std::string_view s) noexcept;

struct PromptConfig {
    std::string preamble =
        "Below is an instruction that describes a task, paired with an input that provides further context. "
        "Write a response that appropriately completes the request.";
    std::array<std::string, 4> instructions = {
        "What is the category?",
        "Generate internal comments.",
        "Generate customer comment.",
        "Generate environmental vectors.",
    };
    std::string stop_marker = "<STOP>";
    std::string response_marker = "### Response:";

    const std::string& instruction(InstructionKind k) const { return instructions[static_cast<std::size_t>(k)]; }
    // Identifies the kind from a rendered prompt's "### Instruction:" line.
    std::optional<InstructionKind> kind_of_prompt(std::string_view prompt) const;
};

struct PromptContext {
    std::string organization;
    std::string software;      // name and version
    std::string product;       // label and description
    std::string notification_text;
    std::vector<std::string> prerequisites;
    ingest::Severity typical_severity = ingest::Severity::Unknown;
    std::vector<std::string> mitigations;
    std::vector<catalog::ComponentRef> common_components;
    std::string base_temporal_description;
    std::string cvss_version;

    friend bool operator==(const PromptContext&, const PromptContext&) = default;
};

// Assembles the context for an (asset, notification) pair from the stored
// records: text cleaned, components from match_components, descriptions from
// the notification's base/temporal vector, enrichment as stored.
PromptContext build_context(const catalog::Asset& asset, const catalog::Notification& notification);

// Renders up to and including the response marker. Throws IncompleteContext
// naming every empty required field by its prompt label.
std::string render_prompt(const PromptContext& ctx, InstructionKind kind, const PromptConfig& config = {});

// Text between "### Input:" and the response marker; the mock backend keys on it.
std::string_view input_section(std::string_view prompt) noexcept;

struct SftEntry {
    InstructionKind kind = InstructionKind::Category;
    std::string evaluation_id;
    std::string prompt;
    std::string response;  // gold text followed by "\n" and the stop marker
    std::size_t token_count = 0;
    bool complete = true;

    std::string text() const { return prompt + " " + response; }
    friend bool operator==(const SftEntry&, const SftEntry&) = default;
};

struct SftBuild {
    std::vector<SftEntry> entries;     // complete entries only
    std::vector<SftEntry> incomplete;  // gold field missing; response empty
    std::size_t not_applicable = 0;    // Vector entry of a NotAffected evaluation
};

// "<justification label>. Category: <category>"
std::string category_response(catalog::VexCategory category, catalog::VexJustification justification);

// One entry per instruction kind.
SftBuild build_sft_entries(const catalog::Evaluation& evaluation, const PromptContext& ctx,
                           const Tokenizer& tokenizer, const PromptConfig& config = {});

struct FilterResult {
    std::vector<SftEntry> kept;
    std::vector<SftEntry> dropped;
};

inline constexpr std::size_t kDefaultMaxTokens = 1024;

// kept = complete entries with token_count <= max_tokens; everything else dropped.
FilterResult filter_corpus(std::vector<SftEntry> entries, std::size_t max_tokens = kDefaultMaxTokens);

// Title, description, vector description, affected and unaffected versions,
// mitigations; absent sections omitted.
std::string build_dapt_document(const ingest::CveRecord& cve);

nlohmann::json to_json(const SftEntry& e);  // {"kind","prompt","response","tokens"}
SftEntry sft_entry_from_json(const nlohmann::json& j);

// Parses "0.9/0.05/0.05"; ratios must be non-negative and sum to 1 (+-1e-6).
std::vector<double> parse_split(std::string_view spec);

// Deterministic seeded partition of `n` items into groups with the given
// ratios. Returns, per split, the item indices in ascending order.
std::vector<std::vector<std::size_t>> split_indices(std::size_t n, const std::vector<double>& ratios,
                                                    std::uint64_t seed);

}  // namespace vulneval::promptgen
