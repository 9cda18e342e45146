#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "support/fixtures.hpp"
#include "vulneval/error.hpp"
#include "vulneval/promptgen.hpp"
#include "vulneval/tokenizer.hpp"

using namespace vulneval;
using namespace vulneval::promptgen;

namespace {

PromptContext advisory_context() {
    return build_context(fixture::advisory_asset(), fixture::advisory_notification_enriched());
}

catalog::Evaluation gold_evaluation() {
    catalog::Evaluation e;
    e.id = "E1";
    e.asset_id = "A-SYNGO";
    e.notification_id = "N-43456";
    e.vex_category = catalog::VexCategory::Affected;
    e.vex_justification = catalog::VexJustification::None;
    e.internal_comment = fixture::kAdvisoryResponse;
    e.customer_comment = "The product is not exposed to remote attackers.";
    e.environmental_vector = cvss::parse_vector(std::string(fixture::kAdvisoryVector) + "/MAV:P/CR:H");
    return e;
}

std::size_t count_lines_with(const std::string& text, const std::string& prefix) {
    std::size_t n = 0, pos = 0;
    while ((pos = text.find("\n" + prefix, pos)) != std::string::npos) {
        ++n;
        ++pos;
    }
    return n;
}

// Pads the internal comment with single-byte punctuation pieces (one
// approx-token each) until the InternalComment entry has exactly `target`
// tokens.
SftEntry internal_entry_of_size(const PromptContext& ctx, std::size_t target, const Tokenizer& tok) {
    auto e = gold_evaluation();
    e.internal_comment = "Padded.";
    for (;;) {
        const auto b = build_sft_entries(e, ctx, tok);
        const auto it = std::find_if(b.entries.begin(), b.entries.end(),
                                     [](const SftEntry& s) { return s.kind == InstructionKind::InternalComment; });
        REQUIRE(it != b.entries.end());
        if (it->token_count == target) return *it;
        REQUIRE(it->token_count < target);
        e.internal_comment += " .";
    }
}

}  // namespace

TEST_CASE("InternalComment prompt matches the golden file byte for byte") {
    const auto prompt = render_prompt(advisory_context(), InstructionKind::InternalComment);
    const auto golden = fixture::read_file(fixture::data_path("advisory_prompt.golden.txt"));
    CHECK(prompt == golden);
    CHECK(prompt.size() == golden.size());
}

TEST_CASE("mitigations appear only in the InternalComment prompt") {
    const auto ctx = advisory_context();
    const auto internal = render_prompt(ctx, InstructionKind::InternalComment);
    for (auto kind : kAllKinds) {
        const auto p = render_prompt(ctx, kind);
        CHECK(count_lines_with(p, "Mitigations: ") == (kind == InstructionKind::InternalComment ? 1u : 0u));
        CHECK(count_lines_with(p, "Prerequisites: ") == 1);
        CHECK(count_lines_with(p, "Typical severity: ") == 1);
    }
    // CustomerComment differs only by the instruction line and the missing
    // mitigations line.
    auto customer = render_prompt(ctx, InstructionKind::CustomerComment);
    auto expect = internal;
    const auto m = expect.find("Mitigations: ");
    expect.erase(m, expect.find("\n\n", m) + 2 - m);
    const std::string a = "Generate internal comments.", b = "Generate customer comment.";
    expect.replace(expect.find(a), a.size(), b);
    CHECK(customer == expect);
}

TEST_CASE("render_prompt names every missing field") {
    auto ctx = advisory_context();
    ctx.notification_text.clear();
    try {
        render_prompt(ctx, InstructionKind::Category);
        FAIL("expected IncompleteContext");
    } catch (const IncompleteContext& e) {
        CHECK(e.fields() == std::vector<std::string>{"Notification"});
    }
    ctx.organization.clear();
    ctx.common_components.clear();
    try {
        render_prompt(ctx, InstructionKind::Vector);
        FAIL("expected IncompleteContext");
    } catch (const IncompleteContext& e) {
        CHECK(e.fields() == std::vector<std::string>{"Organization", "Notification", "Components present in software"});
    }
}

TEST_CASE("prompt context and input section") {
    const auto ctx = advisory_context();
    CHECK(ctx.software == "Syngo Carbon Monitoring");
    CHECK(ctx.product == "Syngo Carbon Monitoring VB12A");
    CHECK(ctx.common_components.size() == 6);
    CHECK(ctx.base_temporal_description == fixture::read_file(fixture::data_path("advisory_base_temporal.golden.txt")));

    const auto prompt = render_prompt(ctx, InstructionKind::Category);
    const auto input = input_section(prompt);
    CHECK(input.find("Organization: DI-DnA") != std::string_view::npos);
    CHECK(input.find("### Response:") == std::string_view::npos);
    CHECK(PromptConfig{}.kind_of_prompt(prompt) == InstructionKind::Category);
    CHECK_FALSE(PromptConfig{}.kind_of_prompt("no instruction here"));

    // Missing enrichment renders as placeholders rather than failing.
    const auto bare = build_context(fixture::advisory_asset(), fixture::advisory_notification());
    const auto p = render_prompt(bare, InstructionKind::InternalComment);
    CHECK(p.find("Prerequisites: None.") != std::string::npos);
    CHECK(p.find("Typical severity: Unknown.") != std::string::npos);
}

TEST_CASE("SFT entries") {
    const ApproxTokenizer tok;
    const auto ctx = advisory_context();
    const auto b = build_sft_entries(gold_evaluation(), ctx, tok);
    REQUIRE(b.entries.size() == 4);
    CHECK(b.incomplete.empty());
    CHECK(b.entries[0].response == "None. Category: Affected\n<STOP>");
    CHECK(b.entries[1].response == std::string(fixture::kAdvisoryResponse) + "\n<STOP>");
    CHECK(b.entries[3].response ==
          "Confidentiality Requirement is High. Modified Attack Vector is Physical.\n<STOP>");
    for (const auto& e : b.entries) {
        CHECK(e.token_count == tok.count(e.text()));
        CHECK(e.prompt == render_prompt(ctx, e.kind));
        CHECK(sft_entry_from_json(to_json(e)).prompt == e.prompt);
    }

    auto na = gold_evaluation();
    na.vex_category = catalog::VexCategory::NotAffected;
    na.vex_justification = catalog::VexJustification::ComponentNotPresent;
    na.environmental_vector.reset();
    const auto nb = build_sft_entries(na, ctx, tok);
    CHECK(nb.entries.size() == 3);
    CHECK(nb.not_applicable == 1);
    const auto& cat = nb.entries[0].response;
    CHECK(cat.substr(0, cat.find('\n')).ends_with("Category: NotAffected"));
    CHECK(category_response(catalog::VexCategory::NotAffected, catalog::VexJustification::ComponentNotPresent) ==
          "Component not present. Category: NotAffected");

    auto missing = gold_evaluation();
    missing.customer_comment.clear();
    const auto mb = build_sft_entries(missing, ctx, tok);
    CHECK(mb.entries.size() == 3);
    REQUIRE(mb.incomplete.size() == 1);
    CHECK(mb.incomplete[0].kind == InstructionKind::CustomerComment);
    CHECK_FALSE(mb.incomplete[0].complete);
}

TEST_CASE("corpus filter keeps exactly the entry under the token budget") {
    const ApproxTokenizer tok;
    const auto ctx = advisory_context();
    const auto e900 = internal_entry_of_size(ctx, 900, tok);
    const auto e1025 = internal_entry_of_size(ctx, 1025, tok);
    auto incomplete_eval = gold_evaluation();
    incomplete_eval.customer_comment.clear();
    const auto inc = build_sft_entries(incomplete_eval, ctx, tok).incomplete;
    REQUIRE(inc.size() == 1);

    const auto r = filter_corpus({e900, e1025, inc[0]}, 1024);
    REQUIRE(r.kept.size() == 1);
    CHECK(r.kept[0] == e900);
    CHECK(r.dropped.size() == 2);

    // Boundary: 1024 is still inside the budget.
    CHECK(filter_corpus({internal_entry_of_size(ctx, 1024, tok)}).kept.size() == 1);
}

TEST_CASE("DAPT documents") {
    ingest::CveRecord c = fixture::advisory_cve();
    c.affected_versions = {"Intel RST before 15.7.6"};
    c.unaffected_versions = {"Intel RST 15.7.6 and later"};
    c.mitigations = "Update to version 15.7.6.";
    const auto doc = build_dapt_document(c);
    const std::vector<std::string> order = {c.title, c.description, "Attack Vector is Local.", "Intel RST before 15.7.6",
                                            "Intel RST 15.7.6 and later", "Update to version 15.7.6."};
    std::size_t at = 0;
    for (const auto& s : order) {
        const auto p = doc.find(s, at);
        REQUIRE_MESSAGE(p != std::string::npos, s);
        at = p + s.size();
    }
    c.mitigations.reset();
    CHECK(build_dapt_document(c).find("Mitigations") == std::string::npos);
    c.cvss_vector = "AV:N/AC:L/Au:N/C:P/I:P/A:P";
    c.cvss_version = "2.0";
    CHECK(build_dapt_document(c).find("Attack Vector is") == std::string::npos);
}

TEST_CASE("splits") {
    CHECK(parse_split("0.9/0.05/0.05") == std::vector<double>{0.9, 0.05, 0.05});
    CHECK_THROWS_AS(parse_split("0.9/0.2"), Error);
    CHECK_THROWS_AS(parse_split("1.2/-0.2"), Error);
    CHECK_THROWS_AS(parse_split("a/b"), Error);

    const auto s = split_indices(100, {0.9, 0.05, 0.05}, 7);
    REQUIRE(s.size() == 3);
    CHECK(s[0].size() == 90);
    CHECK(s[1].size() == 5);
    CHECK(s[2].size() == 5);
    std::vector<std::size_t> all;
    for (const auto& part : s) {
        CHECK(std::is_sorted(part.begin(), part.end()));
        all.insert(all.end(), part.begin(), part.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(100);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);
    CHECK(split_indices(100, {0.9, 0.05, 0.05}, 7) == s);
    CHECK(split_indices(100, {0.9, 0.05, 0.05}, 8) != s);
}

TEST_CASE("tokenizers are deterministic and subadditive") {
    const ApproxTokenizer approx;
    const VocabTokenizer vocab({"attack", "vector", "is", "loc", "al", "ation", "the", "vuln", "erab", "ility"});
    CHECK(approx.count("") == 0);
    CHECK(approx.count("abcdef") == 1);
    CHECK(approx.count("abcdefg") == 2);
    CHECK(approx.count("a, b.") == 4);
    CHECK(vocab.count("attack") == 1);
    CHECK(vocab.count("location") == 2);
    CHECK(vocab.count("vulnerability") == 3);
    CHECK(vocab.count("zz") == 2);

    std::mt19937_64 rng(5);
    const std::string alphabet = "abcdefghilnorstuv ,.\n\xC3\xA9";
    for (int i = 0; i < 2000; ++i) {
        std::string a, b;
        for (std::size_t k = rng() % 30; k > 0; --k) a += alphabet[rng() % alphabet.size()];
        for (std::size_t k = rng() % 30; k > 0; --k) b += alphabet[rng() % alphabet.size()];
        for (const Tokenizer* t : {static_cast<const Tokenizer*>(&approx), static_cast<const Tokenizer*>(&vocab)}) {
            REQUIRE(t->count(a + b) <= t->count(a) + t->count(b) + 1);
            REQUIRE(t->count(a) == t->count(a));
        }
    }
    CHECK(make_default_tokenizer()->name() == "approx");
}
