#pragma once

// Generation backends, adaptive batching and draft assembly.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vulneval/error.hpp"
#include "vulneval/postprocess.hpp"
#include "vulneval/promptgen.hpp"
#include "vulneval/store.hpp"

namespace vulneval::inference {

using promptgen::InstructionKind;

struct GenParams {
    std::size_t beam_size = 1;
    double temperature = 0.0;
    double top_p = 1.0;
    std::size_t max_new_tokens = 150;
    std::string stop_sequence = "<STOP>";

    void validate() const;  // throws Error("InvalidParams")
    friend bool operator==(const GenParams&, const GenParams&) = default;
};

nlohmann::json to_json(const GenParams& p);
GenParams params_from_json(const nlohmann::json& j, GenParams defaults = {});

// Category 60, InternalComment 200, CustomerComment 150, Vector 200.
std::size_t default_max_new_tokens(InstructionKind kind) noexcept;

inline constexpr std::size_t kDefaultThreshold = 920;
inline constexpr std::size_t kHeadroom = 150;

struct Bucket {
    std::optional<std::size_t> context_length;  // nullopt: the model's default
    std::vector<std::size_t> indices;            // ascending

    friend bool operator==(const Bucket&, const Bucket&) = default;
};

struct BatchPlan {
    std::vector<Bucket> buckets;  // default bucket first; empty buckets omitted
    std::size_t threshold = kDefaultThreshold;

    friend bool operator==(const BatchPlan&, const BatchPlan&) = default;
};

// Counts below `threshold` go to the default bucket, the rest to one extended
// bucket whose context length is headroom + its longest member.
BatchPlan plan_batches(const std::vector<std::size_t>& prompt_tokens, std::size_t threshold = kDefaultThreshold,
                       std::size_t headroom = kHeadroom);

// Cuts at the first stop sequence and trims trailing whitespace.
std::string truncate_at_stop(std::string_view completion, std::string_view stop);

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;

    // One completion per prompt, order preserved, truncated at the stop
    // sequence. Throws BackendUnavailable.
    std::vector<std::string> generate(const std::vector<std::string>& prompts, const GenParams& params,
                                      std::optional<std::size_t> context_length);

protected:
    virtual std::vector<std::string> generate_raw(const std::vector<std::string>& prompts, const GenParams& params,
                                                  std::optional<std::size_t> context_length) = 0;
};

// Deterministic test backend. Responses are keyed by (instruction kind,
// FNV-1a hash of the prompt's input section). Unknown keys fall back to the
// fixture of the same kind sharing the most component names with the
// prompt, ties going to the lowest hash. Output always ends in the stop
// sequence.
class MockBackend final : public Backend {
public:
    explicit MockBackend(promptgen::PromptConfig config = {});

    // Registers `response` for a rendered prompt.
    void add(std::string_view prompt, std::string response);
    // [{"prompt": ..., "response": ...}] or [{"kind", "input", "response"}].
    void load(const nlohmann::json& fixtures);
    static MockBackend from_file(const std::filesystem::path& file, promptgen::PromptConfig config = {});

    std::size_t size() const noexcept { return fixtures_.size(); }
    std::string name() const override { return "mock"; }

    static std::uint64_t hash(std::string_view text) noexcept;  // FNV-1a 64

protected:
    std::vector<std::string> generate_raw(const std::vector<std::string>& prompts, const GenParams& params,
                                          std::optional<std::size_t> context_length) override;

private:
    struct Fixture {
        InstructionKind kind;
        std::uint64_t key;
        std::vector<std::string> components;  // normalized component names
        std::string response;
    };
    void add_input(InstructionKind kind, std::string_view input, std::string response);
    std::string lookup(std::string_view prompt) const;

    promptgen::PromptConfig config_;
    std::map<std::pair<int, std::uint64_t>, std::size_t> by_key_;
    std::vector<Fixture> fixtures_;
};

// Component names listed on the prompt's "Components present in software:"
// line, normalized.
std::vector<std::string> prompt_component_names(std::string_view prompt);

struct HttpBackendConfig {
    std::string url;                    // POST {url}/generate
    std::optional<std::string> token;   // sent as "Authorization: Bearer <token>"
    std::size_t attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    double backoff_multiplier = 2.0;
    std::chrono::milliseconds timeout{300000};

    // VULNEVAL_BACKEND_URL and VULNEVAL_BACKEND_TOKEN.
    static HttpBackendConfig from_env();
};

// Request {"prompts": [...], "params": {...}, "context_length": n|null};
// response {"completions": [...]}. Transport failures, 429 and 5xx are
// retried with exponential backoff.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    std::string name() const override { return "http"; }
    const HttpBackendConfig& config() const noexcept { return config_; }

protected:
    std::vector<std::string> generate_raw(const std::vector<std::string>& prompts, const GenParams& params,
                                          std::optional<std::size_t> context_length) override;

private:
    HttpBackendConfig config_;
};

struct DraftOptions {
    GenParams params;                 // max_new_tokens replaced per kind unless per_kind_limits is false
    bool per_kind_limits = true;
    promptgen::PromptConfig prompt;
    const promptgen::Tokenizer* tokenizer = nullptr;  // ApproxTokenizer when null
    std::size_t threshold = kDefaultThreshold;
    std::size_t headroom = kHeadroom;
    std::size_t concurrency = 2;      // backend calls in flight
    std::size_t max_batch_size = 16;  // prompts per backend call
    const catalog::JustificationVocabulary* vocabulary = nullptr;
    bool persist = true;              // write drafts to the store
    bool skip_existing = true;        // leave pairs that already have an evaluation alone
};

struct AssetFailure {
    std::string asset_id;
    std::string notification_id;
    std::string error;
    bool backend = false;  // the backend call failed, not the pair itself
};

struct DraftRun {
    std::vector<catalog::Evaluation> drafts;
    std::vector<postprocess::CorrectionReport> reports;  // parallel to drafts
    std::vector<AssetFailure> failures;
    std::size_t skipped_existing = 0;
    std::size_t backend_calls = 0;
};

class PartialFailure : public Error {
public:
    explicit PartialFailure(DraftRun run);
    const DraftRun& run() const noexcept { return run_; }

private:
    DraftRun run_;
};

// Drafts for explicit (asset, notification) pairs. Never throws for per-pair
// problems; they land in `failures`.
DraftRun draft_pairs(Backend& backend, catalog::Store& store,
                     const std::vector<std::pair<std::string, std::string>>& pairs, const DraftOptions& options = {});

// Drafts for every applicable asset of one notification. Throws NotFound for
// an unknown notification, BackendUnavailable when every pair failed on the
// backend, PartialFailure when some pairs failed.
std::vector<catalog::Evaluation> generate_evaluation_drafts(Backend& backend, catalog::Store& store,
                                                            const std::string& notification_id,
                                                            const DraftOptions& options = {});

}  // namespace vulneval::inference
