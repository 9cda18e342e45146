#pragma once

// Batch orchestration, review workflow, retraining export and the REST API.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vulneval/cskg.hpp"
#include "vulneval/inference.hpp"
#include "vulneval/store.hpp"

namespace vulneval::service {

using catalog::Timestamp;

inline constexpr double kExpertBaselineSeconds = 194.0;

enum class ReviewKind { Accept, Correct };

// Absent members are left as drafted. For the vector, an empty string clears
// it; anything else is a full vector string or an environmental description.
struct CorrectedFields {
    std::optional<catalog::VexCategory> vex_category;
    std::optional<std::string> vex_justification;
    std::optional<std::string> internal_comment;
    std::optional<std::string> customer_comment;
    std::optional<std::string> environmental_vector;

    bool empty() const noexcept {
        return !vex_category && !vex_justification && !internal_comment && !customer_comment && !environmental_vector;
    }
};

struct ReviewAction {
    std::string evaluation_id;
    ReviewKind action = ReviewKind::Accept;
    CorrectedFields corrected_fields;
    std::string reviewer;
    std::optional<std::int64_t> duration_seconds;
};

// Throws InvalidReview on a malformed body.
ReviewAction review_from_json(const std::string& evaluation_id, const nlohmann::json& j);

struct BatchRun {
    std::string run_id;
    Timestamp since = 0;
    Timestamp started_at = 0;
    Timestamp finished_at = 0;
    std::size_t notifications_processed = 0;
    std::size_t assets_processed = 0;
    std::size_t pairs_considered = 0;
    std::size_t drafts_created = 0;
    std::size_t skipped_existing = 0;
    std::size_t backend_calls = 0;
    std::vector<inference::AssetFailure> failures;
};

nlohmann::json to_json(const BatchRun& r);

struct QueueFilter {
    std::optional<std::string> organization;
    std::optional<std::string> product;
    std::optional<std::string> notification_id;
    std::optional<catalog::VexCategory> category;
};

struct ExportResult {
    std::filesystem::path path;
    std::size_t evaluations = 0;
    std::size_t entries = 0;         // written
    std::size_t dropped = 0;         // over the token budget or incomplete
    std::size_t incomplete = 0;      // gold field missing (included in dropped)
    std::size_t not_applicable = 0;  // Vector entries of NotAffected evaluations
    std::size_t context_errors = 0;  // pairs whose prompt context was incomplete
};

nlohmann::json to_json(const ExportResult& r);

struct Stats {
    std::size_t assets = 0;
    std::size_t notifications = 0;
    std::size_t evaluations = 0;
    std::size_t pending = 0;
    std::size_t accepted = 0;
    std::size_t corrected = 0;
    double acceptance_rate = 0;        // accepted / reviewed
    std::size_t timed_reviews = 0;     // reviews with a recorded duration
    double mean_review_seconds = 0;
    double median_review_seconds = 0;
    double baseline_seconds = kExpertBaselineSeconds;
    double time_saved_seconds = 0;     // timed_reviews * (baseline - mean)
};

nlohmann::json to_json(const Stats& s);

struct ServiceConfig {
    inference::DraftOptions drafting;
    std::size_t max_tokens = promptgen::kDefaultMaxTokens;
    std::filesystem::path export_dir = std::filesystem::temp_directory_path();
    catalog::JustificationVocabulary vocabulary;
    std::optional<cskg::Cskg> graph;  // enriches posted notifications lacking enrichment
    std::optional<std::chrono::seconds> batch_interval;  // internal timer; off when unset
};

class Service {
public:
    Service(catalog::Store& store, inference::Backend& backend, ServiceConfig config = {});
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    catalog::Store& store() noexcept { return store_; }
    const ServiceConfig& config() const noexcept { return config_; }

    catalog::Asset add_asset(catalog::Asset a, std::optional<std::uint64_t> expected_revision = std::nullopt);
    catalog::Notification add_notification(catalog::Notification n,
                                           std::optional<std::uint64_t> expected_revision = std::nullopt);

    // Drafts for notifications created since `since` against their
    // applicable assets, and for assets created or updated since `since`
    // against every notification that applies to them. Pairs that already
    // have an evaluation are skipped. `since` defaults to the previous run's
    // start (0 for the first run). Throws Busy while another run is active.
    BatchRun run_batch(std::optional<Timestamp> since = std::nullopt);
    std::vector<BatchRun> runs() const;

    // AiDraft evaluations: Affected first, then flagged, then newest, then id.
    std::vector<catalog::Evaluation> review_queue(const QueueFilter& filter = {}) const;

    // Throws UnknownEvaluation, AlreadyReviewed, InvalidReview and
    // InvariantViolation.
    catalog::Evaluation submit_review(const ReviewAction& action);

    // Reviewed evaluations with reviewed_at >= since, as filtered SFT JSONL.
    ExportResult export_retraining(Timestamp since = 0, std::optional<std::filesystem::path> path = std::nullopt);

    Stats stats() const;

    // Prompt context of an evaluation's pair, for reviewers.
    nlohmann::json evaluation_context(const std::string& evaluation_id) const;

    void start_timer();
    void stop_timer();

private:
    std::shared_ptr<std::mutex> review_lock(const std::string& evaluation_id);

    catalog::Store& store_;
    inference::Backend& backend_;
    ServiceConfig config_;

    std::mutex batch_mutex_;
    mutable std::mutex runs_mutex_;
    std::vector<BatchRun> runs_;

    std::mutex review_locks_mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> review_locks_;

    std::mutex timer_mutex_;
    std::condition_variable timer_cv_;
    bool timer_stop_ = false;
    std::thread timer_;
};

struct ServerOptions {
    std::optional<std::string> bearer_token;  // /healthz is always open
};

class Server {
public:
    Server(Service& service, ServerOptions options = {});
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Blocks until stop().
    bool listen(const std::string& host, int port);
    // Binds an ephemeral port and returns it; then call listen_after_bind.
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace vulneval::service
