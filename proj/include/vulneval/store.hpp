#pragma once

// Durable record store for assets, notifications and evaluations.
//
// Persistence is a directory holding `snapshot.jsonl` and an append-only
// `journal.jsonl`; every write appends one line before it becomes visible.
// Reopening replays snapshot then journal. `compact()` folds the journal into
// a fresh snapshot.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "vulneval/catalog.hpp"

namespace vulneval::catalog {

using Clock = std::function<Timestamp()>;
Timestamp system_now();

struct EvaluationFilter {
    std::optional<Provenance> status;
    std::optional<VexCategory> category;
    std::optional<std::string> organization;
    std::optional<std::string> product;  // asset product_label
    std::optional<std::string> asset_id;
    std::optional<std::string> notification_id;
};

struct ImportCounts {
    std::size_t assets = 0;
    std::size_t notifications = 0;
    std::size_t evaluations = 0;
};

class Store {
public:
    // In-memory store.
    explicit Store(Clock clock = system_now);
    // Durable store rooted at `dir` (created if missing).
    explicit Store(const std::filesystem::path& dir, Clock clock = system_now);

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    // Upserts stamp created_at (kept from the prior revision, or from the
    // record when non-zero), updated_at = now, and revision = prior + 1. When
    // `expected_revision` is given it must equal the stored revision (0 for
    // a new record), else VersionConflict.
    Asset upsert_asset(Asset a, std::optional<std::uint64_t> expected_revision = std::nullopt);
    Notification upsert_notification(Notification n, std::optional<std::uint64_t> expected_revision = std::nullopt);
    // Throws UnknownReference when asset_id/notification_id do not resolve and
    // InvariantViolation when check_invariants fails.
    Evaluation upsert_evaluation(Evaluation e, std::optional<std::uint64_t> expected_revision = std::nullopt);

    std::optional<Asset> get_asset(const std::string& id) const;
    std::optional<Notification> get_notification(const std::string& id) const;
    std::optional<Evaluation> get_evaluation(const std::string& id) const;
    std::optional<Evaluation> find_evaluation(const std::string& asset_id, const std::string& notification_id) const;

    std::vector<Asset> list_assets(const std::optional<std::string>& organization = std::nullopt) const;
    std::vector<Notification> list_notifications() const;
    std::vector<Evaluation> list_evaluations(const EvaluationFilter& filter = {}) const;
    std::vector<std::string> notifications_for_cve(const std::string& cve_id) const;

    // Assets whose match_components against `n` is non-empty, ascending by id.
    // Candidates come from the component index.
    std::vector<std::string> applicable_assets(const Notification& n) const;

    // JSONL import/export, one record per line.
    ImportCounts import_jsonl(std::istream* assets, std::istream* notifications, std::istream* evaluations);
    void export_assets(std::ostream& out) const;
    void export_notifications(std::ostream& out) const;
    void export_evaluations(std::ostream& out) const;

    std::string next_evaluation_id();
    Timestamp now() const { return clock_(); }

    void compact();
    const std::optional<std::filesystem::path>& directory() const noexcept { return dir_; }

private:
    void replay(const std::filesystem::path& file);
    void apply(const std::string& kind, const nlohmann::json& record);
    void journal(const std::string& kind, const nlohmann::json& record);

    void index_asset(const Asset& a, bool add);
    void index_notification(const Notification& n, bool add);
    void index_evaluation(const Evaluation& e, bool add);

    bool matches(const Evaluation& e, const EvaluationFilter& f) const;

    Clock clock_;
    std::optional<std::filesystem::path> dir_;
    std::ofstream journal_;

    mutable std::shared_mutex mutex_;
    std::map<std::string, Asset> assets_;
    std::map<std::string, Notification> notifications_;
    std::map<std::string, Evaluation> evaluations_;

    std::map<std::string, std::set<std::string>> assets_by_component_;
    std::map<std::string, std::set<std::string>> notifications_by_cve_;
    std::map<Provenance, std::set<std::string>> evaluations_by_status_;
    std::map<std::pair<std::string, std::string>, std::string> evaluation_by_pair_;
    std::uint64_t evaluation_seq_ = 0;
};

}  // namespace vulneval::catalog
