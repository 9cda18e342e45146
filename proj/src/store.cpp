#include "vulneval/store.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iomanip>
#include <mutex>
#include <sstream>

#include "vulneval/error.hpp"

namespace vulneval::catalog {

namespace {

using nlohmann::json;

constexpr const char* kSnapshot = "snapshot.jsonl";
constexpr const char* kJournal = "journal.jsonl";

template <typename Record>
std::uint64_t check_revision(const std::map<std::string, Record>& table, const std::string& id,
                             std::optional<std::uint64_t> expected, const char* kind) {
    const auto it = table.find(id);
    const std::uint64_t current = it == table.end() ? 0 : it->second.revision;
    if (expected && *expected != current)
        throw VersionConflict(std::string(kind) + " " + id + ": expected revision " + std::to_string(*expected) +
                              ", stored revision is " + std::to_string(current));
    return current;
}

std::uint64_t evaluation_number(const std::string& id) {
    if (id.size() < 2 || id[0] != 'E') return 0;
    std::uint64_t n = 0;
    for (std::size_t i = 1; i < id.size(); ++i) {
        if (id[i] < '0' || id[i] > '9') return 0;
        n = n * 10 + static_cast<std::uint64_t>(id[i] - '0');
    }
    return n;
}

template <typename Fn>
std::size_t for_each_line(std::istream& in, Fn fn) {
    std::size_t n = 0, lineno = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InvalidRecord("line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            fn(j);
        } catch (const json::exception& e) {
            throw InvalidRecord("line " + std::to_string(lineno) + ": " + e.what());
        }
        ++n;
    }
    return n;
}

}  // namespace

Timestamp system_now() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

Store::Store(Clock clock) : clock_(std::move(clock)) {}

Store::Store(const std::filesystem::path& dir, Clock clock) : clock_(std::move(clock)), dir_(dir) {
    std::filesystem::create_directories(dir);
    replay(dir / kSnapshot);
    replay(dir / kJournal);
    journal_.open(dir / kJournal, std::ios::app | std::ios::binary);
    if (!journal_) throw Error("IoError", "cannot open journal in " + dir.string());
}

void Store::replay(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return;
    for_each_line(in, [&](const json& j) { apply(j.at("kind").get<std::string>(), j.at("record")); });
}

void Store::apply(const std::string& kind, const json& record) {
    if (kind == "asset") {
        auto a = asset_from_json(record);
        if (auto it = assets_.find(a.id); it != assets_.end()) index_asset(it->second, false);
        index_asset(a, true);
        assets_[a.id] = std::move(a);
    } else if (kind == "notification") {
        auto n = notification_from_json(record);
        if (auto it = notifications_.find(n.id); it != notifications_.end()) index_notification(it->second, false);
        index_notification(n, true);
        notifications_[n.id] = std::move(n);
    } else if (kind == "evaluation") {
        auto e = evaluation_from_json(record);
        if (auto it = evaluations_.find(e.id); it != evaluations_.end()) index_evaluation(it->second, false);
        index_evaluation(e, true);
        evaluation_seq_ = std::max(evaluation_seq_, evaluation_number(e.id));
        evaluations_[e.id] = std::move(e);
    } else {
        throw InvalidRecord("unknown journal record kind '" + kind + "'");
    }
}

void Store::journal(const std::string& kind, const json& record) {
    if (!dir_) return;
    journal_ << json{{"kind", kind}, {"record", record}}.dump() << '\n';
    journal_.flush();
    if (!journal_) throw Error("IoError", "journal write failed in " + dir_->string());
}

void Store::index_asset(const Asset& a, bool add) {
    for (const auto& c : a.components) {
        auto& ids = assets_by_component_[component_key(c)];
        if (add) ids.insert(a.id);
        else ids.erase(a.id);
    }
}

void Store::index_notification(const Notification& n, bool add) {
    for (const auto& cve : n.cve_ids) {
        auto& ids = notifications_by_cve_[cve];
        if (add) ids.insert(n.id);
        else ids.erase(n.id);
    }
}

void Store::index_evaluation(const Evaluation& e, bool add) {
    if (add) {
        evaluations_by_status_[e.provenance].insert(e.id);
        evaluation_by_pair_[{e.asset_id, e.notification_id}] = e.id;
    } else {
        evaluations_by_status_[e.provenance].erase(e.id);
        evaluation_by_pair_.erase({e.asset_id, e.notification_id});
    }
}

// Writes --------------------------------------------------------------------

Asset Store::upsert_asset(Asset a, std::optional<std::uint64_t> expected_revision) {
    if (a.id.empty()) throw InvalidRecord("asset id must be non-empty");
    if (a.software_name.empty()) throw InvalidRecord("asset " + a.id + ": software_name must be non-empty");
    for (const auto& c : a.components)
        if (normalize(c.name).empty() || normalize(c.vendor).empty())
            throw InvalidRecord("asset " + a.id + ": component name and vendor must be non-empty");

    std::unique_lock lock(mutex_);
    const auto current = check_revision(assets_, a.id, expected_revision, "asset");
    for (const auto& [id, other] : assets_) {
        if (id != a.id && other.organization == a.organization && other.software_name == a.software_name &&
            other.software_version == a.software_version)
            throw InvalidRecord("asset " + a.id + " duplicates software '" + a.software_name + " " +
                                a.software_version + "' of asset " + id + " in organization " + a.organization);
    }
    const auto now = clock_();
    const auto prior = assets_.find(a.id);
    if (prior != assets_.end()) a.created_at = prior->second.created_at;
    else if (a.created_at == 0) a.created_at = now;
    a.updated_at = now;
    a.revision = current + 1;

    journal("asset", to_json(a));
    if (prior != assets_.end()) index_asset(prior->second, false);
    index_asset(a, true);
    assets_[a.id] = a;
    return a;
}

Notification Store::upsert_notification(Notification n, std::optional<std::uint64_t> expected_revision) {
    if (n.id.empty()) throw InvalidRecord("notification id must be non-empty");
    if (n.cve_ids.empty()) throw InvalidRecord("notification " + n.id + ": cve_ids must be non-empty");
    if (n.description.empty()) throw InvalidRecord("notification " + n.id + ": description must be non-empty");

    std::unique_lock lock(mutex_);
    const auto current = check_revision(notifications_, n.id, expected_revision, "notification");
    const auto now = clock_();
    const auto prior = notifications_.find(n.id);
    if (prior != notifications_.end()) n.created_at = prior->second.created_at;
    else if (n.created_at == 0) n.created_at = now;
    n.updated_at = now;
    n.revision = current + 1;

    journal("notification", to_json(n));
    if (prior != notifications_.end()) index_notification(prior->second, false);
    index_notification(n, true);
    notifications_[n.id] = n;
    return n;
}

Evaluation Store::upsert_evaluation(Evaluation e, std::optional<std::uint64_t> expected_revision) {
    if (e.id.empty()) throw InvalidRecord("evaluation id must be non-empty");
    if (auto broken = check_invariants(e)) throw InvariantViolation("evaluation " + e.id + ": " + *broken);

    std::unique_lock lock(mutex_);
    if (!assets_.contains(e.asset_id)) throw UnknownReference("evaluation " + e.id + ": unknown asset " + e.asset_id);
    if (!notifications_.contains(e.notification_id))
        throw UnknownReference("evaluation " + e.id + ": unknown notification " + e.notification_id);
    const auto current = check_revision(evaluations_, e.id, expected_revision, "evaluation");
    if (const auto pair = evaluation_by_pair_.find({e.asset_id, e.notification_id});
        pair != evaluation_by_pair_.end() && pair->second != e.id)
        throw InvalidRecord("evaluation " + e.id + ": pair (" + e.asset_id + ", " + e.notification_id +
                            ") already evaluated by " + pair->second);

    const auto now = clock_();
    const auto prior = evaluations_.find(e.id);
    if (prior != evaluations_.end()) e.created_at = prior->second.created_at;
    else if (e.created_at == 0) e.created_at = now;
    e.updated_at = now;
    e.revision = current + 1;

    journal("evaluation", to_json(e));
    if (prior != evaluations_.end()) index_evaluation(prior->second, false);
    index_evaluation(e, true);
    evaluation_seq_ = std::max(evaluation_seq_, evaluation_number(e.id));
    evaluations_[e.id] = e;
    return e;
}

std::string Store::next_evaluation_id() {
    std::unique_lock lock(mutex_);
    std::ostringstream id;
    do {
        id.str({});
        id << 'E' << std::setw(8) << std::setfill('0') << ++evaluation_seq_;
    } while (evaluations_.contains(id.str()));
    return id.str();
}

// Reads ---------------------------------------------------------------------

std::optional<Asset> Store::get_asset(const std::string& id) const {
    std::shared_lock lock(mutex_);
    const auto it = assets_.find(id);
    if (it == assets_.end()) return std::nullopt;
    return it->second;
}

std::optional<Notification> Store::get_notification(const std::string& id) const {
    std::shared_lock lock(mutex_);
    const auto it = notifications_.find(id);
    if (it == notifications_.end()) return std::nullopt;
    return it->second;
}

std::optional<Evaluation> Store::get_evaluation(const std::string& id) const {
    std::shared_lock lock(mutex_);
    const auto it = evaluations_.find(id);
    if (it == evaluations_.end()) return std::nullopt;
    return it->second;
}

std::optional<Evaluation> Store::find_evaluation(const std::string& asset_id, const std::string& notification_id) const {
    std::shared_lock lock(mutex_);
    const auto pair = evaluation_by_pair_.find({asset_id, notification_id});
    if (pair == evaluation_by_pair_.end()) return std::nullopt;
    return evaluations_.at(pair->second);
}

std::vector<Asset> Store::list_assets(const std::optional<std::string>& organization) const {
    std::shared_lock lock(mutex_);
    std::vector<Asset> out;
    for (const auto& [id, a] : assets_)
        if (!organization || a.organization == *organization) out.push_back(a);
    return out;
}

std::vector<Notification> Store::list_notifications() const {
    std::shared_lock lock(mutex_);
    std::vector<Notification> out;
    for (const auto& [id, n] : notifications_) out.push_back(n);
    return out;
}

bool Store::matches(const Evaluation& e, const EvaluationFilter& f) const {
    if (f.status && e.provenance != *f.status) return false;
    if (f.category && e.vex_category != *f.category) return false;
    if (f.asset_id && e.asset_id != *f.asset_id) return false;
    if (f.notification_id && e.notification_id != *f.notification_id) return false;
    if (f.organization || f.product) {
        const auto a = assets_.find(e.asset_id);
        if (a == assets_.end()) return false;
        if (f.organization && a->second.organization != *f.organization) return false;
        if (f.product && a->second.product_label != *f.product) return false;
    }
    return true;
}

std::vector<Evaluation> Store::list_evaluations(const EvaluationFilter& filter) const {
    std::shared_lock lock(mutex_);
    std::vector<Evaluation> out;
    if (filter.status) {
        const auto it = evaluations_by_status_.find(*filter.status);
        if (it == evaluations_by_status_.end()) return out;
        for (const auto& id : it->second) {
            const auto& e = evaluations_.at(id);
            if (matches(e, filter)) out.push_back(e);
        }
        return out;
    }
    for (const auto& [id, e] : evaluations_)
        if (matches(e, filter)) out.push_back(e);
    return out;
}

std::vector<std::string> Store::notifications_for_cve(const std::string& cve_id) const {
    std::shared_lock lock(mutex_);
    const auto it = notifications_by_cve_.find(cve_id);
    if (it == notifications_by_cve_.end()) return {};
    return {it->second.begin(), it->second.end()};
}

std::vector<std::string> Store::applicable_assets(const Notification& n) const {
    std::shared_lock lock(mutex_);
    std::set<std::string> candidates;
    for (const auto& c : n.affected_components) {
        const auto it = assets_by_component_.find(component_key(c));
        if (it != assets_by_component_.end()) candidates.insert(it->second.begin(), it->second.end());
    }
    std::vector<std::string> out;
    for (const auto& id : candidates)
        if (!match_components(assets_.at(id), n).empty()) out.push_back(id);
    return out;
}

// Import / export -------------------------------------------------------------

ImportCounts Store::import_jsonl(std::istream* assets, std::istream* notifications, std::istream* evaluations) {
    ImportCounts counts;
    if (assets) counts.assets = for_each_line(*assets, [&](const json& j) { upsert_asset(asset_from_json(j)); });
    if (notifications)
        counts.notifications =
            for_each_line(*notifications, [&](const json& j) { upsert_notification(notification_from_json(j)); });
    if (evaluations) {
        counts.evaluations = for_each_line(*evaluations, [&](const json& raw) {
            json j = raw;
            // Environmental vectors may be given in description form; they
            // attach to the notification's base/temporal vector.
            if (const auto it = j.find("environmental_vector");
                it != j.end() && it->is_string() && !it->get<std::string>().starts_with("CVSS:")) {
                const auto text = it->get<std::string>();
                if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
                    j["environmental_vector"] = nullptr;
                } else {
                    const auto n = get_notification(j.value("notification_id", std::string{}));
                    if (!n)
                        throw UnknownReference("evaluation " + j.value("id", std::string{}) +
                                               ": unknown notification " + j.value("notification_id", std::string{}));
                    j["environmental_vector"] =
                        cvss::serialize_vector(parse_environmental(text, n->base_temporal_vector));
                }
            }
            upsert_evaluation(evaluation_from_json(j));
        });
    }
    return counts;
}

void Store::export_assets(std::ostream& out) const {
    std::shared_lock lock(mutex_);
    for (const auto& [id, a] : assets_) out << to_json(a).dump() << '\n';
}

void Store::export_notifications(std::ostream& out) const {
    std::shared_lock lock(mutex_);
    for (const auto& [id, n] : notifications_) out << to_json(n).dump() << '\n';
}

void Store::export_evaluations(std::ostream& out) const {
    std::shared_lock lock(mutex_);
    for (const auto& [id, e] : evaluations_) out << to_json(e).dump() << '\n';
}

void Store::compact() {
    if (!dir_) return;
    std::unique_lock lock(mutex_);
    const auto tmp = *dir_ / "snapshot.jsonl.tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        for (const auto& [id, a] : assets_) out << json{{"kind", "asset"}, {"record", to_json(a)}}.dump() << '\n';
        for (const auto& [id, n] : notifications_)
            out << json{{"kind", "notification"}, {"record", to_json(n)}}.dump() << '\n';
        for (const auto& [id, e] : evaluations_)
            out << json{{"kind", "evaluation"}, {"record", to_json(e)}}.dump() << '\n';
        out.flush();
        if (!out) throw Error("IoError", "snapshot write failed in " + dir_->string());
    }
    std::filesystem::rename(tmp, *dir_ / kSnapshot);
    journal_.close();
    journal_.open(*dir_ / kJournal, std::ios::trunc | std::ios::binary);
    journal_.close();
    journal_.open(*dir_ / kJournal, std::ios::app | std::ios::binary);
}

}  // namespace vulneval::catalog
