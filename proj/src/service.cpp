#include "vulneval/service.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "vulneval/error.hpp"
#include "vulneval/postprocess.hpp"

namespace vulneval::service {

using catalog::Evaluation;
using catalog::Provenance;
using catalog::VexCategory;
using nlohmann::json;

ReviewAction review_from_json(const std::string& evaluation_id, const json& j) {
    if (!j.is_object()) throw InvalidReview("review body must be a JSON object");
    ReviewAction a;
    a.evaluation_id = evaluation_id;
    try {
        const auto action = j.value("action", std::string{});
        if (action == "Accept") a.action = ReviewKind::Accept;
        else if (action == "Correct") a.action = ReviewKind::Correct;
        else throw InvalidReview("action must be Accept or Correct");
        a.reviewer = j.value("reviewer", std::string{});
        if (j.contains("duration_seconds") && !j.at("duration_seconds").is_null())
            a.duration_seconds = j.at("duration_seconds").get<std::int64_t>();
        if (j.contains("corrected_fields") && !j.at("corrected_fields").is_null()) {
            const auto& f = j.at("corrected_fields");
            if (!f.is_object()) throw InvalidReview("corrected_fields must be an object");
            auto& c = a.corrected_fields;
            if (f.contains("vex_category")) {
                const auto cat = catalog::category_from_string(f.at("vex_category").get<std::string>());
                if (!cat) throw InvalidReview("unknown vex_category " + f.at("vex_category").dump());
                c.vex_category = *cat;
            }
            if (f.contains("vex_justification")) c.vex_justification = f.at("vex_justification").get<std::string>();
            if (f.contains("internal_comment")) c.internal_comment = f.at("internal_comment").get<std::string>();
            if (f.contains("customer_comment")) c.customer_comment = f.at("customer_comment").get<std::string>();
            if (f.contains("environmental_vector")) {
                const auto& v = f.at("environmental_vector");
                c.environmental_vector = v.is_null() ? std::string{} : v.get<std::string>();
            }
            for (const auto& [key, _] : f.items()) {
                static const std::set<std::string> known = {"vex_category", "vex_justification", "internal_comment",
                                                            "customer_comment", "environmental_vector"};
                if (!known.contains(key)) throw InvalidReview("unknown corrected field '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw InvalidReview(e.what());
    }
    return a;
}

json to_json(const BatchRun& r) {
    json failures = json::array();
    for (const auto& f : r.failures)
        failures.push_back({{"asset_id", f.asset_id}, {"notification_id", f.notification_id}, {"error", f.error}});
    return {{"run_id", r.run_id},
            {"since", r.since},
            {"started_at", r.started_at},
            {"finished_at", r.finished_at},
            {"notifications_processed", r.notifications_processed},
            {"assets_processed", r.assets_processed},
            {"pairs_considered", r.pairs_considered},
            {"drafts_created", r.drafts_created},
            {"skipped_existing", r.skipped_existing},
            {"backend_calls", r.backend_calls},
            {"failures", failures}};
}

json to_json(const ExportResult& r) {
    return {{"path", r.path.string()},
            {"evaluations", r.evaluations},
            {"entries", r.entries},
            {"dropped", r.dropped},
            {"incomplete", r.incomplete},
            {"not_applicable", r.not_applicable},
            {"context_errors", r.context_errors}};
}

json to_json(const Stats& s) {
    return {{"assets", s.assets},
            {"notifications", s.notifications},
            {"evaluations", s.evaluations},
            {"pending", s.pending},
            {"accepted", s.accepted},
            {"corrected", s.corrected},
            {"acceptance_rate", s.acceptance_rate},
            {"timed_reviews", s.timed_reviews},
            {"mean_review_seconds", s.mean_review_seconds},
            {"median_review_seconds", s.median_review_seconds},
            {"baseline_seconds", s.baseline_seconds},
            {"time_saved_seconds", s.time_saved_seconds}};
}

Service::Service(catalog::Store& store, inference::Backend& backend, ServiceConfig config)
    : store_(store), backend_(backend), config_(std::move(config)) {
    config_.drafting.vocabulary = &config_.vocabulary;
}

Service::~Service() { stop_timer(); }

catalog::Asset Service::add_asset(catalog::Asset a, std::optional<std::uint64_t> expected_revision) {
    return store_.upsert_asset(std::move(a), expected_revision);
}

catalog::Notification Service::add_notification(catalog::Notification n,
                                                std::optional<std::uint64_t> expected_revision) {
    if (config_.graph && !n.enrichment && !n.cve_ids.empty())
        n.enrichment = cskg::enrich_notification(*config_.graph, n.cve_ids);
    return store_.upsert_notification(std::move(n), expected_revision);
}

BatchRun Service::run_batch(std::optional<Timestamp> since) {
    std::unique_lock lock(batch_mutex_, std::try_to_lock);
    if (!lock.owns_lock()) throw Busy("a batch run is already in progress");

    BatchRun run;
    {
        std::lock_guard g(runs_mutex_);
        run.run_id = "B" + std::to_string(runs_.size() + 1);
        run.since = since.value_or(runs_.empty() ? 0 : runs_.back().started_at);
    }
    run.started_at = store_.now();

    std::vector<std::pair<std::string, std::string>> pairs;
    std::set<std::pair<std::string, std::string>> seen;
    const auto push = [&](const std::string& a, const std::string& n) {
        if (seen.emplace(a, n).second) pairs.emplace_back(a, n);
    };
    const auto notifications = store_.list_notifications();
    for (const auto& n : notifications) {
        if (n.created_at < run.since) continue;
        ++run.notifications_processed;
        for (const auto& a : store_.applicable_assets(n)) push(a, n.id);
    }
    for (const auto& a : store_.list_assets()) {
        if (a.updated_at < run.since) continue;
        ++run.assets_processed;
        for (const auto& n : notifications)
            if (!catalog::match_components(a, n).empty()) push(a.id, n.id);
    }
    run.pairs_considered = pairs.size();

    auto draft = inference::draft_pairs(backend_, store_, pairs, config_.drafting);
    run.drafts_created = draft.drafts.size();
    run.skipped_existing = draft.skipped_existing;
    run.backend_calls = draft.backend_calls;
    run.failures = std::move(draft.failures);
    run.finished_at = store_.now();

    std::lock_guard g(runs_mutex_);
    runs_.push_back(run);
    return run;
}

std::vector<BatchRun> Service::runs() const {
    std::lock_guard g(runs_mutex_);
    return runs_;
}

std::vector<Evaluation> Service::review_queue(const QueueFilter& filter) const {
    catalog::EvaluationFilter f;
    f.status = Provenance::AiDraft;
    f.organization = filter.organization;
    f.product = filter.product;
    f.notification_id = filter.notification_id;
    f.category = filter.category;
    auto out = store_.list_evaluations(f);
    std::sort(out.begin(), out.end(), [](const Evaluation& a, const Evaluation& b) {
        const auto rank = [](const Evaluation& e) {
            return std::make_tuple(e.vex_category == VexCategory::Affected ? 0 : 1, e.flags.empty() ? 1 : 0,
                                   -e.created_at);
        };
        const auto ra = rank(a), rb = rank(b);
        if (ra != rb) return ra < rb;
        return a.id < b.id;
    });
    return out;
}

std::shared_ptr<std::mutex> Service::review_lock(const std::string& evaluation_id) {
    std::lock_guard g(review_locks_mutex_);
    auto& slot = review_locks_[evaluation_id];
    if (!slot) slot = std::make_shared<std::mutex>();
    return slot;
}

Evaluation Service::submit_review(const ReviewAction& action) {
    const auto lock_ptr = review_lock(action.evaluation_id);
    std::lock_guard lock(*lock_ptr);

    auto current = store_.get_evaluation(action.evaluation_id);
    if (!current) throw UnknownEvaluation(action.evaluation_id);
    if (current->provenance != Provenance::AiDraft) throw AlreadyReviewed(action.evaluation_id);
    if (action.duration_seconds && *action.duration_seconds < 0)
        throw InvalidReview("duration_seconds must not be negative");

    Evaluation e = *current;
    auto snapshot = catalog::to_json(*current);
    snapshot.erase("history");
    const auto now = store_.now();
    e.history.push_back({now, action.reviewer, action.action == ReviewKind::Accept ? "Accept" : "Correct", snapshot});

    if (action.action == ReviewKind::Accept) {
        if (!action.corrected_fields.empty()) throw InvalidReview("Accept carries no corrected fields");
        e.provenance = Provenance::ExpertAccepted;
    } else {
        const auto& c = action.corrected_fields;
        if (c.empty()) throw InvalidReview("Correct needs at least one corrected field");

        auto fields = postprocess::fields_of(*current);
        if (c.vex_category) fields.category = *c.vex_category;
        if (c.vex_justification) {
            const auto j = config_.vocabulary.match(*c.vex_justification);
            if (!j) throw InvalidReview("justification '" + *c.vex_justification + "' is not in the vocabulary");
            fields.justification_text = std::string(catalog::to_string(*j));
        } else if (c.vex_category && *c.vex_category != current->vex_category &&
                   *c.vex_category == VexCategory::NotAffected) {
            // Flipping to NotAffected without a justification: None is not a
            // NotAffected justification, so R2 yields Other.
            fields.justification_text.clear();
        }
        if (c.internal_comment) fields.internal_comment = *c.internal_comment;
        if (c.customer_comment) fields.customer_comment = *c.customer_comment;
        if (c.environmental_vector) {
            fields.environmental_vector.reset();
            if (!c.environmental_vector->empty()) {
                const auto notification = store_.get_notification(current->notification_id);
                const auto base = notification ? notification->base_temporal_vector : std::nullopt;
                try {
                    auto v = catalog::parse_environmental(*c.environmental_vector, base);
                    if (!v.valid() || !v.metrics.has_group(cvss::Group::Environmental))
                        throw InvariantViolation("corrected vector carries no environmental metrics");
                    fields.environmental_vector = std::move(v);
                } catch (const InvariantViolation&) {
                    throw;
                } catch (const Error& err) {
                    throw InvariantViolation(std::string("corrected vector does not parse: ") + err.what());
                }
            }
        }

        const auto notification = store_.get_notification(current->notification_id);
        postprocess::RuleContext ctx{&config_.vocabulary,
                                     notification ? notification->base_temporal_vector : std::nullopt};
        const auto corrected = postprocess::apply_rules({}, fields, ctx);
        e.flags.clear();
        corrected.apply_to(e);
        if (e.vex_category == current->vex_category && e.vex_justification == current->vex_justification &&
            e.internal_comment == current->internal_comment && e.customer_comment == current->customer_comment &&
            e.environmental_vector == current->environmental_vector)
            throw InvalidReview("correction changes nothing; submit Accept instead");
        e.provenance = Provenance::ExpertCorrected;
    }
    if (auto broken = catalog::check_invariants(e)) throw InvariantViolation(*broken);

    e.reviewer = action.reviewer;
    e.review_duration_seconds = action.duration_seconds;
    e.reviewed_at = now;
    try {
        return store_.upsert_evaluation(std::move(e), current->revision);
    } catch (const VersionConflict&) {
        throw AlreadyReviewed(action.evaluation_id);
    }
}

ExportResult Service::export_retraining(Timestamp since, std::optional<std::filesystem::path> path) {
    ExportResult r;
    r.path = path ? *path : config_.export_dir / ("retraining-" + std::to_string(store_.now()) + ".jsonl");
    if (r.path.has_parent_path()) std::filesystem::create_directories(r.path.parent_path());

    std::vector<Evaluation> reviewed;
    for (auto status : {Provenance::ExpertAccepted, Provenance::ExpertCorrected}) {
        catalog::EvaluationFilter f;
        f.status = status;
        for (auto& e : store_.list_evaluations(f))
            if (e.reviewed_at >= since) reviewed.push_back(std::move(e));
    }
    std::sort(reviewed.begin(), reviewed.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

    const promptgen::ApproxTokenizer fallback;
    const auto& tokenizer = config_.drafting.tokenizer ? *config_.drafting.tokenizer : fallback;
    std::vector<promptgen::SftEntry> candidates;
    for (const auto& e : reviewed) {
        ++r.evaluations;
        const auto asset = store_.get_asset(e.asset_id);
        const auto notification = store_.get_notification(e.notification_id);
        if (!asset || !notification) {
            ++r.context_errors;
            continue;
        }
        try {
            auto built = promptgen::build_sft_entries(e, promptgen::build_context(*asset, *notification), tokenizer,
                                                      config_.drafting.prompt);
            r.incomplete += built.incomplete.size();
            r.not_applicable += built.not_applicable;
            for (auto& x : built.entries) candidates.push_back(std::move(x));
            for (auto& x : built.incomplete) candidates.push_back(std::move(x));
        } catch (const IncompleteContext&) {
            ++r.context_errors;
        }
    }
    auto filtered = promptgen::filter_corpus(std::move(candidates), config_.max_tokens);
    r.entries = filtered.kept.size();
    r.dropped = filtered.dropped.size();

    std::ofstream out(r.path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + r.path.string());
    for (const auto& entry : filtered.kept) out << promptgen::to_json(entry).dump() << '\n';
    out.flush();
    if (!out) throw Error("IoError", "write failed for " + r.path.string());
    return r;
}

Stats Service::stats() const {
    Stats s;
    s.assets = store_.list_assets().size();
    s.notifications = store_.list_notifications().size();
    std::vector<double> durations;
    for (const auto& e : store_.list_evaluations()) {
        ++s.evaluations;
        switch (e.provenance) {
            case Provenance::AiDraft: ++s.pending; break;
            case Provenance::ExpertAccepted: ++s.accepted; break;
            case Provenance::ExpertCorrected: ++s.corrected; break;
        }
        if (e.provenance != Provenance::AiDraft && e.review_duration_seconds)
            durations.push_back(static_cast<double>(*e.review_duration_seconds));
    }
    const auto reviewed = s.accepted + s.corrected;
    s.acceptance_rate = reviewed ? static_cast<double>(s.accepted) / static_cast<double>(reviewed) : 0.0;
    s.timed_reviews = durations.size();
    if (!durations.empty()) {
        double sum = 0;
        for (double d : durations) sum += d;
        s.mean_review_seconds = sum / static_cast<double>(durations.size());
        std::sort(durations.begin(), durations.end());
        const auto n = durations.size();
        s.median_review_seconds = n % 2 ? durations[n / 2] : (durations[n / 2 - 1] + durations[n / 2]) / 2;
        s.time_saved_seconds = static_cast<double>(n) * (s.baseline_seconds - s.mean_review_seconds);
    }
    return s;
}

json Service::evaluation_context(const std::string& evaluation_id) const {
    const auto e = store_.get_evaluation(evaluation_id);
    if (!e) throw UnknownEvaluation(evaluation_id);
    const auto asset = store_.get_asset(e->asset_id);
    const auto notification = store_.get_notification(e->notification_id);
    if (!asset || !notification) throw UnknownReference("evaluation " + evaluation_id + " references missing records");
    const auto ctx = promptgen::build_context(*asset, *notification);
    json components = json::array();
    for (const auto& c : ctx.common_components) components.push_back(c.render());
    json out = {{"evaluation_id", evaluation_id},
                {"organization", ctx.organization},
                {"software", ctx.software},
                {"product", ctx.product},
                {"notification", ctx.notification_text},
                {"prerequisites", ctx.prerequisites},
                {"typical_severity", std::string(ingest::to_token(ctx.typical_severity))},
                {"mitigations", ctx.mitigations},
                {"components", components},
                {"base_temporal_description", ctx.base_temporal_description},
                {"cvss_version", ctx.cvss_version}};
    if (notification->base_temporal_vector)
        out["base_temporal_vector"] = cvss::serialize_vector(*notification->base_temporal_vector);
    return out;
}

void Service::start_timer() {
    if (!config_.batch_interval || timer_.joinable()) return;
    timer_stop_ = false;
    timer_ = std::thread([this] {
        std::unique_lock lock(timer_mutex_);
        while (!timer_cv_.wait_for(lock, *config_.batch_interval, [this] { return timer_stop_; })) {
            lock.unlock();
            try {
                run_batch();
            } catch (const std::exception&) {
                // Busy or a store failure; the next tick retries.
            }
            lock.lock();
        }
    });
}

void Service::stop_timer() {
    {
        std::lock_guard g(timer_mutex_);
        timer_stop_ = true;
    }
    timer_cv_.notify_all();
    if (timer_.joinable()) timer_.join();
}

}  // namespace vulneval::service
