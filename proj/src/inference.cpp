#include "vulneval/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "vulneval/net.hpp"

namespace vulneval::inference {

using nlohmann::json;

void GenParams::validate() const {
    if (beam_size < 1) throw Error("InvalidParams", "beam_size must be >= 1");
    if (!(temperature >= 0.0 && temperature <= 1.0)) throw Error("InvalidParams", "temperature must be in [0, 1]");
    if (!(top_p >= 0.0 && top_p <= 1.0)) throw Error("InvalidParams", "top_p must be in [0, 1]");
    if (max_new_tokens == 0) throw Error("InvalidParams", "max_new_tokens must be positive");
}

json to_json(const GenParams& p) {
    return {{"beam_size", p.beam_size},
            {"temperature", p.temperature},
            {"top_p", p.top_p},
            {"max_new_tokens", p.max_new_tokens},
            {"stop_sequence", p.stop_sequence}};
}

GenParams params_from_json(const json& j, GenParams p) {
    if (!j.is_object()) throw Error("InvalidParams", "params must be an object");
    try {
        if (j.contains("beam_size")) p.beam_size = j.at("beam_size").get<std::size_t>();
        if (j.contains("temperature")) p.temperature = j.at("temperature").get<double>();
        if (j.contains("top_p")) p.top_p = j.at("top_p").get<double>();
        if (j.contains("max_new_tokens")) p.max_new_tokens = j.at("max_new_tokens").get<std::size_t>();
        if (j.contains("stop_sequence")) p.stop_sequence = j.at("stop_sequence").get<std::string>();
    } catch (const json::exception& e) {
        throw Error("InvalidParams", e.what());
    }
    p.validate();
    return p;
}

std::size_t default_max_new_tokens(InstructionKind kind) noexcept {
    switch (kind) {
        case InstructionKind::Category: return 60;
        case InstructionKind::CustomerComment: return 150;
        default: return 200;
    }
}

BatchPlan plan_batches(const std::vector<std::size_t>& prompt_tokens, std::size_t threshold, std::size_t headroom) {
    BatchPlan plan;
    plan.threshold = threshold;
    Bucket short_bucket, long_bucket;
    std::size_t longest = 0;
    for (std::size_t i = 0; i < prompt_tokens.size(); ++i) {
        if (prompt_tokens[i] < threshold) {
            short_bucket.indices.push_back(i);
        } else {
            long_bucket.indices.push_back(i);
            longest = std::max(longest, prompt_tokens[i]);
        }
    }
    if (!short_bucket.indices.empty()) plan.buckets.push_back(std::move(short_bucket));
    if (!long_bucket.indices.empty()) {
        long_bucket.context_length = headroom + longest;
        plan.buckets.push_back(std::move(long_bucket));
    }
    return plan;
}

std::string truncate_at_stop(std::string_view completion, std::string_view stop) {
    if (!stop.empty()) completion = completion.substr(0, completion.find(stop));
    const auto end = completion.find_last_not_of(" \t\r\n");
    return std::string(end == std::string_view::npos ? std::string_view{} : completion.substr(0, end + 1));
}

std::vector<std::string> Backend::generate(const std::vector<std::string>& prompts, const GenParams& params,
                                           std::optional<std::size_t> context_length) {
    if (prompts.empty()) return {};
    auto raw = generate_raw(prompts, params, context_length);
    if (raw.size() != prompts.size()) {
        std::ostringstream msg;
        msg << name() << " backend returned " << raw.size() << " completions for " << prompts.size() << " prompts";
        throw BackendUnavailable(msg.str());
    }
    for (auto& c : raw) c = truncate_at_stop(c, params.stop_sequence);
    return raw;
}

// Mock -----------------------------------------------------------------------

std::uint64_t MockBackend::hash(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::string> prompt_component_names(std::string_view prompt) {
    constexpr std::string_view label = "Components present in software: ";
    std::vector<std::string> out;
    const auto at = prompt.find(label);
    if (at == std::string_view::npos) return out;
    auto line = prompt.substr(at + label.size());
    line = line.substr(0, line.find('\n'));
    std::size_t pos = 0;
    while (pos < line.size()) {
        auto end = line.find(", ", pos);
        if (end == std::string_view::npos) end = line.size();
        const auto item = line.substr(pos, end - pos);
        auto name = catalog::normalize(item.substr(0, item.find(" - ")));
        if (!name.empty()) out.push_back(std::move(name));
        pos = end + 2;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

MockBackend::MockBackend(promptgen::PromptConfig config) : config_(std::move(config)) {}

void MockBackend::add_input(InstructionKind kind, std::string_view input, std::string response) {
    const auto key = hash(input);
    const std::pair<int, std::uint64_t> slot{static_cast<int>(kind), key};
    // Component names come from the input section, which holds the same line.
    Fixture f{kind, key, prompt_component_names(input), std::move(response)};
    if (auto it = by_key_.find(slot); it != by_key_.end()) {
        fixtures_[it->second] = std::move(f);
    } else {
        by_key_.emplace(slot, fixtures_.size());
        fixtures_.push_back(std::move(f));
    }
}

void MockBackend::add(std::string_view prompt, std::string response) {
    const auto kind = config_.kind_of_prompt(prompt);
    if (!kind) throw InvalidRecord("mock fixture prompt has no recognised instruction line");
    add_input(*kind, promptgen::input_section(prompt), std::move(response));
}

void MockBackend::load(const json& fixtures) {
    if (!fixtures.is_array()) throw InvalidRecord("mock fixtures must be a JSON array");
    for (const auto& f : fixtures) {
        if (!f.is_object() || !f.contains("response")) throw InvalidRecord("mock fixture needs a response");
        auto response = f.at("response").get<std::string>();
        if (f.contains("prompt")) {
            add(f.at("prompt").get<std::string>(), std::move(response));
        } else {
            const auto kind = promptgen::kind_from_string(f.value("kind", ""));
            if (!kind || !f.contains("input")) throw InvalidRecord("mock fixture needs prompt, or kind and input");
            add_input(*kind, f.at("input").get<std::string>(), std::move(response));
        }
    }
}

MockBackend MockBackend::from_file(const std::filesystem::path& file, promptgen::PromptConfig config) {
    std::ifstream in(file);
    if (!in) throw Error("IoError", "cannot open mock fixtures " + file.string());
    MockBackend mock(std::move(config));
    try {
        mock.load(json::parse(in));
    } catch (const json::parse_error& e) {
        throw InvalidRecord(file.string() + ": " + e.what());
    }
    return mock;
}

std::string MockBackend::lookup(std::string_view prompt) const {
    const auto kind = config_.kind_of_prompt(prompt);
    if (!kind) return {};
    const auto key = hash(promptgen::input_section(prompt));
    if (auto it = by_key_.find({static_cast<int>(*kind), key}); it != by_key_.end())
        return fixtures_[it->second].response;

    const auto names = prompt_component_names(prompt);
    const Fixture* best = nullptr;
    std::size_t best_overlap = 0;
    for (const auto& f : fixtures_) {
        if (f.kind != *kind) continue;
        std::size_t overlap = 0;
        for (const auto& n : f.components)
            if (std::binary_search(names.begin(), names.end(), n)) ++overlap;
        if (!best || overlap > best_overlap || (overlap == best_overlap && f.key < best->key)) {
            best = &f;
            best_overlap = overlap;
        }
    }
    return best ? best->response : std::string{};
}

std::vector<std::string> MockBackend::generate_raw(const std::vector<std::string>& prompts, const GenParams& params,
                                                   std::optional<std::size_t>) {
    std::vector<std::string> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(lookup(p) + "\n" + params.stop_sequence);
    return out;
}

// HTTP -----------------------------------------------------------------------

HttpBackendConfig HttpBackendConfig::from_env() {
    HttpBackendConfig c;
    if (const char* url = std::getenv("VULNEVAL_BACKEND_URL")) c.url = url;
    if (const char* token = std::getenv("VULNEVAL_BACKEND_TOKEN"); token && *token) c.token = token;
    return c;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    while (!config_.url.empty() && config_.url.back() == '/') config_.url.pop_back();
    if (!net::is_url(config_.url)) throw Error("InvalidUrl", "backend URL must be http(s): '" + config_.url + "'");
    if (config_.attempts == 0) config_.attempts = 1;
}

std::vector<std::string> HttpBackend::generate_raw(const std::vector<std::string>& prompts, const GenParams& params,
                                                   std::optional<std::size_t> context_length) {
    json body = {{"prompts", prompts}, {"params", to_json(params)}, {"context_length", nullptr}};
    if (context_length) body["context_length"] = *context_length;
    const auto payload = body.dump();
    net::Headers headers;
    if (config_.token) headers.emplace_back("Authorization", "Bearer " + *config_.token);

    auto backoff = config_.initial_backoff;
    std::string last_error;
    for (std::size_t attempt = 1; attempt <= config_.attempts; ++attempt) {
        bool retryable = true;
        try {
            const auto res = net::post_json(config_.url + "/generate", payload, headers, config_.timeout);
            if (res.status == 200) {
                json parsed;
                try {
                    parsed = json::parse(res.body);
                    return parsed.at("completions").get<std::vector<std::string>>();
                } catch (const json::exception& e) {
                    throw BackendUnavailable(std::string("malformed backend response: ") + e.what());
                }
            }
            last_error = "backend returned HTTP " + std::to_string(res.status);
            retryable = res.status == 429 || res.status >= 500;
        } catch (const BackendUnavailable& e) {
            last_error = e.what();
            if (std::string_view(e.what()).starts_with("malformed")) retryable = false;
        }
        if (!retryable) break;
        if (attempt < config_.attempts) {
            std::this_thread::sleep_for(backoff);
            backoff = std::chrono::milliseconds(
                static_cast<std::int64_t>(static_cast<double>(backoff.count()) * config_.backoff_multiplier));
        }
    }
    throw BackendUnavailable(last_error);
}

PartialFailure::PartialFailure(DraftRun run)
    : Error("PartialFailure", std::to_string(run.failures.size()) + " pair(s) failed, " +
                                  std::to_string(run.drafts.size()) + " draft(s) created"),
      run_(std::move(run)) {}

// Drafting -------------------------------------------------------------------

namespace {

struct PairWork {
    catalog::Asset asset;
    catalog::Notification notification;
    std::array<std::string, 4> prompts;
    std::array<std::string, 4> completions;
    std::optional<std::string> error;
    bool backend_error = false;
};

struct Call {
    InstructionKind kind;
    std::optional<std::size_t> context_length;
    std::vector<std::size_t> work;  // indices into the PairWork list
};

}  // namespace

DraftRun draft_pairs(Backend& backend, catalog::Store& store,
                     const std::vector<std::pair<std::string, std::string>>& pairs, const DraftOptions& options) {
    options.params.validate();
    DraftRun run;
    const promptgen::ApproxTokenizer fallback_tokenizer;
    const promptgen::Tokenizer& tokenizer = options.tokenizer ? *options.tokenizer : fallback_tokenizer;

    std::vector<PairWork> work;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& [asset_id, notification_id] : pairs) {
        if (!seen.emplace(asset_id, notification_id).second) continue;
        if (options.skip_existing && store.find_evaluation(asset_id, notification_id)) {
            ++run.skipped_existing;
            continue;
        }
        auto asset = store.get_asset(asset_id);
        auto notification = store.get_notification(notification_id);
        if (!asset || !notification) {
            run.failures.push_back({asset_id, notification_id, !asset ? "unknown asset" : "unknown notification"});
            continue;
        }
        PairWork w{std::move(*asset), std::move(*notification), {}, {}, {}, false};
        try {
            const auto ctx = promptgen::build_context(w.asset, w.notification);
            for (auto kind : promptgen::kAllKinds)
                w.prompts[static_cast<std::size_t>(kind)] = promptgen::render_prompt(ctx, kind, options.prompt);
        } catch (const Error& e) {
            run.failures.push_back({asset_id, notification_id, e.what()});
            continue;
        }
        work.push_back(std::move(w));
    }

    // One plan per kind, since generation limits differ per kind.
    std::vector<Call> calls;
    const auto batch = std::max<std::size_t>(1, options.max_batch_size);
    for (auto kind : promptgen::kAllKinds) {
        const auto k = static_cast<std::size_t>(kind);
        std::vector<std::size_t> counts;
        counts.reserve(work.size());
        for (const auto& w : work) counts.push_back(tokenizer.count(w.prompts[k]));
        for (const auto& bucket : plan_batches(counts, options.threshold, options.headroom).buckets) {
            for (std::size_t i = 0; i < bucket.indices.size(); i += batch) {
                Call c{kind, bucket.context_length, {}};
                const auto end = std::min(bucket.indices.size(), i + batch);
                c.work.assign(bucket.indices.begin() + static_cast<std::ptrdiff_t>(i),
                              bucket.indices.begin() + static_cast<std::ptrdiff_t>(end));
                calls.push_back(std::move(c));
            }
        }
    }
    run.backend_calls = calls.size();

    std::mutex failure_mutex;
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < calls.size(); i = next++) {
            const auto& call = calls[i];
            const auto k = static_cast<std::size_t>(call.kind);
            auto params = options.params;
            if (options.per_kind_limits) params.max_new_tokens = default_max_new_tokens(call.kind);
            std::vector<std::string> prompts;
            for (auto w : call.work) prompts.push_back(work[w].prompts[k]);
            try {
                auto completions = backend.generate(prompts, params, call.context_length);
                for (std::size_t j = 0; j < call.work.size(); ++j)
                    work[call.work[j]].completions[k] = std::move(completions[j]);
            } catch (const std::exception& e) {
                std::lock_guard lock(failure_mutex);
                for (auto w : call.work) {
                    if (!work[w].error) work[w].error = e.what();
                    work[w].backend_error = true;
                }
            }
        }
    };
    const auto threads = std::min(std::max<std::size_t>(1, options.concurrency), calls.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    for (auto& w : work) {
        if (w.error) {
            run.failures.push_back({w.asset.id, w.notification.id, *w.error, w.backend_error});
            continue;
        }
        postprocess::RawDraft raw{w.completions[0], w.completions[1], w.completions[2], w.completions[3]};
        const auto corrected = postprocess::apply_rules(
            raw, postprocess::parse_draft(raw), {options.vocabulary, w.notification.base_temporal_vector});
        catalog::Evaluation e;
        e.asset_id = w.asset.id;
        e.notification_id = w.notification.id;
        e.provenance = catalog::Provenance::AiDraft;
        corrected.apply_to(e);
        try {
            if (options.persist) {
                e.id = store.next_evaluation_id();
                e = store.upsert_evaluation(std::move(e), 0);
            }
        } catch (const Error& err) {
            run.failures.push_back({w.asset.id, w.notification.id, err.what()});
            continue;
        }
        run.drafts.push_back(std::move(e));
        run.reports.push_back(corrected.report);
    }
    return run;
}

std::vector<catalog::Evaluation> generate_evaluation_drafts(Backend& backend, catalog::Store& store,
                                                            const std::string& notification_id,
                                                            const DraftOptions& options) {
    const auto notification = store.get_notification(notification_id);
    if (!notification) throw NotFound("notification " + notification_id);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& asset_id : store.applicable_assets(*notification)) pairs.emplace_back(asset_id, notification_id);
    auto run = draft_pairs(backend, store, pairs, options);
    if (!run.failures.empty()) {
        const bool all_backend = run.drafts.empty() && std::all_of(run.failures.begin(), run.failures.end(),
                                                                   [](const AssetFailure& f) { return f.backend; });
        if (all_backend) throw BackendUnavailable(run.failures.front().error);
        throw PartialFailure(std::move(run));
    }
    return std::move(run.drafts);
}

}  // namespace vulneval::inference
