// vulneval command-line front end.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vulneval/catalog.hpp"
#include "vulneval/cskg.hpp"
#include "vulneval/cvss.hpp"
#include "vulneval/error.hpp"
#include "vulneval/evalmetrics.hpp"
#include "vulneval/inference.hpp"
#include "vulneval/ingest.hpp"
#include "vulneval/promptgen.hpp"
#include "vulneval/service.hpp"
#include "vulneval/store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vulneval;

namespace {

constexpr const char* kCveFile = "cves.jsonl";
constexpr const char* kCweFile = "cwes.jsonl";
constexpr const char* kCapecFile = "capecs.jsonl";

std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + p.string());
    return in;
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + p.string());
    return out;
}

std::vector<json> read_jsonl(const fs::path& p) {
    auto in = open_in(p);
    std::vector<json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw InvalidRecord(p.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

// Catalog records as written by `ingest`.
json cve_json(const ingest::CveRecord& c) {
    json j = {{"id", c.id},           {"title", c.title},           {"description", c.description},
              {"cwe_ids", c.cwe_ids}, {"affected", c.affected_versions}, {"unaffected", c.unaffected_versions}};
    if (c.cvss_vector) j["vector"] = *c.cvss_vector;
    if (c.cvss_version) j["version"] = *c.cvss_version;
    if (c.mitigations) j["mitigations"] = *c.mitigations;
    return j;
}

json cwe_json(const ingest::CweEntry& c) {
    return {{"id", c.id}, {"name", c.name}, {"description", c.description}, {"related_capec_ids", c.related_capec_ids}};
}

json capec_json(const ingest::CapecEntry& c) {
    return {{"id", c.id},
            {"name", c.name},
            {"prerequisites", c.prerequisites},
            {"typical_severity", std::string(ingest::to_token(c.typical_severity))},
            {"mitigations", c.mitigations}};
}

// Re-reads catalogs through the compact parsers so there is one schema.
template <typename Parse>
auto reparse(const fs::path& p, const char* key, ingest::FeedFormat format, Parse parse) {
    json items = json::array();
    if (fs::exists(p))
        for (auto& j : read_jsonl(p)) items.push_back(std::move(j));
    return parse(ingest::RawFeed{json{{key, items}}.dump(), format, p.string()}).records;
}

struct Catalogs {
    std::vector<ingest::CveRecord> cves;
    std::vector<ingest::CweEntry> cwes;
    std::vector<ingest::CapecEntry> capecs;
};

Catalogs load_catalogs(const fs::path& dir) {
    Catalogs c;
    c.cves = reparse(dir / kCveFile, "cves", ingest::FeedFormat::CompactFixtureJson, ingest::parse_cve_feed);
    c.cwes = reparse(dir / kCweFile, "cwes", ingest::FeedFormat::CompactCweJson, ingest::parse_cwe_catalog);
    c.capecs = reparse(dir / kCapecFile, "capecs", ingest::FeedFormat::CompactCapecJson, ingest::parse_capec_catalog);
    return c;
}

cskg::Cskg graph_from(const fs::path& dir) {
    auto c = load_catalogs(dir);
    return cskg::build_graph(c.cves, c.cwes, c.capecs);
}

ingest::FeedFormat guess_catalog_format(const std::string& source, ingest::FeedFormat xml, ingest::FeedFormat compact) {
    const auto ext = fs::path(source.substr(0, source.find('?'))).extension().string();
    return ext == ".xml" ? xml : compact;
}

void print_diagnostics(const std::vector<std::string>& d, const char* what) {
    for (const auto& line : d) std::cerr << what << ": skipped: " << line << '\n';
}

std::unique_ptr<inference::Backend> make_backend(const std::string& kind, const std::string& fixtures,
                                                 const std::string& url) {
    if (kind == "mock") {
        auto mock = fixtures.empty() ? inference::MockBackend() : inference::MockBackend::from_file(fixtures);
        return std::make_unique<inference::MockBackend>(std::move(mock));
    }
    if (kind == "http") {
        auto cfg = inference::HttpBackendConfig::from_env();
        if (!url.empty()) cfg.url = url;
        return std::make_unique<inference::HttpBackend>(std::move(cfg));
    }
    throw Error("InvalidArgument", "backend must be mock or http");
}

cvss::Parts parse_parts(const std::string& spec) {
    if (spec.empty() || spec == "all") return cvss::Parts::all();
    cvss::Parts p{false, false, false};
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "base") p.base = true;
        else if (item == "temporal") p.temporal = true;
        else if (item == "environmental") p.environmental = true;
        else throw Error("InvalidArgument", "unknown part '" + item + "'");
    }
    return p;
}

std::vector<std::string> split_names(std::size_t n) {
    if (n == 2) return {"train", "test"};
    if (n == 3) return {"train", "validation", "test"};
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("split" + std::to_string(i));
    return out;
}

service::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vulnerability evaluation pipeline"};
    app.require_subcommand(1);
    std::string db = "vulneval-data";
    app.add_option("--db", db, "Store and catalog directory")->capture_default_str();

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse CVE/CWE/CAPEC feeds into the catalog directory");
    std::string cve_src, cwe_src, capec_src, format = "compact";
    ingest_cmd->add_option("--cve", cve_src, "CVE feed path or URL");
    ingest_cmd->add_option("--cwe", cwe_src, "CWE catalog path (.xml or compact JSON)");
    ingest_cmd->add_option("--capec", capec_src, "CAPEC catalog path (.xml or compact JSON)");
    ingest_cmd->add_option("--format", format, "CVE feed format: compact|nvd")->capture_default_str();

    // cskg
    auto* cskg_cmd = app.add_subcommand("cskg", "Knowledge graph tools");
    cskg_cmd->require_subcommand(1);
    auto* cskg_export = cskg_cmd->add_subcommand("export", "Print the graph adjacency as JSON");
    std::string cskg_out;
    cskg_export->add_option("-o,--out", cskg_out, "Output file (stdout when omitted)");

    // cvss
    auto* cvss_cmd = app.add_subcommand("cvss", "CVSS v3.x vector tools");
    cvss_cmd->require_subcommand(1);
    std::string vector_text, parts_spec;
    bool cvss_json = false;
    auto* cvss_score = cvss_cmd->add_subcommand("score", "Print base, temporal and environmental scores");
    cvss_score->add_option("vector", vector_text, "Vector string")->required();
    cvss_score->add_flag("--json", cvss_json, "JSON output");
    auto* cvss_describe = cvss_cmd->add_subcommand("describe", "Print the template description");
    cvss_describe->add_option("vector", vector_text, "Vector string")->required();
    cvss_describe->add_option("--parts", parts_spec, "base,temporal,environmental (default all)");

    // load
    auto* load_cmd = app.add_subcommand("load", "Import assets, notifications and evaluations (JSONL)");
    std::string assets_file, notifications_file, evaluations_file;
    bool no_enrich = false;
    load_cmd->add_option("--assets", assets_file);
    load_cmd->add_option("--notifications", notifications_file);
    load_cmd->add_option("--evaluations", evaluations_file);
    load_cmd->add_flag("--no-enrich", no_enrich, "Do not enrich notifications from the catalogs");

    // corpus
    auto* corpus_cmd = app.add_subcommand("corpus", "Training corpus construction");
    corpus_cmd->require_subcommand(1);
    auto* corpus_build = corpus_cmd->add_subcommand("build", "Write DAPT and SFT corpora with a seeded split");
    std::string split = "0.9/0.05/0.05", corpus_out = "corpus", gold_file;
    std::uint64_t seed = 0;
    std::size_t max_tokens = promptgen::kDefaultMaxTokens;
    std::string vocab_file;
    corpus_build->add_option("--split", split)->capture_default_str();
    corpus_build->add_option("--seed", seed)->capture_default_str();
    corpus_build->add_option("--out", corpus_out, "Output directory")->capture_default_str();
    corpus_build->add_option("--evaluations", gold_file, "Gold evaluations JSONL (default: reviewed store records)");
    corpus_build->add_option("--max-tokens", max_tokens)->capture_default_str();
    corpus_build->add_option("--vocab", vocab_file, "Vocabulary file for token counting");

    // generate
    auto* gen_cmd = app.add_subcommand("generate", "Draft evaluations for one notification");
    std::string notification_id, backend_kind = "mock", fixtures, backend_url;
    double temperature = 0.0, top_p = 1.0;
    std::size_t beam = 1;
    gen_cmd->add_option("--notification", notification_id)->required();
    gen_cmd->add_option("--backend", backend_kind, "mock|http")->capture_default_str();
    gen_cmd->add_option("--mock-fixtures", fixtures, "Mock fixture JSON");
    gen_cmd->add_option("--backend-url", backend_url, "Overrides VULNEVAL_BACKEND_URL");
    gen_cmd->add_option("--temperature", temperature)->capture_default_str();
    gen_cmd->add_option("--top-p", top_p)->capture_default_str();
    gen_cmd->add_option("--beam-size", beam)->capture_default_str();

    // score
    auto* score_cmd = app.add_subcommand("score", "Score generated evaluations against gold");
    std::string generated_file, gold_eval_file;
    bool score_json = false, allow_orphans = false;
    score_cmd->add_option("--generated", generated_file)->required();
    score_cmd->add_option("--gold", gold_eval_file)->required();
    score_cmd->add_flag("--json", score_json);
    score_cmd->add_flag("--allow-orphans", allow_orphans);

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Run the REST service");
    int port = 8080;
    std::string host = "127.0.0.1", token, export_dir;
    long batch_interval = 0;
    serve_cmd->add_option("--port", port)->capture_default_str();
    serve_cmd->add_option("--host", host)->capture_default_str();
    serve_cmd->add_option("--backend", backend_kind, "mock|http")->capture_default_str();
    serve_cmd->add_option("--mock-fixtures", fixtures);
    serve_cmd->add_option("--backend-url", backend_url);
    serve_cmd->add_option("--token", token, "Bearer token (default: VULNEVAL_API_TOKEN)");
    serve_cmd->add_option("--export-dir", export_dir);
    serve_cmd->add_option("--batch-interval", batch_interval, "Seconds between automatic batch runs (0: off)");

    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path dir(db);

        if (ingest_cmd->parsed()) {
            fs::create_directories(dir);
            if (!cve_src.empty()) {
                const auto fmt = ingest::format_from_string(format);
                if (!fmt) throw UnsupportedFormat("unknown feed format '" + format + "'");
                const auto r = ingest::parse_cve_feed(ingest::load_feed(cve_src, *fmt));
                print_diagnostics(r.diagnostics, "cve");
                auto out = open_out(dir / kCveFile);
                for (const auto& c : r.records) out << cve_json(c).dump() << '\n';
                std::cout << "cves: " << r.records.size() << " (skipped " << r.skipped << ")\n";
            }
            if (!cwe_src.empty()) {
                const auto fmt =
                    guess_catalog_format(cwe_src, ingest::FeedFormat::CweXml, ingest::FeedFormat::CompactCweJson);
                const auto r = ingest::parse_cwe_catalog(ingest::load_feed(cwe_src, fmt));
                print_diagnostics(r.diagnostics, "cwe");
                auto out = open_out(dir / kCweFile);
                for (const auto& c : r.records) out << cwe_json(c).dump() << '\n';
                std::cout << "cwes: " << r.records.size() << " (skipped " << r.skipped << ")\n";
            }
            if (!capec_src.empty()) {
                const auto fmt = guess_catalog_format(capec_src, ingest::FeedFormat::CapecXml,
                                                      ingest::FeedFormat::CompactCapecJson);
                const auto r = ingest::parse_capec_catalog(ingest::load_feed(capec_src, fmt));
                print_diagnostics(r.diagnostics, "capec");
                auto out = open_out(dir / kCapecFile);
                for (const auto& c : r.records) out << capec_json(c).dump() << '\n';
                std::cout << "capecs: " << r.records.size() << " (skipped " << r.skipped << ")\n";
            }
            return 0;
        }

        if (cskg_export->parsed()) {
            const auto graph = graph_from(dir);
            for (const auto& d : graph.diagnostics()) std::cerr << "dangling: " << d.from << " -> " << d.to << '\n';
            const auto text = cskg::export_json(graph).dump(2);
            if (cskg_out.empty()) std::cout << text << '\n';
            else open_out(cskg_out) << text << '\n';
            return 0;
        }

        if (cvss_score->parsed()) {
            const auto v = cvss::parse_vector(vector_text);
            const auto s = cvss::score_vector(v);
            const auto fmt = [](double x) {
                std::ostringstream o;
                o << std::fixed << std::setprecision(1) << x;
                return o.str();
            };
            if (cvss_json) {
                json j = {{"vector", cvss::serialize_vector(v)}, {"base", s.base}, {"temporal", nullptr},
                          {"environmental", nullptr}};
                if (s.temporal) j["temporal"] = *s.temporal;
                if (s.environmental) j["environmental"] = *s.environmental;
                std::cout << j.dump() << '\n';
            } else {
                std::cout << "Base: " << fmt(s.base) << '\n'
                          << "Temporal: " << (s.temporal ? fmt(*s.temporal) : "-") << '\n'
                          << "Environmental: " << (s.environmental ? fmt(*s.environmental) : "-") << '\n';
            }
            return 0;
        }

        if (cvss_describe->parsed()) {
            const auto v = cvss::parse_vector(vector_text);
            auto parts = parse_parts(parts_spec);
            if (parts_spec.empty()) {
                parts.temporal = v.metrics.has_group(cvss::Group::Temporal);
                parts.environmental = v.metrics.has_group(cvss::Group::Environmental);
            }
            std::cout << cvss::describe_vector(v, parts) << '\n';
            return 0;
        }

        if (load_cmd->parsed()) {
            catalog::Store store(dir);
            std::optional<std::ifstream> a, n;
            if (!assets_file.empty()) a = open_in(assets_file);
            if (!notifications_file.empty()) n = open_in(notifications_file);
            auto counts = store.import_jsonl(a ? &*a : nullptr, n ? &*n : nullptr, nullptr);
            std::size_t enriched = 0;
            if (!no_enrich) {
                const auto graph = graph_from(dir);
                if (!graph.empty()) {
                    for (auto notification : store.list_notifications()) {
                        if (notification.enrichment || notification.cve_ids.empty()) continue;
                        notification.enrichment = cskg::enrich_notification(graph, notification.cve_ids);
                        store.upsert_notification(std::move(notification));
                        ++enriched;
                    }
                }
            }
            if (!evaluations_file.empty()) {
                auto e = open_in(evaluations_file);
                counts.evaluations = store.import_jsonl(nullptr, nullptr, &e).evaluations;
            }
            std::cout << "assets: " << counts.assets << "\nnotifications: " << counts.notifications
                      << " (enriched " << enriched << ")\nevaluations: " << counts.evaluations << '\n';
            return 0;
        }

        if (corpus_build->parsed()) {
            const auto ratios = promptgen::parse_split(split);
            const auto names = split_names(ratios.size());
            std::unique_ptr<promptgen::Tokenizer> tokenizer =
                vocab_file.empty() ? promptgen::make_default_tokenizer()
                                   : std::make_unique<promptgen::VocabTokenizer>(promptgen::VocabTokenizer::load(vocab_file));
            const fs::path out_dir(corpus_out);

            // DAPT documents from the CVE catalog.
            const auto catalogs = load_catalogs(dir);
            const auto dapt_parts = promptgen::split_indices(catalogs.cves.size(), ratios, seed);
            for (std::size_t s = 0; s < names.size(); ++s) {
                auto out = open_out(out_dir / ("dapt_" + names[s] + ".jsonl"));
                for (auto i : dapt_parts[s])
                    out << json{{"text", promptgen::build_dapt_document(catalogs.cves[i])}}.dump() << '\n';
            }

            // SFT entries, split per evaluation so an evaluation's four
            // entries stay together.
            catalog::Store store(dir);
            std::vector<catalog::Evaluation> evaluations;
            if (!gold_file.empty()) {
                for (const auto& j : read_jsonl(gold_file)) evaluations.push_back(catalog::evaluation_from_json(j));
            } else {
                for (auto& e : store.list_evaluations())
                    if (e.provenance != catalog::Provenance::AiDraft) evaluations.push_back(std::move(e));
            }
            std::sort(evaluations.begin(), evaluations.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
            std::vector<std::vector<promptgen::SftEntry>> per_eval;
            std::size_t incomplete = 0, context_errors = 0, dropped = 0;
            for (const auto& e : evaluations) {
                const auto asset = store.get_asset(e.asset_id);
                const auto notification = store.get_notification(e.notification_id);
                if (!asset || !notification) {
                    ++context_errors;
                    continue;
                }
                try {
                    auto built = promptgen::build_sft_entries(e, promptgen::build_context(*asset, *notification),
                                                              *tokenizer);
                    incomplete += built.incomplete.size();
                    auto all = std::move(built.entries);
                    for (auto& x : built.incomplete) all.push_back(std::move(x));
                    auto filtered = promptgen::filter_corpus(std::move(all), max_tokens);
                    dropped += filtered.dropped.size();
                    per_eval.push_back(std::move(filtered.kept));
                } catch (const IncompleteContext& err) {
                    std::cerr << "evaluation " << e.id << ": " << err.what() << '\n';
                    ++context_errors;
                }
            }
            const auto sft_parts = promptgen::split_indices(per_eval.size(), ratios, seed);
            std::size_t written = 0;
            for (std::size_t s = 0; s < names.size(); ++s) {
                auto out = open_out(out_dir / ("sft_" + names[s] + ".jsonl"));
                for (auto i : sft_parts[s])
                    for (const auto& entry : per_eval[i]) {
                        out << promptgen::to_json(entry).dump() << '\n';
                        ++written;
                    }
            }
            std::cout << "dapt documents: " << catalogs.cves.size() << "\nsft entries: " << written
                      << " (dropped " << dropped << ", incomplete " << incomplete << ", context errors "
                      << context_errors << ")\n";
            return 0;
        }

        if (gen_cmd->parsed()) {
            catalog::Store store(dir);
            auto backend = make_backend(backend_kind, fixtures, backend_url);
            inference::DraftOptions opts;
            opts.params.temperature = temperature;
            opts.params.top_p = top_p;
            opts.params.beam_size = beam;
            std::vector<catalog::Evaluation> drafts;
            try {
                drafts = inference::generate_evaluation_drafts(*backend, store, notification_id, opts);
            } catch (const inference::PartialFailure& pf) {
                for (const auto& f : pf.run().failures)
                    std::cerr << "failed: " << f.asset_id << "/" << f.notification_id << ": " << f.error << '\n';
                drafts = pf.run().drafts;
            }
            for (const auto& e : drafts) std::cout << catalog::to_json(e).dump() << '\n';
            return 0;
        }

        if (score_cmd->parsed()) {
            std::vector<catalog::Evaluation> generated, gold;
            for (const auto& j : read_jsonl(generated_file)) generated.push_back(catalog::evaluation_from_json(j));
            for (const auto& j : read_jsonl(gold_eval_file)) gold.push_back(catalog::evaluation_from_json(j));
            const auto report = evalmetrics::evaluate_run(generated, gold, {allow_orphans});
            if (score_json) std::cout << evalmetrics::to_json(report).dump(2) << '\n';
            else std::cout << evalmetrics::format_table(report);
            return 0;
        }

        if (serve_cmd->parsed()) {
            catalog::Store store(dir);
            auto backend = make_backend(backend_kind, fixtures, backend_url);
            service::ServiceConfig cfg;
            if (!export_dir.empty()) cfg.export_dir = export_dir;
            else cfg.export_dir = dir / "exports";
            if (auto graph = graph_from(dir); !graph.empty()) cfg.graph = std::move(graph);
            if (batch_interval > 0) cfg.batch_interval = std::chrono::seconds(batch_interval);
            service::Service svc(store, *backend, std::move(cfg));
            service::ServerOptions sopts;
            if (token.empty())
                if (const char* env = std::getenv("VULNEVAL_API_TOKEN")) token = env;
            if (!token.empty()) sopts.bearer_token = token;
            service::Server server(svc, sopts);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            svc.start_timer();
            std::cerr << "listening on " << host << ":" << port << '\n';
            const bool ok = server.listen(host, port);
            svc.stop_timer();
            g_server = nullptr;
            if (!ok) {
                std::cerr << "could not listen on " << host << ":" << port << '\n';
                return 1;
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << e.kind() << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
