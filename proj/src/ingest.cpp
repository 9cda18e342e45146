#include "vulneval/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

#include "vulneval/error.hpp"
#include "vulneval/net.hpp"

namespace vulneval::ingest {

namespace {

using nlohmann::json;
namespace pt = boost::property_tree;

// Length of the valid UTF-8 sequence starting at s[i], or 0 if s[i] does not
// start one (RFC 3629: no overlongs, no surrogates, nothing above U+10FFFF).
std::size_t utf8_sequence_length(std::string_view s, std::size_t i) noexcept {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char b0 = byte(i);
    if (b0 < 0x80) return 1;
    std::size_t len = 0;
    unsigned char lo = 0x80, hi = 0xBF;
    if (b0 >= 0xC2 && b0 <= 0xDF) {
        len = 2;
    } else if (b0 >= 0xE0 && b0 <= 0xEF) {
        len = 3;
        if (b0 == 0xE0) lo = 0xA0;
        if (b0 == 0xED) hi = 0x9F;
    } else if (b0 >= 0xF0 && b0 <= 0xF4) {
        len = 4;
        if (b0 == 0xF0) lo = 0x90;
        if (b0 == 0xF4) hi = 0x8F;
    } else {
        return 0;
    }
    if (i + len > s.size()) return 0;
    if (byte(i + 1) < lo || byte(i + 1) > hi) return 0;
    for (std::size_t k = 2; k < len; ++k)
        if (byte(i + k) < 0x80 || byte(i + k) > 0xBF) return 0;
    return len;
}

std::string drop_invalid_utf8(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto len = utf8_sequence_length(s, i);
        if (len == 0) {
            ++i;
            continue;
        }
        out.append(s.substr(i, len));
        i += len;
    }
    return out;
}

bool is_alnum(char c) noexcept { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) noexcept { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_scheme_char(char c) noexcept { return is_alnum(c) || c == '+' || c == '.' || c == '-'; }

bool www_at(std::string_view token, std::size_t p) noexcept {
    if (token.size() - p < 4) return false;
    const auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
    return lower(token[p]) == 'w' && lower(token[p + 1]) == 'w' && lower(token[p + 2]) == 'w' &&
           token[p + 3] == '.';
}

// Keeps the token prefix before the first URL. A scheme URL starts at the
// scheme-character run ahead of the first "://"; "www." must start a word.
std::string_view strip_url(std::string_view token) noexcept {
    std::size_t cut = token.size();
    if (const auto sep = token.find("://"); sep != std::string_view::npos) {
        cut = sep;
        while (cut > 0 && is_scheme_char(token[cut - 1])) --cut;
    }
    for (std::size_t p = 0; p < cut; ++p) {
        if (p > 0 && is_alnum(token[p - 1])) continue;
        if (www_at(token, p)) return token.substr(0, p);
    }
    return token.substr(0, cut);
}

std::string lower_alnum(std::string_view s) {
    std::string out;
    for (char c : s)
        if (is_alnum(c)) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string normalize_prefixed_id(std::string_view s, std::string_view prefix) {
    std::string digits;
    for (char c : s)
        if (std::isdigit(static_cast<unsigned char>(c))) digits += c;
    if (digits.empty()) return {};
    // Reject identifiers that carry some other prefix (e.g. "NVD-CWE-Other").
    std::string head;
    for (char c : s) {
        if (std::isdigit(static_cast<unsigned char>(c))) break;
        if (is_alpha(c)) head += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    if (!head.empty() && head != prefix) return {};
    const auto first = digits.find_first_not_of('0');
    digits = first == std::string::npos ? "0" : digits.substr(first);
    return std::string(prefix) + "-" + digits;
}

std::string trimmed(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// JSON helpers ---------------------------------------------------------------

json parse_json(const RawFeed& feed) {
    try {
        return json::parse(feed.bytes);
    } catch (const json::parse_error& e) {
        throw MalformedFeed(std::string("JSON syntax error: ") + e.what(), e.byte);
    }
}

std::string str_field(const json& item, const char* key) {
    const auto it = item.find(key);
    if (it == item.end() || it->is_null()) return {};
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number()) return it->dump();
    throw json::type_error::create(302, std::string("field '") + key + "' must be a string", &item);
}

std::vector<std::string> str_list(const json& item, const char* key) {
    std::vector<std::string> out;
    const auto it = item.find(key);
    if (it == item.end() || it->is_null()) return out;
    if (it->is_string()) {
        out.push_back(it->get<std::string>());
        return out;
    }
    if (!it->is_array())
        throw json::type_error::create(302, std::string("field '") + key + "' must be a list", &item);
    for (const auto& v : *it) {
        if (v.is_string()) out.push_back(v.get<std::string>());
        else if (v.is_number()) out.push_back(v.dump());
        else throw json::type_error::create(302, std::string("field '") + key + "' must hold strings", &item);
    }
    return out;
}

const json& root_array(const json& doc, const char* key) {
    if (!doc.is_object()) throw MalformedFeed("expected a JSON object at the top level", 0);
    const auto it = doc.find(key);
    if (it == doc.end() || !it->is_array())
        throw MalformedFeed(std::string("expected top-level array '") + key + "'", 0);
    return *it;
}

std::optional<std::string> version_of_vector(std::string_view vector) {
    if (vector.starts_with("CVSS:3.1/")) return "3.1";
    if (vector.starts_with("CVSS:3.0/")) return "3.0";
    if (vector.starts_with("CVSS:2.0/") || vector.starts_with("AV:") || vector.starts_with("(AV:"))
        return "2.0";
    return std::nullopt;
}

void push_unique(std::vector<std::string>& v, std::string s) {
    if (!s.empty() && std::find(v.begin(), v.end(), s) == v.end()) v.push_back(std::move(s));
}

// Returns an explanation when the record breaks a CveRecord invariant.
std::optional<std::string> finish_cve(CveRecord& rec) {
    if (rec.id.empty()) return "missing id";
    if (!is_cve_id(rec.id)) return "invalid CVE id '" + rec.id + "'";
    if (rec.description.empty()) return rec.id + ": empty description";
    if (rec.cvss_vector && !rec.cvss_version) {
        rec.cvss_version = version_of_vector(*rec.cvss_vector);
        if (!rec.cvss_version) return rec.id + ": cannot determine CVSS version of '" + *rec.cvss_vector + "'";
    }
    return std::nullopt;
}

CveRecord compact_cve(const json& item) {
    CveRecord rec;
    rec.id = trimmed(str_field(item, "id"));
    rec.title = clean_text(str_field(item, "title"));
    rec.description = clean_text(str_field(item, "description"));
    if (auto v = trimmed(str_field(item, "vector")); !v.empty()) rec.cvss_vector = v;
    if (auto v = trimmed(str_field(item, "version")); !v.empty()) rec.cvss_version = v;
    for (auto& c : str_list(item, "cwe_ids")) push_unique(rec.cwe_ids, normalize_cwe_id(c));
    for (auto& a : str_list(item, "affected")) rec.affected_versions.push_back(trimmed(a));
    for (auto& a : str_list(item, "unaffected")) rec.unaffected_versions.push_back(trimmed(a));
    if (auto m = clean_text(str_field(item, "mitigations")); !m.empty()) rec.mitigations = m;
    return rec;
}

std::string cpe_match_text(const json& m) {
    std::string out = str_field(m, "criteria");
    const std::pair<const char*, const char*> bounds[] = {
        {"versionStartIncluding", ">="}, {"versionStartExcluding", ">"},
        {"versionEndIncluding", "<="}, {"versionEndExcluding", "<"}};
    std::string range;
    for (const auto& [key, op] : bounds) {
        const auto v = str_field(m, key);
        if (v.empty()) continue;
        if (!range.empty()) range += ", ";
        range += std::string(op) + " " + v;
    }
    if (!range.empty()) out += " (" + range + ")";
    return out;
}

CveRecord nvd_cve(const json& wrapper) {
    const json& cve = wrapper.contains("cve") ? wrapper.at("cve") : wrapper;
    if (!cve.is_object()) throw json::type_error::create(302, "vulnerability item must be an object", &cve);
    CveRecord rec;
    rec.id = trimmed(str_field(cve, "id"));
    rec.title = clean_text(str_field(cve, "cisaVulnerabilityName"));

    if (const auto it = cve.find("descriptions"); it != cve.end() && it->is_array()) {
        std::string chosen;
        for (const auto& d : *it) {
            if (!d.is_object()) continue;
            if (str_field(d, "lang") == "en") {
                chosen = str_field(d, "value");
                break;
            }
            if (chosen.empty()) chosen = str_field(d, "value");
        }
        rec.description = clean_text(chosen);
    }

    if (const auto it = cve.find("metrics"); it != cve.end() && it->is_object()) {
        for (const char* key : {"cvssMetricV31", "cvssMetricV30", "cvssMetricV2"}) {
            const auto m = it->find(key);
            if (m == it->end() || !m->is_array() || m->empty()) continue;
            const auto& first = m->front();
            if (!first.is_object() || !first.contains("cvssData")) continue;
            const auto& data = first.at("cvssData");
            if (auto v = trimmed(str_field(data, "vectorString")); !v.empty()) rec.cvss_vector = v;
            if (auto v = trimmed(str_field(data, "version")); !v.empty()) rec.cvss_version = v;
            break;
        }
    }

    if (const auto it = cve.find("weaknesses"); it != cve.end() && it->is_array()) {
        for (const auto& w : *it) {
            if (!w.is_object()) continue;
            const auto d = w.find("description");
            if (d == w.end() || !d->is_array()) continue;
            for (const auto& entry : *d)
                if (entry.is_object()) push_unique(rec.cwe_ids, normalize_cwe_id(str_field(entry, "value")));
        }
    }

    if (const auto it = cve.find("configurations"); it != cve.end() && it->is_array()) {
        for (const auto& config : *it) {
            if (!config.is_object() || !config.contains("nodes") || !config.at("nodes").is_array()) continue;
            for (const auto& node : config.at("nodes")) {
                if (!node.is_object() || !node.contains("cpeMatch") || !node.at("cpeMatch").is_array()) continue;
                for (const auto& m : node.at("cpeMatch")) {
                    if (!m.is_object()) continue;
                    const bool vulnerable = m.value("vulnerable", true);
                    auto text = cpe_match_text(m);
                    if (text.empty()) continue;
                    (vulnerable ? rec.affected_versions : rec.unaffected_versions).push_back(std::move(text));
                }
            }
        }
    }

    if (auto m = clean_text(str_field(cve, "evaluatorSolution")); !m.empty()) rec.mitigations = m;
    return rec;
}

template <typename Record, typename Convert, typename Finish>
ParseResult<Record> parse_items(const json& items, Convert convert, Finish finish) {
    ParseResult<Record> out;
    std::size_t index = 0;
    for (const auto& item : items) {
        try {
            if (!item.is_object()) throw json::type_error::create(302, "item must be an object", &item);
            Record rec = convert(item);
            if (auto why = finish(rec)) {
                ++out.skipped;
                out.diagnostics.push_back("item " + std::to_string(index) + ": " + *why);
            } else {
                out.records.push_back(std::move(rec));
            }
        } catch (const json::exception& e) {
            throw MalformedFeed(std::string("item has unexpected shape: ") + e.what(), index, "item");
        }
        ++index;
    }
    return out;
}

// XML helpers ---------------------------------------------------------------

std::string_view local_name(std::string_view key) noexcept {
    const auto colon = key.rfind(':');
    return colon == std::string_view::npos ? key : key.substr(colon + 1);
}

pt::ptree parse_xml(const RawFeed& feed) {
    pt::ptree tree;
    std::istringstream in(feed.bytes);
    try {
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        throw MalformedFeed("XML syntax error: " + e.message(), e.line(), "line");
    } catch (const std::exception& e) {
        throw MalformedFeed(std::string("XML syntax error: ") + e.what(), 0, "line");
    }
    return tree;
}

void collect_text(const pt::ptree& node, std::string& out) {
    out += ' ';
    out += node.data();
    for (const auto& [key, child] : node) {
        if (key == "<xmlattr>" || key == "<xmlcomment>") continue;
        collect_text(child, out);
    }
}

std::string element_text(const pt::ptree& node) {
    std::string raw;
    collect_text(node, raw);
    return clean_text(raw);
}

std::string attr(const pt::ptree& node, const char* name) {
    const auto attrs = node.get_child_optional("<xmlattr>");
    if (!attrs) return {};
    for (const auto& [key, value] : *attrs)
        if (local_name(key) == name) return value.data();
    return {};
}

const pt::ptree* child(const pt::ptree& node, std::string_view name) {
    for (const auto& [key, c] : node)
        if (local_name(key) == name) return &c;
    return nullptr;
}

// Every element named `item` that sits directly under an element named
// `container`, anywhere in the tree.
void find_items(const pt::ptree& node, std::string_view container, std::string_view item,
                std::vector<const pt::ptree*>& out) {
    for (const auto& [key, c] : node) {
        if (key == "<xmlattr>" || key == "<xmlcomment>") continue;
        if (local_name(key) == container) {
            for (const auto& [k2, c2] : c)
                if (local_name(k2) == item) out.push_back(&c2);
        } else {
            find_items(c, container, item, out);
        }
    }
}

std::vector<std::string> child_texts(const pt::ptree& node, std::string_view container, std::string_view item) {
    std::vector<std::string> out;
    const auto* c = child(node, container);
    if (!c) return out;
    for (const auto& [key, e] : *c)
        if (local_name(key) == item)
            if (auto t = element_text(e); !t.empty()) out.push_back(std::move(t));
    return out;
}

template <typename Entry>
void accept_unique(ParseResult<Entry>& out, std::set<std::string>& seen, Entry entry, std::size_t index) {
    if (entry.id.empty()) {
        ++out.skipped;
        out.diagnostics.push_back("item " + std::to_string(index) + ": missing id");
    } else if (!seen.insert(entry.id).second) {
        ++out.skipped;
        out.diagnostics.push_back("item " + std::to_string(index) + ": duplicate id " + entry.id);
    } else {
        out.records.push_back(std::move(entry));
    }
}

std::vector<std::string> cleaned(std::vector<std::string> items) {
    std::vector<std::string> out;
    for (auto& s : items)
        if (auto c = clean_text(s); !c.empty()) out.push_back(std::move(c));
    return out;
}

}  // namespace

// Text ---------------------------------------------------------------------------

std::string clean_text(std::string_view raw) {
    const std::string valid = drop_invalid_utf8(raw);
    std::string out;
    out.reserve(valid.size());
    std::size_t i = 0;
    while (i < valid.size()) {
        while (i < valid.size() && is_space(valid[i])) ++i;
        const auto start = i;
        while (i < valid.size() && !is_space(valid[i])) ++i;
        if (start == i) break;
        const auto token = strip_url(std::string_view(valid).substr(start, i - start));
        if (token.empty()) continue;
        if (!out.empty()) out += ' ';
        out += token;
    }
    return out;
}

bool is_cve_id(std::string_view s) noexcept {
    if (s.size() < 13 || !s.starts_with("CVE-") || s[8] != '-') return false;
    const auto digits = [](std::string_view d) {
        return !d.empty() && std::all_of(d.begin(), d.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    return digits(s.substr(4, 4)) && digits(s.substr(9)) && s.size() - 9 >= 4;
}

Severity severity_from_string(std::string_view s) noexcept {
    const auto key = lower_alnum(s);
    if (key == "verylow") return Severity::VeryLow;
    if (key == "low") return Severity::Low;
    if (key == "medium") return Severity::Medium;
    if (key == "high") return Severity::High;
    if (key == "veryhigh") return Severity::VeryHigh;
    return Severity::Unknown;
}

std::string_view to_string(Severity s) noexcept {
    switch (s) {
        case Severity::VeryLow: return "Very Low";
        case Severity::Low: return "Low";
        case Severity::Medium: return "Medium";
        case Severity::High: return "High";
        case Severity::VeryHigh: return "Very High";
        default: return "Unknown";
    }
}

std::string_view to_token(Severity s) noexcept {
    switch (s) {
        case Severity::VeryLow: return "VeryLow";
        case Severity::Low: return "Low";
        case Severity::Medium: return "Medium";
        case Severity::High: return "High";
        case Severity::VeryHigh: return "VeryHigh";
        default: return "Unknown";
    }
}

std::optional<FeedFormat> format_from_string(std::string_view name) noexcept {
    const auto key = lower_alnum(name);
    if (key == "nvdjson" || key == "nvd") return FeedFormat::NvdJson;
    if (key == "compactfixturejson" || key == "compact" || key == "fixture") return FeedFormat::CompactFixtureJson;
    if (key == "cwexml") return FeedFormat::CweXml;
    if (key == "capecxml") return FeedFormat::CapecXml;
    if (key == "compactcwejson") return FeedFormat::CompactCweJson;
    if (key == "compactcapecjson") return FeedFormat::CompactCapecJson;
    return std::nullopt;
}

std::string_view to_string(FeedFormat f) noexcept {
    switch (f) {
        case FeedFormat::NvdJson: return "NvdJson";
        case FeedFormat::CompactFixtureJson: return "CompactFixtureJson";
        case FeedFormat::CweXml: return "CweXml";
        case FeedFormat::CapecXml: return "CapecXml";
        case FeedFormat::CompactCweJson: return "CompactCweJson";
        default: return "CompactCapecJson";
    }
}

std::string normalize_cwe_id(std::string_view s) { return normalize_prefixed_id(s, "CWE"); }
std::string normalize_capec_id(std::string_view s) { return normalize_prefixed_id(s, "CAPEC"); }

// Parsers -----------------------------------------------------------------------

ParseResult<CveRecord> parse_cve_feed(const RawFeed& feed) {
    if (feed.format != FeedFormat::NvdJson && feed.format != FeedFormat::CompactFixtureJson)
        throw UnsupportedFormat(std::string(to_string(feed.format)) + " is not a CVE feed format");
    const json doc = parse_json(feed);
    if (feed.format == FeedFormat::CompactFixtureJson)
        return parse_items<CveRecord>(root_array(doc, "cves"), compact_cve, finish_cve);
    return parse_items<CveRecord>(root_array(doc, "vulnerabilities"), nvd_cve, finish_cve);
}

ParseResult<CweEntry> parse_cwe_catalog(const RawFeed& feed) {
    ParseResult<CweEntry> out;
    std::set<std::string> seen;
    if (feed.format == FeedFormat::CompactCweJson) {
        const json doc = parse_json(feed);
        std::size_t index = 0;
        for (const auto& item : root_array(doc, "cwes")) {
            try {
                if (!item.is_object()) throw json::type_error::create(302, "item must be an object", &item);
                CweEntry e;
                e.id = normalize_cwe_id(str_field(item, "id"));
                e.name = clean_text(str_field(item, "name"));
                e.description = clean_text(str_field(item, "description"));
                auto refs = str_list(item, "related_capec");
                for (auto& r : str_list(item, "related_capec_ids")) refs.push_back(std::move(r));
                for (auto& r : refs) push_unique(e.related_capec_ids, normalize_capec_id(r));
                accept_unique(out, seen, std::move(e), index);
            } catch (const json::exception& ex) {
                throw MalformedFeed(std::string("item has unexpected shape: ") + ex.what(), index, "item");
            }
            ++index;
        }
        return out;
    }
    if (feed.format != FeedFormat::CweXml)
        throw UnsupportedFormat(std::string(to_string(feed.format)) + " is not a CWE catalog format");

    const auto tree = parse_xml(feed);
    std::vector<const pt::ptree*> items;
    find_items(tree, "Weaknesses", "Weakness", items);
    std::size_t index = 0;
    for (const auto* w : items) {
        CweEntry e;
        e.id = normalize_cwe_id(attr(*w, "ID"));
        e.name = clean_text(attr(*w, "Name"));
        if (const auto* d = child(*w, "Description")) e.description = element_text(*d);
        if (const auto* rel = child(*w, "Related_Attack_Patterns")) {
            for (const auto& [key, r] : *rel)
                if (local_name(key) == "Related_Attack_Pattern")
                    push_unique(e.related_capec_ids, normalize_capec_id(attr(r, "CAPEC_ID")));
        }
        accept_unique(out, seen, std::move(e), index++);
    }
    return out;
}

ParseResult<CapecEntry> parse_capec_catalog(const RawFeed& feed) {
    ParseResult<CapecEntry> out;
    std::set<std::string> seen;
    if (feed.format == FeedFormat::CompactCapecJson) {
        const json doc = parse_json(feed);
        std::size_t index = 0;
        for (const auto& item : root_array(doc, "capecs")) {
            try {
                if (!item.is_object()) throw json::type_error::create(302, "item must be an object", &item);
                CapecEntry e;
                e.id = normalize_capec_id(str_field(item, "id"));
                e.name = clean_text(str_field(item, "name"));
                auto sev = str_field(item, "severity");
                if (sev.empty()) sev = str_field(item, "typical_severity");
                e.typical_severity = severity_from_string(sev);
                e.prerequisites = cleaned(str_list(item, "prerequisites"));
                e.mitigations = cleaned(str_list(item, "mitigations"));
                accept_unique(out, seen, std::move(e), index);
            } catch (const json::exception& ex) {
                throw MalformedFeed(std::string("item has unexpected shape: ") + ex.what(), index, "item");
            }
            ++index;
        }
        return out;
    }
    if (feed.format != FeedFormat::CapecXml)
        throw UnsupportedFormat(std::string(to_string(feed.format)) + " is not a CAPEC catalog format");

    const auto tree = parse_xml(feed);
    std::vector<const pt::ptree*> items;
    find_items(tree, "Attack_Patterns", "Attack_Pattern", items);
    std::size_t index = 0;
    for (const auto* a : items) {
        CapecEntry e;
        e.id = normalize_capec_id(attr(*a, "ID"));
        e.name = clean_text(attr(*a, "Name"));
        if (const auto* s = child(*a, "Typical_Severity")) e.typical_severity = severity_from_string(element_text(*s));
        e.prerequisites = child_texts(*a, "Prerequisites", "Prerequisite");
        e.mitigations = child_texts(*a, "Mitigations", "Mitigation");
        accept_unique(out, seen, std::move(e), index++);
    }
    return out;
}

RawFeed load_feed(const std::string& source, FeedFormat format) {
    RawFeed feed{{}, format, source};
    if (net::is_url(source)) {
        const auto res = net::get(source);
        if (res.status < 200 || res.status >= 300)
            throw Error("IoError", "GET " + source + " returned HTTP " + std::to_string(res.status));
        feed.bytes = res.body;
        return feed;
    }
    std::ifstream in(source, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + source);
    std::ostringstream buf;
    buf << in.rdbuf();
    feed.bytes = buf.str();
    return feed;
}

}  // namespace vulneval::ingest
