#pragma once

// Catalog ingestion: CVE feeds (NVD JSON 2.0 subset or the compact fixture
// schema), CWE and CAPEC catalogs (MITRE XML or compact JSON), plus the text
// cleaning applied to every description that enters the pipeline.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vulneval::ingest {

// Drops bytes that are not part of a valid UTF-8 sequence, removes URL tokens
// (scheme://... and www.-prefixed), collapses whitespace runs to one space and
// trims. Total and idempotent.
std::string clean_text(std::string_view raw);

// True when `s` is a CVE identifier: "CVE-" 4 digits "-" 4+ digits.
bool is_cve_id(std::string_view s) noexcept;

enum class Severity { Unknown, VeryLow, Low, Medium, High, VeryHigh };

// Case-, space-, '-' and '_'-insensitive; anything unrecognised is Unknown.
Severity severity_from_string(std::string_view s) noexcept;
std::string_view to_string(Severity s) noexcept;  // "Very High", ..., "Unknown"
std::string_view to_token(Severity s) noexcept;   // "VeryHigh", ..., "Unknown"

struct CveRecord {
    std::string id;
    std::string title;
    std::string description;
    std::optional<std::string> cvss_vector;
    std::optional<std::string> cvss_version;  // "2.0" | "3.0" | "3.1"
    std::vector<std::string> cwe_ids;
    std::vector<std::string> affected_versions;
    std::vector<std::string> unaffected_versions;
    std::optional<std::string> mitigations;

    friend bool operator==(const CveRecord&, const CveRecord&) = default;
};

struct CweEntry {
    std::string id;  // "CWE-N"
    std::string name;
    std::string description;
    std::vector<std::string> related_capec_ids;

    friend bool operator==(const CweEntry&, const CweEntry&) = default;
};

struct CapecEntry {
    std::string id;  // "CAPEC-N"
    std::string name;
    std::vector<std::string> prerequisites;
    Severity typical_severity = Severity::Unknown;
    std::vector<std::string> mitigations;

    friend bool operator==(const CapecEntry&, const CapecEntry&) = default;
};

enum class FeedFormat { NvdJson, CompactFixtureJson, CweXml, CapecXml, CompactCweJson, CompactCapecJson };

std::optional<FeedFormat> format_from_string(std::string_view name) noexcept;
std::string_view to_string(FeedFormat f) noexcept;

struct RawFeed {
    std::string bytes;
    FeedFormat format;
    std::optional<std::string> source_uri;
};

template <typename Record>
struct ParseResult {
    std::vector<Record> records;
    std::size_t skipped = 0;
    std::vector<std::string> diagnostics;  // one line per skipped item
};

// Throws UnsupportedFormat for a non-CVE format and MalformedFeed for input
// that is not the declared layout.
ParseResult<CveRecord> parse_cve_feed(const RawFeed& feed);
ParseResult<CweEntry> parse_cwe_catalog(const RawFeed& feed);
ParseResult<CapecEntry> parse_capec_catalog(const RawFeed& feed);

// Reads `source` from disk, or over HTTP(S) when it starts with http:// or
// https://. Throws Error("IoError") on failure.
RawFeed load_feed(const std::string& source, FeedFormat format);

// "427", "CWE-427", "cwe-427" -> "CWE-427". Empty when no digits are found.
std::string normalize_cwe_id(std::string_view s);
std::string normalize_capec_id(std::string_view s);

}  // namespace vulneval::ingest
