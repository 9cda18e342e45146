#pragma once

// CVSS v3.0 / v3.1 vector engine: parsing, canonical serialization, the
// "<Metric Name> is <Value Name>." template descriptions used in prompts, and
// the FIRST base/temporal/environmental equations.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace vulneval::cvss {

enum class Version : std::uint8_t { V3_0, V3_1 };

std::string_view to_string(Version v) noexcept;
std::optional<Version> version_from_string(std::string_view s) noexcept;

// Canonical FIRST order. The numeric value is the index into MetricMap.
enum class Metric : std::uint8_t {
    AV, AC, PR, UI, S, C, I, A,
    E, RL, RC,
    CR, IR, AR, MAV, MAC, MPR, MUI, MS, MC, MI, MA,
};
inline constexpr std::size_t kMetricCount = 22;

enum class Group : std::uint8_t { Base, Temporal, Environmental };

struct ValueInfo {
    char letter;
    std::string_view name;
};

struct MetricInfo {
    Metric metric;
    std::string_view abbrev;
    std::string_view name;
    Group group;
    std::span<const ValueInfo> values;  // legal letters excluding 'X'
};

const MetricInfo& info(Metric m) noexcept;
std::span<const MetricInfo> all_metrics() noexcept;
std::optional<Metric> metric_from_abbrev(std::string_view abbrev) noexcept;
bool is_legal(Metric m, char value) noexcept;

// A partial assignment of metric values. Absent metrics (including the FIRST
// "X"/Not Defined value) hold no value.
class MetricMap {
public:
    std::optional<char> get(Metric m) const noexcept;
    bool has(Metric m) const noexcept { return values_[index(m)] != '\0'; }
    // Throws MalformedVector when `value` is not legal for `m`. 'X' erases.
    void set(Metric m, char value);
    void erase(Metric m) noexcept { values_[index(m)] = '\0'; }

    bool empty() const noexcept;
    std::size_t size() const noexcept;
    bool has_group(Group g) const noexcept;
    MetricMap only(Group g) const;
    // Copies every metric present in `other` over this map.
    void overlay(const MetricMap& other) noexcept;

    friend bool operator==(const MetricMap&, const MetricMap&) = default;

private:
    static constexpr std::size_t index(Metric m) noexcept { return static_cast<std::size_t>(m); }
    std::array<char, kMetricCount> values_{};
};

// Complete vector: all eight base metrics present.
struct CvssVector {
    Version version = Version::V3_1;
    MetricMap metrics;

    char operator[](Metric m) const;  // base metrics only; throws for absent metrics
    bool valid() const noexcept;

    friend bool operator==(const CvssVector&, const CvssVector&) = default;
};

// Throws MalformedVector naming the offending token.
CvssVector parse_vector(std::string_view text);
std::string serialize_vector(const CvssVector& v);

// Builds a complete vector from a map, throwing MalformedVector("<abbrev>")
// for the first missing base metric.
CvssVector make_vector(Version version, const MetricMap& metrics);

struct Parts {
    bool base = false;
    bool temporal = false;
    bool environmental = false;

    static constexpr Parts all() noexcept { return {true, true, true}; }
    static constexpr Parts base_temporal() noexcept { return {true, true, false}; }
    static constexpr Parts env() noexcept { return {false, false, true}; }
};

// One "<Metric Name> is <Value Name>." sentence per present metric of the
// requested groups, canonical order, single-space joined. Throws MissingPart
// when a requested temporal/environmental group has no metric.
std::string describe_vector(const CvssVector& v, Parts parts);
// Describes every metric present in the map.
std::string describe(const MetricMap& m);

// Inverse of describe. Accepts trailing whitespace and a missing final period;
// "<Name> is Not Defined." leaves the metric absent. Throws
// UnparsableDescription listing every sentence that did not parse.
MetricMap describe_to_vector(std::string_view description);

struct CvssScores {
    double base = 0.0;
    std::optional<double> temporal;
    std::optional<double> environmental;
    double exploitability = 0.0;  // base exploitability sub-score, rounded to one decimal
    double impact = 0.0;          // base impact sub-score, rounded to one decimal (0 when negative)

    friend bool operator==(const CvssScores&, const CvssScores&) = default;
};

// Roundup as defined by the given CVSS revision.
double roundup(double x, Version version) noexcept;

double base_score(const CvssVector& v);
// These three always evaluate: absent modifiers fall back to base values / 1.0.
double temporal_score(const CvssVector& v);
double environmental_score(const CvssVector& v);

// `temporal` is set iff the vector defines a temporal metric; `environmental`
// iff it defines an environmental metric.
CvssScores score_vector(const CvssVector& v);

}  // namespace vulneval::cvss
