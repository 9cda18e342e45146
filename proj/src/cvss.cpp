#include "vulneval/cvss.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "vulneval/error.hpp"

namespace vulneval::cvss {

namespace {

constexpr ValueInfo kAttackVector[] = {
    {'N', "Network"}, {'A', "Adjacent"}, {'L', "Local"}, {'P', "Physical"}};
constexpr ValueInfo kLowHigh[] = {{'L', "Low"}, {'H', "High"}};
constexpr ValueInfo kNoneLowHigh[] = {{'N', "None"}, {'L', "Low"}, {'H', "High"}};
constexpr ValueInfo kUserInteraction[] = {{'N', "None"}, {'R', "Required"}};
constexpr ValueInfo kScope[] = {{'U', "Unchanged"}, {'C', "Changed"}};
constexpr ValueInfo kImpact[] = {{'H', "High"}, {'L', "Low"}, {'N', "None"}};
constexpr ValueInfo kExploitMaturity[] = {
    {'H', "High"}, {'F', "Functional"}, {'P', "Proof-of-Concept"}, {'U', "Unproven"}};
constexpr ValueInfo kRemediation[] = {
    {'O', "Official Fix"}, {'T', "Temporary Fix"}, {'W', "Workaround"}, {'U', "Unavailable"}};
constexpr ValueInfo kConfidence[] = {{'C', "Confirmed"}, {'R', "Reasonable"}, {'U', "Unknown"}};
constexpr ValueInfo kRequirement[] = {{'H', "High"}, {'M', "Medium"}, {'L', "Low"}};

const MetricInfo kMetrics[kMetricCount] = {
    {Metric::AV, "AV", "Attack Vector", Group::Base, kAttackVector},
    {Metric::AC, "AC", "Attack Complexity", Group::Base, kLowHigh},
    {Metric::PR, "PR", "Privileges Required", Group::Base, kNoneLowHigh},
    {Metric::UI, "UI", "User Interaction", Group::Base, kUserInteraction},
    {Metric::S, "S", "Scope", Group::Base, kScope},
    {Metric::C, "C", "Confidentiality", Group::Base, kImpact},
    {Metric::I, "I", "Integrity", Group::Base, kImpact},
    {Metric::A, "A", "Availability", Group::Base, kImpact},
    {Metric::E, "E", "Exploit Code Maturity", Group::Temporal, kExploitMaturity},
    {Metric::RL, "RL", "Remediation Level", Group::Temporal, kRemediation},
    {Metric::RC, "RC", "Report Confidence", Group::Temporal, kConfidence},
    {Metric::CR, "CR", "Confidentiality Requirement", Group::Environmental, kRequirement},
    {Metric::IR, "IR", "Integrity Requirement", Group::Environmental, kRequirement},
    {Metric::AR, "AR", "Availability Requirement", Group::Environmental, kRequirement},
    {Metric::MAV, "MAV", "Modified Attack Vector", Group::Environmental, kAttackVector},
    {Metric::MAC, "MAC", "Modified Attack Complexity", Group::Environmental, kLowHigh},
    {Metric::MPR, "MPR", "Modified Privileges Required", Group::Environmental, kNoneLowHigh},
    {Metric::MUI, "MUI", "Modified User Interaction", Group::Environmental, kUserInteraction},
    {Metric::MS, "MS", "Modified Scope", Group::Environmental, kScope},
    {Metric::MC, "MC", "Modified Confidentiality", Group::Environmental, kImpact},
    {Metric::MI, "MI", "Modified Integrity", Group::Environmental, kImpact},
    {Metric::MA, "MA", "Modified Availability", Group::Environmental, kImpact},
};

constexpr std::string_view kNotDefined = "Not Defined";

std::string_view trim(std::string_view s) noexcept {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::string_view value_name(Metric m, char letter) {
    for (const auto& v : info(m).values)
        if (v.letter == letter) return v.name;
    return {};
}

// Weights -------------------------------------------------------------------

double w_attack_vector(char c) {
    switch (c) {
        case 'N': return 0.85;
        case 'A': return 0.62;
        case 'L': return 0.55;
        default: return 0.2;  // P
    }
}
double w_attack_complexity(char c) { return c == 'L' ? 0.77 : 0.44; }
double w_privileges(char c, bool scope_changed) {
    switch (c) {
        case 'N': return 0.85;
        case 'L': return scope_changed ? 0.68 : 0.62;
        default: return scope_changed ? 0.50 : 0.27;  // H
    }
}
double w_user_interaction(char c) { return c == 'N' ? 0.85 : 0.62; }
double w_impact(char c) {
    switch (c) {
        case 'H': return 0.56;
        case 'L': return 0.22;
        default: return 0.0;
    }
}
double w_exploit_maturity(std::optional<char> c) {
    if (!c) return 1.0;
    switch (*c) {
        case 'F': return 0.97;
        case 'P': return 0.94;
        case 'U': return 0.91;
        default: return 1.0;  // H
    }
}
double w_remediation(std::optional<char> c) {
    if (!c) return 1.0;
    switch (*c) {
        case 'W': return 0.97;
        case 'T': return 0.96;
        case 'O': return 0.95;
        default: return 1.0;  // U
    }
}
double w_confidence(std::optional<char> c) {
    if (!c) return 1.0;
    switch (*c) {
        case 'R': return 0.96;
        case 'U': return 0.92;
        default: return 1.0;  // C
    }
}
double w_requirement(std::optional<char> c) {
    if (!c) return 1.0;
    switch (*c) {
        case 'H': return 1.5;
        case 'L': return 0.5;
        default: return 1.0;  // M
    }
}

char modified_or_base(const CvssVector& v, Metric modified, Metric base) {
    return v.metrics.get(modified).value_or(v[base]);
}

double base_exploitability(const CvssVector& v) {
    const bool changed = v[Metric::S] == 'C';
    return 8.22 * w_attack_vector(v[Metric::AV]) * w_attack_complexity(v[Metric::AC]) *
           w_privileges(v[Metric::PR], changed) * w_user_interaction(v[Metric::UI]);
}

double base_impact(const CvssVector& v) {
    const double iss = 1.0 - (1.0 - w_impact(v[Metric::C])) * (1.0 - w_impact(v[Metric::I])) *
                                 (1.0 - w_impact(v[Metric::A]));
    if (v[Metric::S] == 'U') return 6.42 * iss;
    return 7.52 * (iss - 0.029) - 3.25 * std::pow(iss - 0.02, 15);
}

double temporal_multiplier(const CvssVector& v) {
    return w_exploit_maturity(v.metrics.get(Metric::E)) * w_remediation(v.metrics.get(Metric::RL)) *
           w_confidence(v.metrics.get(Metric::RC));
}

}  // namespace

std::string_view to_string(Version v) noexcept { return v == Version::V3_0 ? "3.0" : "3.1"; }

std::optional<Version> version_from_string(std::string_view s) noexcept {
    if (s == "3.0") return Version::V3_0;
    if (s == "3.1") return Version::V3_1;
    return std::nullopt;
}

const MetricInfo& info(Metric m) noexcept { return kMetrics[static_cast<std::size_t>(m)]; }

std::span<const MetricInfo> all_metrics() noexcept { return kMetrics; }

std::optional<Metric> metric_from_abbrev(std::string_view abbrev) noexcept {
    for (const auto& mi : kMetrics)
        if (mi.abbrev == abbrev) return mi.metric;
    return std::nullopt;
}

bool is_legal(Metric m, char value) noexcept {
    const auto& vals = info(m).values;
    return std::any_of(vals.begin(), vals.end(), [&](const ValueInfo& v) { return v.letter == value; });
}

// MetricMap -------------------------------------------------------------------

std::optional<char> MetricMap::get(Metric m) const noexcept {
    const char c = values_[index(m)];
    if (c == '\0') return std::nullopt;
    return c;
}

void MetricMap::set(Metric m, char value) {
    const auto& mi = info(m);
    if (value == 'X' && mi.group != Group::Base) {
        erase(m);
        return;
    }
    if (!is_legal(m, value))
        throw MalformedVector(std::string(mi.abbrev) + ":" + std::string(1, value), "illegal value");
    values_[index(m)] = value;
}

bool MetricMap::empty() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](char c) { return c == '\0'; });
}

std::size_t MetricMap::size() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(values_.begin(), values_.end(), [](char c) { return c != '\0'; }));
}

bool MetricMap::has_group(Group g) const noexcept {
    for (const auto& mi : kMetrics)
        if (mi.group == g && has(mi.metric)) return true;
    return false;
}

MetricMap MetricMap::only(Group g) const {
    MetricMap out;
    for (const auto& mi : kMetrics)
        if (mi.group == g) out.values_[index(mi.metric)] = values_[index(mi.metric)];
    return out;
}

void MetricMap::overlay(const MetricMap& other) noexcept {
    for (std::size_t i = 0; i < kMetricCount; ++i)
        if (other.values_[i] != '\0') values_[i] = other.values_[i];
}

// CvssVector --------------------------------------------------------------------

char CvssVector::operator[](Metric m) const {
    const auto v = metrics.get(m);
    if (!v) throw MalformedVector(std::string(info(m).abbrev), "metric absent");
    return *v;
}

bool CvssVector::valid() const noexcept {
    for (const auto& mi : kMetrics)
        if (mi.group == Group::Base && !metrics.has(mi.metric)) return false;
    return true;
}

CvssVector make_vector(Version version, const MetricMap& metrics) {
    for (const auto& mi : kMetrics)
        if (mi.group == Group::Base && !metrics.has(mi.metric))
            throw MalformedVector(std::string(mi.abbrev), "missing base metric");
    return CvssVector{version, metrics};
}

CvssVector parse_vector(std::string_view text) {
    text = trim(text);
    const auto slash = text.find('/');
    const auto prefix = text.substr(0, slash);
    std::optional<Version> version;
    if (prefix.starts_with("CVSS:")) version = version_from_string(prefix.substr(5));
    if (!version) throw MalformedVector(std::string(prefix), "expected CVSS:3.0 or CVSS:3.1 prefix");
    if (slash == std::string_view::npos) throw MalformedVector(std::string(prefix), "no metrics");

    MetricMap metrics;
    std::array<bool, kMetricCount> seen{};
    std::string_view rest = text.substr(slash + 1);
    while (true) {
        const auto next = rest.find('/');
        const auto token = rest.substr(0, next);
        const auto colon = token.find(':');
        if (colon == std::string_view::npos || colon + 2 != token.size())
            throw MalformedVector(std::string(token), "expected <metric>:<value>");
        const auto metric = metric_from_abbrev(token.substr(0, colon));
        if (!metric) throw MalformedVector(std::string(token), "unknown metric");
        auto& flag = seen[static_cast<std::size_t>(*metric)];
        if (flag) throw MalformedVector(std::string(token), "duplicate metric");
        flag = true;
        const char value = token[colon + 1];
        if (value == 'X' && info(*metric).group == Group::Base)
            throw MalformedVector(std::string(token), "illegal value");
        if (value != 'X' && !is_legal(*metric, value))
            throw MalformedVector(std::string(token), "illegal value");
        metrics.set(*metric, value);
        if (next == std::string_view::npos) break;
        rest = rest.substr(next + 1);
    }
    return make_vector(*version, metrics);
}

std::string serialize_vector(const CvssVector& v) {
    std::string out = "CVSS:";
    out += to_string(v.version);
    for (const auto& mi : kMetrics) {
        if (const auto value = v.metrics.get(mi.metric)) {
            out += '/';
            out += mi.abbrev;
            out += ':';
            out += *value;
        }
    }
    return out;
}

// Descriptions --------------------------------------------------------------------

std::string describe(const MetricMap& m) {
    std::string out;
    for (const auto& mi : kMetrics) {
        const auto value = m.get(mi.metric);
        if (!value) continue;
        if (!out.empty()) out += ' ';
        out += mi.name;
        out += " is ";
        out += value_name(mi.metric, *value);
        out += '.';
    }
    return out;
}

std::string describe_vector(const CvssVector& v, Parts parts) {
    if (parts.temporal && !v.metrics.has_group(Group::Temporal)) throw MissingPart("temporal");
    if (parts.environmental && !v.metrics.has_group(Group::Environmental))
        throw MissingPart("environmental");
    MetricMap selected;
    if (parts.base) selected.overlay(v.metrics.only(Group::Base));
    if (parts.temporal) selected.overlay(v.metrics.only(Group::Temporal));
    if (parts.environmental) selected.overlay(v.metrics.only(Group::Environmental));
    return describe(selected);
}

MetricMap describe_to_vector(std::string_view description) {
    MetricMap out;
    std::array<bool, kMetricCount> seen{};
    std::vector<std::string> bad;

    std::size_t pos = 0;
    while (pos <= description.size()) {
        auto end = description.find('.', pos);
        if (end == std::string_view::npos) end = description.size();
        const auto sentence = trim(description.substr(pos, end - pos));
        pos = end + 1;
        if (sentence.empty()) continue;

        const auto sep = sentence.find(" is ");
        bool ok = false;
        if (sep != std::string_view::npos) {
            const auto name = trim(sentence.substr(0, sep));
            const auto value = trim(sentence.substr(sep + 4));
            for (const auto& mi : kMetrics) {
                if (mi.name != name) continue;
                auto& flag = seen[static_cast<std::size_t>(mi.metric)];
                if (flag) break;  // duplicate metric
                if (value == kNotDefined && mi.group != Group::Base) {
                    flag = ok = true;
                    break;
                }
                for (const auto& vi : mi.values) {
                    if (vi.name == value) {
                        out.set(mi.metric, vi.letter);
                        flag = ok = true;
                        break;
                    }
                }
                break;
            }
        }
        if (!ok) bad.emplace_back(sentence);
    }
    if (!bad.empty()) throw UnparsableDescription(std::move(bad));
    return out;
}

// Scoring -----------------------------------------------------------------------

double roundup(double x, Version version) noexcept {
    if (version == Version::V3_0) return std::ceil(x * 10.0) / 10.0;
    const auto scaled = static_cast<long long>(std::llround(x * 100000.0));
    if (scaled % 10000 == 0) return static_cast<double>(scaled) / 100000.0;
    return (std::floor(static_cast<double>(scaled) / 10000.0) + 1.0) / 10.0;
}

double base_score(const CvssVector& v) {
    const double impact = base_impact(v);
    if (impact <= 0.0) return 0.0;
    const double expl = base_exploitability(v);
    if (v[Metric::S] == 'U') return roundup(std::min(impact + expl, 10.0), v.version);
    return roundup(std::min(1.08 * (impact + expl), 10.0), v.version);
}

double temporal_score(const CvssVector& v) {
    return roundup(base_score(v) * temporal_multiplier(v), v.version);
}

double environmental_score(const CvssVector& v) {
    const char scope = modified_or_base(v, Metric::MS, Metric::S);
    const bool changed = scope == 'C';
    const double conf = w_requirement(v.metrics.get(Metric::CR)) *
                        w_impact(modified_or_base(v, Metric::MC, Metric::C));
    const double integ = w_requirement(v.metrics.get(Metric::IR)) *
                         w_impact(modified_or_base(v, Metric::MI, Metric::I));
    const double avail = w_requirement(v.metrics.get(Metric::AR)) *
                         w_impact(modified_or_base(v, Metric::MA, Metric::A));
    const double miss = std::min(1.0 - (1.0 - conf) * (1.0 - integ) * (1.0 - avail), 0.915);

    double impact = 0.0;
    if (!changed) {
        impact = 6.42 * miss;
    } else if (v.version == Version::V3_0) {
        impact = 7.52 * (miss - 0.029) - 3.25 * std::pow(miss - 0.02, 15);
    } else {
        impact = 7.52 * (miss - 0.029) - 3.25 * std::pow(miss * 0.9731 - 0.02, 13);
    }
    if (impact <= 0.0) return 0.0;

    const double expl = 8.22 * w_attack_vector(modified_or_base(v, Metric::MAV, Metric::AV)) *
                        w_attack_complexity(modified_or_base(v, Metric::MAC, Metric::AC)) *
                        w_privileges(modified_or_base(v, Metric::MPR, Metric::PR), changed) *
                        w_user_interaction(modified_or_base(v, Metric::MUI, Metric::UI));
    const double sum = changed ? 1.08 * (impact + expl) : impact + expl;
    const double inner = roundup(std::min(sum, 10.0), v.version);
    return roundup(inner * temporal_multiplier(v), v.version);
}

CvssScores score_vector(const CvssVector& v) {
    CvssScores s;
    s.base = base_score(v);
    s.exploitability = std::round(base_exploitability(v) * 10.0) / 10.0;
    s.impact = std::max(0.0, std::round(base_impact(v) * 10.0) / 10.0);
    if (v.metrics.has_group(Group::Temporal)) s.temporal = temporal_score(v);
    if (v.metrics.has_group(Group::Environmental)) s.environmental = environmental_score(v);
    return s;
}

}  // namespace vulneval::cvss
