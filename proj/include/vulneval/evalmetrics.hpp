#pragma once

// ROUGE-L for comments, micro-F1 for the categorical fields, and the run
// report.

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vulneval/catalog.hpp"

namespace vulneval::evalmetrics {

using LabelSet = std::set<std::string>;

// Lowercased whitespace tokens.
std::vector<std::string> tokenize(std::string_view text);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// F = 2PR/(P+R) with P = LCS/|candidate|, R = LCS/|reference|; 0 when either
// side has no tokens.
double rouge_l(std::string_view candidate, std::string_view reference);

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    friend bool operator==(const Confusion&, const Confusion&) = default;
};

// Summed over instances. Throws LengthMismatch.
Confusion confusion(const std::vector<LabelSet>& predictions, const std::vector<LabelSet>& gold);

// 2TP / (2TP + FP + FN); 1.0 when there are no labels at all on either side.
double micro_f1(const Confusion& c) noexcept;
double micro_f1(const std::vector<LabelSet>& predictions, const std::vector<LabelSet>& gold);

// Environmental metrics as "MAV=N", "CR=H", ...; empty for no vector.
LabelSet vector_labels(const std::optional<cvss::CvssVector>& v);

struct MetricReport {
    double vex_category_f1 = 0;
    double vex_justification_f1 = 0;
    double vector_f1 = 0;
    double internal_rouge_l = 0;
    double customer_rouge_l = 0;

    std::size_t n_pairs = 0;
    std::size_t n_vector = 0;    // pairs where either side has a vector
    std::size_t n_internal = 0;  // pairs with a non-empty gold internal comment
    std::size_t n_customer = 0;

    std::vector<std::string> orphans;  // "generated:<asset>/<notification>" or "gold:..."
};

struct EvaluateOptions {
    bool allow_orphans = false;  // report orphans instead of throwing
};

// Pairs align by (asset_id, notification_id). Throws AlignmentFailure listing
// orphans (and duplicates) unless allowed.
MetricReport evaluate_run(const std::vector<catalog::Evaluation>& generated,
                          const std::vector<catalog::Evaluation>& gold, const EvaluateOptions& options = {});

nlohmann::json to_json(const MetricReport& r);
std::string format_table(const MetricReport& r);

}  // namespace vulneval::evalmetrics
