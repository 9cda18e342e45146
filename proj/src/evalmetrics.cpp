#include "vulneval/evalmetrics.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <map>
#include <sstream>

#include "vulneval/error.hpp"

namespace vulneval::evalmetrics {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += static_cast<char>(std::tolower(c));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    // Two-row DP.
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(std::string_view candidate, std::string_view reference) {
    const auto c = tokenize(candidate);
    const auto r = tokenize(reference);
    if (c.empty() || r.empty()) return 0.0;
    const auto lcs = static_cast<double>(lcs_length(c, r));
    if (lcs == 0) return 0.0;
    const double p = lcs / static_cast<double>(c.size());
    const double rec = lcs / static_cast<double>(r.size());
    return 2 * p * rec / (p + rec);
}

Confusion confusion(const std::vector<LabelSet>& predictions, const std::vector<LabelSet>& gold) {
    if (predictions.size() != gold.size()) throw LengthMismatch(predictions.size(), gold.size());
    Confusion c;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        for (const auto& label : predictions[i]) (gold[i].contains(label) ? c.tp : c.fp)++;
        for (const auto& label : gold[i])
            if (!predictions[i].contains(label)) ++c.fn;
    }
    return c;
}

double micro_f1(const Confusion& c) noexcept {
    const auto denom = 2 * c.tp + c.fp + c.fn;
    return denom == 0 ? 1.0 : static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

double micro_f1(const std::vector<LabelSet>& predictions, const std::vector<LabelSet>& gold) {
    return micro_f1(confusion(predictions, gold));
}

LabelSet vector_labels(const std::optional<cvss::CvssVector>& v) {
    LabelSet out;
    if (!v) return out;
    for (const auto& mi : cvss::all_metrics()) {
        if (mi.group != cvss::Group::Environmental || !v->metrics.has(mi.metric)) continue;
        out.insert(std::string(mi.abbrev) + "=" + *v->metrics.get(mi.metric));
    }
    return out;
}

namespace {

using PairKey = std::pair<std::string, std::string>;

std::string describe_key(const char* side, const PairKey& k) { return std::string(side) + ":" + k.first + "/" + k.second; }

std::map<PairKey, const catalog::Evaluation*> index(const std::vector<catalog::Evaluation>& list, const char* side,
                                                    std::vector<std::string>& problems) {
    std::map<PairKey, const catalog::Evaluation*> out;
    for (const auto& e : list) {
        if (!out.emplace(PairKey{e.asset_id, e.notification_id}, &e).second)
            problems.push_back(describe_key(side, {e.asset_id, e.notification_id}) + "(duplicate)");
    }
    return out;
}

LabelSet single(std::string_view s) { return {std::string(s)}; }

}  // namespace

MetricReport evaluate_run(const std::vector<catalog::Evaluation>& generated,
                          const std::vector<catalog::Evaluation>& gold, const EvaluateOptions& options) {
    MetricReport r;
    std::vector<std::string> duplicates;
    const auto gen_by = index(generated, "generated", duplicates);
    const auto gold_by = index(gold, "gold", duplicates);

    for (const auto& [k, _] : gen_by)
        if (!gold_by.contains(k)) r.orphans.push_back(describe_key("generated", k));
    for (const auto& [k, _] : gold_by)
        if (!gen_by.contains(k)) r.orphans.push_back(describe_key("gold", k));
    r.orphans.insert(r.orphans.end(), duplicates.begin(), duplicates.end());
    if (!r.orphans.empty() && !options.allow_orphans) throw AlignmentFailure(r.orphans);

    std::vector<LabelSet> cat_p, cat_g, just_p, just_g, vec_p, vec_g;
    double internal_sum = 0, customer_sum = 0;
    // Map iteration gives a deterministic pair order regardless of input order.
    for (const auto& [k, g] : gold_by) {
        const auto it = gen_by.find(k);
        if (it == gen_by.end()) continue;
        const auto& p = *it->second;
        ++r.n_pairs;
        cat_p.push_back(single(catalog::to_string(p.vex_category)));
        cat_g.push_back(single(catalog::to_string(g->vex_category)));
        just_p.push_back(single(catalog::to_string(p.vex_justification)));
        just_g.push_back(single(catalog::to_string(g->vex_justification)));
        vec_p.push_back(vector_labels(p.environmental_vector));
        vec_g.push_back(vector_labels(g->environmental_vector));
        if (p.environmental_vector || g->environmental_vector) ++r.n_vector;
        if (!tokenize(g->internal_comment).empty()) {
            ++r.n_internal;
            internal_sum += rouge_l(p.internal_comment, g->internal_comment);
        }
        if (!tokenize(g->customer_comment).empty()) {
            ++r.n_customer;
            customer_sum += rouge_l(p.customer_comment, g->customer_comment);
        }
    }
    r.vex_category_f1 = micro_f1(cat_p, cat_g);
    r.vex_justification_f1 = micro_f1(just_p, just_g);
    r.vector_f1 = micro_f1(vec_p, vec_g);
    r.internal_rouge_l = r.n_internal ? internal_sum / static_cast<double>(r.n_internal) : 1.0;
    r.customer_rouge_l = r.n_customer ? customer_sum / static_cast<double>(r.n_customer) : 1.0;
    return r;
}

nlohmann::json to_json(const MetricReport& r) {
    return {{"vex_category_f1", r.vex_category_f1},
            {"vex_justification_f1", r.vex_justification_f1},
            {"vector_f1", r.vector_f1},
            {"internal_rouge_l", r.internal_rouge_l},
            {"customer_rouge_l", r.customer_rouge_l},
            {"counts",
             {{"pairs", r.n_pairs}, {"vector", r.n_vector}, {"internal", r.n_internal}, {"customer", r.n_customer}}},
            {"orphans", r.orphans}};
}

std::string format_table(const MetricReport& r) {
    struct Row {
        const char* type;
        const char* metric;
        double score;
        std::size_t n;
    };
    const Row rows[] = {
        {"VEXCategory", "micro-F1", r.vex_category_f1, r.n_pairs},
        {"VEXJustification", "micro-F1", r.vex_justification_f1, r.n_pairs},
        {"Vector", "micro-F1", r.vector_f1, r.n_vector},
        {"Internal Comment", "ROUGE-L", r.internal_rouge_l, r.n_internal},
        {"Customer Comment", "ROUGE-L", r.customer_rouge_l, r.n_customer},
    };
    std::ostringstream out;
    out << std::left << std::setw(18) << "Evaluation type" << std::setw(10) << "Metric" << std::right << std::setw(7)
        << "Score" << std::setw(8) << "N" << '\n';
    out << std::string(43, '-') << '\n';
    for (const auto& row : rows) {
        out << std::left << std::setw(18) << row.type << std::setw(10) << row.metric << std::right << std::fixed
            << std::setprecision(2) << std::setw(7) << row.score << std::setw(8) << row.n << '\n';
    }
    if (!r.orphans.empty()) out << "unaligned pairs: " << r.orphans.size() << '\n';
    return out.str();
}

}  // namespace vulneval::evalmetrics
