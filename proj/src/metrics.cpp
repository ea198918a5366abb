#include "kgbench/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "json.hpp"

#include "kgbench/errors.hpp"

namespace kgbench {

void ScoredSet::validate() const {
    if (scores.size() != labels.size())
        throw DegenerateSetError("scores and labels differ in length");
    std::size_t pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw DegenerateSetError("labels must be 0 or 1");
        pos += static_cast<std::size_t>(l);
    }
    if (pos == 0) throw DegenerateSetError("scored set has no positives");
    if (pos == labels.size()) throw DegenerateSetError("scored set has no negatives");
    for (double s : scores)
        if (!std::isfinite(s)) throw DegenerateSetError("non-finite score");
}

namespace {
// Indices sorted by descending score.
std::vector<std::size_t> order_desc(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}
}  // namespace

double pr_auc(const ScoredSet& set) {
    set.validate();
    auto idx = order_desc(set.scores);
    std::size_t total_pos = 0;
    for (int l : set.labels) total_pos += static_cast<std::size_t>(l);

    double ap = 0.0;
    std::size_t cum_pos = 0, cum_all = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        // One threshold block per distinct score.
        std::size_t j = i;
        std::size_t block_pos = 0;
        while (j < idx.size() && set.scores[idx[j]] == set.scores[idx[i]]) {
            block_pos += static_cast<std::size_t>(set.labels[idx[j]]);
            ++j;
        }
        cum_pos += block_pos;
        cum_all += j - i;
        double precision = static_cast<double>(cum_pos) / static_cast<double>(cum_all);
        double delta_recall = static_cast<double>(block_pos) / static_cast<double>(total_pos);
        ap += precision * delta_recall;
        i = j;
    }
    return ap;
}

double roc_auc(const ScoredSet& set) {
    set.validate();
    // Mid-rank formulation: AUC = (sum of positive ranks - P(P+1)/2) / (P*N).
    std::vector<std::size_t> idx(set.scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });

    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && set.scores[idx[j]] == set.scores[idx[i]]) ++j;
        double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k) {
            if (set.labels[idx[k]] == 1) {
                pos_rank_sum += mid_rank;
                ++n_pos;
            }
        }
        i = j;
    }
    std::size_t n_neg = set.labels.size() - n_pos;
    return (pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double hits_at_k(const std::vector<double>& ranks, double k) {
    if (ranks.empty()) return 0.0;
    std::size_t hits = 0;
    for (double r : ranks)
        if (r <= k) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double filtered_rank(const TripleScorer& scorer, const Triple& test, const KnowledgeGraph& graph,
                     RankSide side) {
    const RelationDef& def = graph.relation(test.relation);
    const bool tail_side = side == RankSide::Tail;
    const EntityKind cand_kind = tail_side ? def.tail_kind : def.head_kind;
    const std::uint32_t true_index = tail_side ? test.tail.index : test.head.index;
    const std::size_t n = graph.entity_count(cand_kind);

    const double true_score = scorer(test);
    std::size_t better = 0, tied = 0;
    for (std::uint32_t c = 0; c < n; ++c) {
        if (c == true_index) continue;
        Triple cand = test;
        if (tail_side)
            cand.tail = EntityId{cand_kind, c};
        else
            cand.head = EntityId{cand_kind, c};
        if (graph.is_positive(cand.head, cand.relation, cand.tail))
            continue;  // filtered: known positive other than the test triple
        double s = scorer(cand);
        if (s > true_score)
            ++better;
        else if (s == true_score)
            ++tied;
    }
    // Best tied position is better+1, worst is better+tied+1; return the mean.
    return static_cast<double>(better) + 0.5 * static_cast<double>(tied) + 1.0;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["relation"] = relation;
    j["pr_auc"] = pr_auc;
    j["roc_auc"] = roc_auc;
    nlohmann::json h;
    for (const auto& [k, v] : hits) h[std::to_string(k)] = v;
    j["hits"] = h;
    j["n_pos"] = n_pos;
    j["n_neg"] = n_neg;
    j["wall_time_s"] = wall_time_s;
    j["peak_memory_bytes"] = peak_memory_bytes;
    j["notes"] = notes;
    return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    EvalReport r;
    r.relation = j.at("relation").get<std::string>();
    r.pr_auc = j.at("pr_auc").get<double>();
    r.roc_auc = j.at("roc_auc").get<double>();
    for (auto& [k, v] : j.at("hits").items()) r.hits[std::stoi(k)] = v.get<double>();
    r.n_pos = j.at("n_pos").get<std::size_t>();
    r.n_neg = j.at("n_neg").get<std::size_t>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    r.peak_memory_bytes = j.at("peak_memory_bytes").get<std::size_t>();
    r.notes = j.at("notes").get<std::string>();
    return r;
}

std::string EvalReport::table_header() {
    return "relation           pr_auc   roc_auc  hits@1   hits@3   hits@10  n_pos  n_neg";
}

std::string EvalReport::table_row() const {
    char buf[256];
    auto hit = [&](int k) {
        auto it = hits.find(k);
        return it == hits.end() ? 0.0 : it->second;
    };
    std::snprintf(buf, sizeof(buf), "%-18s %.4f   %.4f   %.4f   %.4f   %.4f   %-6zu %-6zu",
                  relation.c_str(), pr_auc, roc_auc, hit(1), hit(3), hit(10), n_pos, n_neg);
    return buf;
}

}  // namespace kgbench
