#pragma once

// Shared test utilities: random graph generation and brute-force oracles.
// Oracles are deliberately naive and independent of the library's
// implementation paths.

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "kgbench/graph.hpp"
#include "kgbench/metrics.hpp"
#include "kgbench/rng.hpp"

namespace kgtest {

using namespace kgbench;

inline std::string eid(const char* prefix, std::size_t i) {
    return std::string(prefix) + std::to_string(i);
}

struct RandomGraphSpec {
    std::size_t n_drugs = 30;
    std::size_t n_proteins = 20;
    std::size_t n_indications = 15;
    std::size_t n_edges = 120;           // attempts per relation (duplicates collapse)
    double unknown_year_prob = 0.1;
    int year_min = 1990;
    int year_max = 2030;
};

inline KnowledgeGraph random_graph(Rng& rng, const RandomGraphSpec& spec = {}) {
    KnowledgeGraph g;
    std::uniform_int_distribution<int> year(spec.year_min, spec.year_max);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto add_edges = [&](RelationId rel, const char* tail_prefix, std::size_t n_tails) {
        for (std::size_t i = 0; i < spec.n_edges; ++i) {
            std::string h = eid("d", uniform_index(rng, spec.n_drugs));
            std::string t = eid(tail_prefix, uniform_index(rng, n_tails));
            std::optional<int> y;
            if (unit(rng) >= spec.unknown_year_prob) y = year(rng);
            g.add_triple(h, rel, t, y);
        }
    };
    add_edges(kDrugProtein, "p", spec.n_proteins);
    add_edges(kDrugIndication, "i", spec.n_indications);
    return g;
}

// -------- metric oracles --------

// Average precision by explicit threshold enumeration: every distinct score
// is a threshold; AP = sum over thresholds of precision * delta-recall.
inline double ap_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::vector<double> thresholds = scores;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::size_t total_pos = 0;
    for (int l : labels) total_pos += static_cast<std::size_t>(l);
    double ap = 0.0, prev_recall = 0.0;
    for (double tau : thresholds) {
        std::size_t tp = 0, predicted = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= tau) {
                ++predicted;
                tp += static_cast<std::size_t>(labels[i]);
            }
        }
        double precision = static_cast<double>(tp) / static_cast<double>(predicted);
        double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        ap += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    return ap;
}

// ROC-AUC by exhaustive pairwise comparison, ties counted one half.
inline double auc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

// Filtered rank by full enumeration and sort.
inline double filtered_rank_oracle(const TripleScorer& scorer, const Triple& test,
                                   const KnowledgeGraph& graph, RankSide side = RankSide::Tail) {
    const RelationDef& def = graph.relation(test.relation);
    const bool tail_side = side == RankSide::Tail;
    const EntityKind kind = tail_side ? def.tail_kind : def.head_kind;
    const std::uint32_t true_index = tail_side ? test.tail.index : test.head.index;
    std::vector<std::pair<double, bool>> entries;  // (score, is_true)
    for (std::uint32_t c = 0; c < graph.entity_count(kind); ++c) {
        Triple cand = test;
        (tail_side ? cand.tail : cand.head) = EntityId{kind, c};
        bool is_true = c == true_index;
        if (!is_true && graph.is_positive(cand.head, cand.relation, cand.tail)) continue;
        entries.emplace_back(scorer(cand), is_true);
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    double true_score = 0.0;
    for (const auto& [s, is_true] : entries)
        if (is_true) true_score = s;
    std::size_t first = 0, last = 0;
    for (std::size_t i = 0, rank = 0; i < entries.size(); ++i) {
        ++rank;
        if (entries[i].first == true_score) {
            if (first == 0) first = rank;
            last = rank;
        }
    }
    return 0.5 * static_cast<double>(first + last);
}

}  // namespace kgtest
