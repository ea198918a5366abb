#pragma once

// Classification and ranking metrics: average precision, ROC-AUC
// (Mann-Whitney with half-credit ties), Hits@k, filtered entity ranking.
// All functions are pure; filtered_rank parallelizes freely over test triples.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kgbench/graph.hpp"

namespace kgbench {

struct ScoredSet {
    std::vector<double> scores;
    std::vector<int> labels;  // 0 or 1, aligned with scores

    void validate() const;
};

// Average precision: step-interpolated integral of the precision-recall
// curve, equal scores grouped into one threshold block.
double pr_auc(const ScoredSet& set);

// Probability that a random positive outscores a random negative, ties 1/2.
double roc_auc(const ScoredSet& set);

// Fraction of ranks <= k. Ranks may be fractional (mean-tie convention).
double hits_at_k(const std::vector<double>& ranks, double k);

enum class RankSide { Head, Tail };

using TripleScorer = std::function<double(const Triple&)>;

// Rank of the true entity among all type-valid candidates after removing
// every candidate that forms a known positive other than the test triple
// itself. Ties resolve to the mean of best and worst tied positions.
double filtered_rank(const TripleScorer& scorer, const Triple& test, const KnowledgeGraph& graph,
                     RankSide side = RankSide::Tail);

struct EvalReport {
    std::string relation;
    double pr_auc = 0.0;
    double roc_auc = 0.0;
    std::map<int, double> hits;  // k -> fraction
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    double wall_time_s = 0.0;
    std::size_t peak_memory_bytes = 0;
    std::string notes;

    std::string to_json() const;
    static EvalReport from_json(const std::string& text);
    // Fixed-width single line for the human-readable table.
    std::string table_row() const;
    static std::string table_header();
};

}  // namespace kgbench
