#pragma once

// Timestamp resolution, the cutoff-year partition with cold-start relocation,
// the seeded validation/test halving, and negative-pool time splitting.
// Pure functions over a frozen graph; splits for different relations may run
// concurrently.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "kgbench/graph.hpp"
#include "kgbench/sampling.hpp"

namespace kgbench {

struct SplitConfig {
    int cutoff_year = 2022;
    int default_year = 2000;       // assigned to edges with unknown timestamps
    double val_test_ratio = 0.5;   // validation share of the surviving pool
    bool di_random_split = true;   // drug-indication edges lack reliable timestamps
    double train_ratio = 0.8;      // random-split ratios
    double val_ratio = 0.1;
    double test_ratio = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class Bucket : std::uint8_t { Train = 0, Validation = 1, Test = 2 };
const char* to_string(Bucket b);

struct SplitAudit {
    std::size_t input_edges = 0;
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
    std::size_t relocated = 0;
    bool empty_pool_warning = false;  // every candidate edge relocated
};

struct SplitResult {
    RelationId relation = kDrugProtein;
    std::vector<Triple> train;
    std::vector<Triple> validation;
    std::vector<Triple> test;
    std::vector<Triple> relocated;  // subset of train that was moved back
    SplitAudit audit;
};

// First present year in priority order, or default_year when all are absent.
int resolve_timestamp(const std::vector<std::optional<int>>& candidates, int default_year);

// Partition by cutoff year, relocate candidate edges whose head or tail has
// no training-side edge of this relation (iterated to fixpoint, coverage
// evaluated per round for order independence), then shuffle and halve the
// surviving pool into validation/test.
SplitResult temporal_split(const KnowledgeGraph& graph, RelationId relation,
                           const SplitConfig& config);

// Seeded shuffle + ratio partition, then the same relocation fixpoint.
SplitResult random_split(const KnowledgeGraph& graph, RelationId relation,
                         const SplitConfig& config);

// Entries at or before the cutoff go to the training pool, later ones to the
// test pool; tiers are preserved. Unknown years resolve to default_year.
std::pair<NegativePool, NegativePool> split_negatives(const NegativePool& pool, int cutoff_year,
                                                      int default_year);

// Manifest TSV: head, relation, tail, year, bucket, relocated flag.
void write_split_manifest(const std::filesystem::path& path, const KnowledgeGraph& graph,
                          const std::vector<SplitResult>& splits);
std::vector<SplitResult> read_split_manifest(const std::filesystem::path& path,
                                             const KnowledgeGraph& graph);

}  // namespace kgbench
