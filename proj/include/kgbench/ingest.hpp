#pragma once

// File ingestion and the synthetic planted-structure generator.
//
// Formats (UTF-8, TSV, '#' lines ignored):
//   edges:     head <TAB> relation <TAB> tail <TAB> year        year: int or NA
//   features:  first line "#dim=<D>", rows  id <TAB> f1,f2,...,fD
//   negatives: head <TAB> relation <TAB> tail <TAB> tier <TAB> year
//              tier: verified (drug_protein) | hard | medium (drug_indication)

#include <cstdint>
#include <filesystem>
#include <optional>
#include <unordered_map>
#include <vector>

#include "kgbench/graph.hpp"
#include "kgbench/mat.hpp"
#include "kgbench/sampling.hpp"

namespace kgbench {

struct FeatureTable {
    EntityKind kind = EntityKind::Protein;
    std::size_t dim = 0;
    std::unordered_map<std::uint32_t, Vec> vectors;  // entity index -> vector
    std::size_t skipped_unknown = 0;                 // rows for ids not in the graph

    const Vec* find(std::uint32_t index) const {
        auto it = vectors.find(index);
        return it == vectors.end() ? nullptr : &it->second;
    }
};

struct SyntheticSpec {
    std::size_t n_drugs = 200;
    std::size_t n_proteins = 200;
    std::size_t n_indications = 200;
    std::size_t n_blocks = 4;
    double intra_block_edge_prob = 0.3;
    double noise_edge_prob = 0.01;
    int year_min = 2015;
    int year_max = 2025;
    std::uint64_t seed = 0;

    void validate() const;
};

// Block of entity `index` when `count` entities are split into contiguous blocks.
std::size_t synth_block_of(std::uint32_t index, std::size_t count, std::size_t n_blocks);

// Returns the number of unique edges added. When `expected` is set, a row
// with any other relation is a parse error.
std::size_t load_edges(const std::filesystem::path& path, KnowledgeGraph& graph,
                       std::optional<RelationId> expected = std::nullopt);

FeatureTable load_features(const std::filesystem::path& path, EntityKind kind,
                           const KnowledgeGraph& graph);

// Entities referenced only by negatives are interned (isolated nodes).
// Entries colliding with the positive set are rejected.
NegativePool load_negatives(const std::filesystem::path& path, KnowledgeGraph& graph);

void write_edges(const KnowledgeGraph& graph, const std::filesystem::path& path);
void write_negatives(const NegativePool& pool, const KnowledgeGraph& graph,
                     const std::filesystem::path& path);
void write_features(const FeatureTable& table, const KnowledgeGraph& graph,
                    const std::filesystem::path& path);

// Entities of each kind are partitioned into n_blocks communities; edges are
// sampled within blocks at intra_block_edge_prob and across blocks at
// noise_edge_prob. The pool holds cross-block non-edges: drug-protein pairs
// as verified, drug-indication pairs tiered by block distance (adjacent ->
// hard, farther -> medium). Deterministic for a fixed seed.
std::pair<KnowledgeGraph, NegativePool> generate_synthetic(const SyntheticSpec& spec);

// Block-indicator features plus Gaussian noise, for exercising the fixed
// feature pathway on synthetic graphs. dim must be >= n_blocks.
FeatureTable make_block_features(const KnowledgeGraph& graph, EntityKind kind, std::size_t dim,
                                 std::size_t n_blocks, std::uint64_t seed);

}  // namespace kgbench
