#pragma once

// Tiered verified-negative storage and the per-step dynamic mixed sampler,
// plus filtered corruption for margin-ranking training. Each sampler call
// owns its RNG state; independent samplers may run concurrently against a
// frozen graph and pool.

#include <array>
#include <cstdint>
#include <vector>

#include "kgbench/graph.hpp"
#include "kgbench/rng.hpp"

namespace kgbench {

enum class NegativeTier : std::uint8_t { Verified = 0, Hard = 1, Medium = 2, Random = 3 };
const char* to_string(NegativeTier tier);

struct NegativeEntry {
    std::uint32_t head;  // drug index
    std::uint32_t tail;  // protein or indication index, per tier
    int year = kUnknownYear;

    friend bool operator==(const NegativeEntry& a, const NegativeEntry& b) {
        return a.head == b.head && a.tail == b.tail && a.year == b.year;
    }
};

struct NegativePool {
    std::vector<NegativeEntry> verified_dp;  // drug-protein, verified inactive
    std::vector<NegativeEntry> hard_di;      // drug-indication, hard tier
    std::vector<NegativeEntry> medium_di;    // drug-indication, medium tier

    const std::vector<NegativeEntry>& tier(RelationId relation, NegativeTier t) const;
    std::vector<NegativeEntry>& tier(RelationId relation, NegativeTier t);
    std::size_t total() const { return verified_dp.size() + hard_di.size() + medium_di.size(); }
    bool empty() const { return total() == 0; }
};

struct MixSpec {
    RelationId relation = kDrugProtein;
    // Tier fractions including Random; must sum to 1 within 1e-9.
    std::vector<std::pair<NegativeTier, double>> proportions;
    std::size_t batch_size = 0;

    static MixSpec drug_protein_default(std::size_t batch_size);
    static MixSpec drug_indication_default(std::size_t batch_size);
    static MixSpec random_only(RelationId relation, std::size_t batch_size);

    void validate() const;
    double fraction(NegativeTier t) const;
};

// Entities with at least one positive training edge, per kind.
struct ActiveNodes {
    std::array<std::vector<std::uint32_t>, kKindCount> nodes;

    static ActiveNodes from_edges(const std::vector<Triple>& train_edges);
    const std::vector<std::uint32_t>& of(EntityKind kind) const {
        return nodes[static_cast<std::size_t>(kind)];
    }
};

inline constexpr int kRejectionLimit = 1000;

// Batch of exactly spec.batch_size negatives: verified/hard/medium drawn with
// replacement from the pool, the remainder sampled uniformly over active
// nodes and rejected on collision with the full positive set.
std::vector<Triple> sample_mixed(const NegativePool& pool, const KnowledgeGraph& graph,
                                 const ActiveNodes& active, const MixSpec& spec, Rng& rng);

enum class CorruptSide { Head, Tail };

// Replaces one side with a uniform draw from the type-constrained entity
// set, resampling until the result is absent from the positive set.
Triple corrupt_filtered(const Triple& triple, const KnowledgeGraph& graph, CorruptSide side,
                        Rng& rng);

}  // namespace kgbench
