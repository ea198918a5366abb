#pragma once

// Typed entity/relation registries, edge storage, per-relation adjacency and
// the positive-membership oracle.
//
// Construction is single-writer; after freeze() the graph is immutable and
// safe for unrestricted concurrent reads.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgbench/errors.hpp"

namespace kgbench {

enum class EntityKind : std::uint8_t { Drug = 0, Protein = 1, Indication = 2 };
inline constexpr std::size_t kKindCount = 3;

const char* to_string(EntityKind kind);

struct EntityId {
    EntityKind kind;
    std::uint32_t index;

    friend bool operator==(const EntityId& a, const EntityId& b) {
        return a.kind == b.kind && a.index == b.index;
    }
    friend bool operator<(const EntityId& a, const EntityId& b) {
        if (a.kind != b.kind) return a.kind < b.kind;
        return a.index < b.index;
    }
};

using RelationId = std::uint32_t;
inline constexpr RelationId kDrugProtein = 0;
inline constexpr RelationId kDrugIndication = 1;

struct RelationDef {
    std::string name;
    EntityKind head_kind;
    EntityKind tail_kind;
};

// Year is a calendar year in [1900, 2100] or the unknown sentinel.
inline constexpr int kUnknownYear = -1;
inline constexpr int kMinYear = 1900;
inline constexpr int kMaxYear = 2100;
inline bool year_known(int year) { return year != kUnknownYear; }

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;
    int year = kUnknownYear;

    friend bool operator==(const Triple& a, const Triple& b) {
        return a.head == b.head && a.relation == b.relation && a.tail == b.tail &&
               a.year == b.year;
    }
};

class KnowledgeGraph {
public:
    // drug_protein and drug_indication are pre-registered with stable codes.
    KnowledgeGraph();

    RelationId register_relation(const std::string& name, EntityKind head_kind,
                                 EntityKind tail_kind);
    std::optional<RelationId> find_relation(const std::string& name) const;
    const RelationDef& relation(RelationId id) const;
    std::size_t relation_count() const { return relations_.size(); }

    // Interns external ids on first sight; a relation implies the kinds.
    // Duplicate triples collapse; conflicting known years keep the earliest.
    Triple add_triple(const std::string& head, RelationId relation, const std::string& tail,
                      std::optional<int> year);

    EntityId intern(const std::string& external_id, EntityKind kind);
    std::optional<EntityId> find_entity(const std::string& external_id) const;
    const std::string& name(EntityId id) const;

    bool is_positive(EntityId h, RelationId r, EntityId t) const;
    std::size_t degree(EntityId e, std::optional<RelationId> r = std::nullopt) const;

    const std::vector<Triple>& edges() const { return edges_; }
    std::size_t entity_count(EntityKind kind) const {
        return names_[static_cast<std::size_t>(kind)].size();
    }
    std::size_t total_entity_count() const;

    const std::vector<std::uint32_t>& tails_of(RelationId r, std::uint32_t head_index) const;
    const std::vector<std::uint32_t>& heads_of(RelationId r, std::uint32_t tail_index) const;

    // Sorts adjacency into canonical order and computes global index offsets.
    void freeze();
    bool frozen() const { return frozen_; }

    // Dense index over all entities (drugs, then proteins, then indications).
    // Valid after freeze().
    std::uint32_t global_index(EntityId id) const;
    EntityId entity_from_global(std::uint32_t g) const;

    // Order-sensitive hash of entity and relation registries; stored in
    // checkpoints to refuse loading onto a mismatched graph.
    std::uint64_t registry_hash() const;

private:
    static std::uint64_t pack(RelationId r, std::uint32_t h, std::uint32_t t) {
        return (static_cast<std::uint64_t>(r) << 56) | (static_cast<std::uint64_t>(h) << 28) |
               static_cast<std::uint64_t>(t);
    }

    struct Adjacency {
        std::vector<std::vector<std::uint32_t>> head_to_tails;
        std::vector<std::vector<std::uint32_t>> tail_to_heads;
    };

    std::array<std::vector<std::string>, kKindCount> names_;
    std::unordered_map<std::string, EntityId> by_name_;
    std::vector<RelationDef> relations_;
    std::vector<Triple> edges_;
    std::unordered_map<std::uint64_t, std::size_t> edge_by_key_;
    std::unordered_set<std::uint64_t> positives_;
    std::vector<Adjacency> adjacency_;
    std::array<std::uint32_t, kKindCount> global_offset_{0, 0, 0};
    bool frozen_ = false;
};

}  // namespace kgbench
