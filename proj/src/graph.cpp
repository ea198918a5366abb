#include "kgbench/graph.hpp"

#include <algorithm>

namespace kgbench {

namespace {
constexpr std::uint32_t kMaxIndex = (1u << 28) - 1;

std::uint64_t fnv1a(std::uint64_t h, const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a(std::uint64_t h, const std::string& s) {
    h = fnv1a(h, s.data(), s.size());
    return fnv1a(h, "\n", 1);
}
}  // namespace

const char* to_string(EntityKind kind) {
    switch (kind) {
        case EntityKind::Drug: return "drug";
        case EntityKind::Protein: return "protein";
        case EntityKind::Indication: return "indication";
    }
    return "?";
}

KnowledgeGraph::KnowledgeGraph() {
    register_relation("drug_protein", EntityKind::Drug, EntityKind::Protein);
    register_relation("drug_indication", EntityKind::Drug, EntityKind::Indication);
}

RelationId KnowledgeGraph::register_relation(const std::string& name, EntityKind head_kind,
                                             EntityKind tail_kind) {
    if (frozen_) throw Error("cannot register relation on a frozen graph");
    if (find_relation(name)) throw Error("relation already registered: " + name);
    relations_.push_back({name, head_kind, tail_kind});
    adjacency_.emplace_back();
    return static_cast<RelationId>(relations_.size() - 1);
}

std::optional<RelationId> KnowledgeGraph::find_relation(const std::string& name) const {
    for (std::size_t i = 0; i < relations_.size(); ++i)
        if (relations_[i].name == name) return static_cast<RelationId>(i);
    return std::nullopt;
}

const RelationDef& KnowledgeGraph::relation(RelationId id) const {
    if (id >= relations_.size()) throw IndexError("unknown relation id " + std::to_string(id));
    return relations_[id];
}

EntityId KnowledgeGraph::intern(const std::string& external_id, EntityKind kind) {
    if (external_id.empty()) throw Error("empty external entity id");
    auto it = by_name_.find(external_id);
    if (it != by_name_.end()) {
        if (it->second.kind != kind)
            throw KindConflictError("entity '" + external_id + "' already interned as " +
                                    to_string(it->second.kind) + ", requested " +
                                    to_string(kind));
        return it->second;
    }
    if (frozen_) throw Error("cannot intern new entity on a frozen graph");
    auto& names = names_[static_cast<std::size_t>(kind)];
    if (names.size() > kMaxIndex) throw Error("entity index overflow");
    EntityId id{kind, static_cast<std::uint32_t>(names.size())};
    names.push_back(external_id);
    by_name_.emplace(external_id, id);
    return id;
}

std::optional<EntityId> KnowledgeGraph::find_entity(const std::string& external_id) const {
    auto it = by_name_.find(external_id);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

const std::string& KnowledgeGraph::name(EntityId id) const {
    return names_[static_cast<std::size_t>(id.kind)].at(id.index);
}

Triple KnowledgeGraph::add_triple(const std::string& head, RelationId relation,
                                  const std::string& tail, std::optional<int> year) {
    if (frozen_) throw Error("cannot add triple to a frozen graph");
    const RelationDef& def = this->relation(relation);
    if (year && (*year < kMinYear || *year > kMaxYear))
        throw InvalidYearError("year " + std::to_string(*year) + " outside [" +
                               std::to_string(kMinYear) + ", " + std::to_string(kMaxYear) + "]");

    EntityId h = intern(head, def.head_kind);
    EntityId t = intern(tail, def.tail_kind);
    int y = year ? *year : kUnknownYear;

    std::uint64_t key = pack(relation, h.index, t.index);
    auto it = edge_by_key_.find(key);
    if (it != edge_by_key_.end()) {
        // Duplicate: keep the earliest known year.
        Triple& existing = edges_[it->second];
        if (year_known(y) && (!year_known(existing.year) || y < existing.year))
            existing.year = y;
        return existing;
    }

    Triple triple{h, relation, t, y};
    edge_by_key_.emplace(key, edges_.size());
    edges_.push_back(triple);
    positives_.insert(key);

    Adjacency& adj = adjacency_[relation];
    if (adj.head_to_tails.size() <= h.index) adj.head_to_tails.resize(h.index + 1);
    if (adj.tail_to_heads.size() <= t.index) adj.tail_to_heads.resize(t.index + 1);
    adj.head_to_tails[h.index].push_back(t.index);
    adj.tail_to_heads[t.index].push_back(h.index);
    return triple;
}

bool KnowledgeGraph::is_positive(EntityId h, RelationId r, EntityId t) const {
    if (r >= relations_.size()) return false;
    const RelationDef& def = relations_[r];
    if (h.kind != def.head_kind || t.kind != def.tail_kind) return false;
    return positives_.count(pack(r, h.index, t.index)) > 0;
}

std::size_t KnowledgeGraph::degree(EntityId e, std::optional<RelationId> r) const {
    auto one = [&](RelationId rel) -> std::size_t {
        const RelationDef& def = relations_[rel];
        const Adjacency& adj = adjacency_[rel];
        std::size_t d = 0;
        if (e.kind == def.head_kind && e.index < adj.head_to_tails.size())
            d += adj.head_to_tails[e.index].size();
        if (e.kind == def.tail_kind && e.index < adj.tail_to_heads.size())
            d += adj.tail_to_heads[e.index].size();
        return d;
    };
    if (r) {
        if (*r >= relations_.size()) return 0;
        return one(*r);
    }
    std::size_t total = 0;
    for (RelationId rel = 0; rel < relations_.size(); ++rel) total += one(rel);
    return total;
}

const std::vector<std::uint32_t>& KnowledgeGraph::tails_of(RelationId r,
                                                           std::uint32_t head_index) const {
    static const std::vector<std::uint32_t> kEmpty;
    const Adjacency& adj = adjacency_.at(r);
    if (head_index >= adj.head_to_tails.size()) return kEmpty;
    return adj.head_to_tails[head_index];
}

const std::vector<std::uint32_t>& KnowledgeGraph::heads_of(RelationId r,
                                                           std::uint32_t tail_index) const {
    static const std::vector<std::uint32_t> kEmpty;
    const Adjacency& adj = adjacency_.at(r);
    if (tail_index >= adj.tail_to_heads.size()) return kEmpty;
    return adj.tail_to_heads[tail_index];
}

void KnowledgeGraph::freeze() {
    if (frozen_) return;
    for (Adjacency& adj : adjacency_) {
        for (auto& v : adj.head_to_tails) std::sort(v.begin(), v.end());
        for (auto& v : adj.tail_to_heads) std::sort(v.begin(), v.end());
    }
    std::uint32_t off = 0;
    for (std::size_t k = 0; k < kKindCount; ++k) {
        global_offset_[k] = off;
        off += static_cast<std::uint32_t>(names_[k].size());
    }
    frozen_ = true;
}

std::size_t KnowledgeGraph::total_entity_count() const {
    std::size_t n = 0;
    for (const auto& names : names_) n += names.size();
    return n;
}

std::uint32_t KnowledgeGraph::global_index(EntityId id) const {
    if (!frozen_) throw Error("global_index requires a frozen graph");
    return global_offset_[static_cast<std::size_t>(id.kind)] + id.index;
}

EntityId KnowledgeGraph::entity_from_global(std::uint32_t g) const {
    if (!frozen_) throw Error("entity_from_global requires a frozen graph");
    for (std::size_t k = kKindCount; k-- > 0;) {
        if (g >= global_offset_[k])
            return EntityId{static_cast<EntityKind>(k),
                            g - global_offset_[k]};
    }
    throw IndexError("bad global entity index");
}

std::uint64_t KnowledgeGraph::registry_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& names : names_) {
        for (const auto& n : names) h = fnv1a(h, n);
        h = fnv1a(h, "|", 1);
    }
    for (const auto& def : relations_) {
        h = fnv1a(h, def.name);
        unsigned char kinds[2] = {static_cast<unsigned char>(def.head_kind),
                                  static_cast<unsigned char>(def.tail_kind)};
        h = fnv1a(h, kinds, 2);
    }
    return h;
}

}  // namespace kgbench
