#include "kgbench/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kgbench/errors.hpp"

namespace kgbench {

const char* to_string(NegativeTier tier) {
    switch (tier) {
        case NegativeTier::Verified: return "verified";
        case NegativeTier::Hard: return "hard";
        case NegativeTier::Medium: return "medium";
        case NegativeTier::Random: return "random";
    }
    return "?";
}

const std::vector<NegativeEntry>& NegativePool::tier(RelationId relation, NegativeTier t) const {
    return const_cast<NegativePool*>(this)->tier(relation, t);
}

std::vector<NegativeEntry>& NegativePool::tier(RelationId relation, NegativeTier t) {
    if (relation == kDrugProtein && t == NegativeTier::Verified) return verified_dp;
    if (relation == kDrugIndication && t == NegativeTier::Hard) return hard_di;
    if (relation == kDrugIndication && t == NegativeTier::Medium) return medium_di;
    throw IndexError(std::string("no pool tier '") + to_string(t) + "' for relation " +
                     std::to_string(relation));
}

MixSpec MixSpec::drug_protein_default(std::size_t batch_size) {
    MixSpec spec;
    spec.relation = kDrugProtein;
    spec.proportions = {{NegativeTier::Verified, 0.5}, {NegativeTier::Random, 0.5}};
    spec.batch_size = batch_size;
    return spec;
}

MixSpec MixSpec::drug_indication_default(std::size_t batch_size) {
    MixSpec spec;
    spec.relation = kDrugIndication;
    const double third = 1.0 / 3.0;
    spec.proportions = {{NegativeTier::Hard, third},
                        {NegativeTier::Medium, third},
                        {NegativeTier::Random, 1.0 - 2.0 * third}};
    spec.batch_size = batch_size;
    return spec;
}

MixSpec MixSpec::random_only(RelationId relation, std::size_t batch_size) {
    MixSpec spec;
    spec.relation = relation;
    spec.proportions = {{NegativeTier::Random, 1.0}};
    spec.batch_size = batch_size;
    return spec;
}

void MixSpec::validate() const {
    double sum = 0.0;
    for (const auto& [tier, frac] : proportions) {
        if (frac < 0.0) throw SpecError("negative tier fraction");
        sum += frac;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw SpecError("tier fractions must sum to 1");
}

double MixSpec::fraction(NegativeTier t) const {
    for (const auto& [tier, frac] : proportions)
        if (tier == t) return frac;
    return 0.0;
}

ActiveNodes ActiveNodes::from_edges(const std::vector<Triple>& train_edges) {
    std::array<std::set<std::uint32_t>, kKindCount> seen;
    for (const Triple& t : train_edges) {
        seen[static_cast<std::size_t>(t.head.kind)].insert(t.head.index);
        seen[static_cast<std::size_t>(t.tail.kind)].insert(t.tail.index);
    }
    ActiveNodes active;
    for (std::size_t k = 0; k < kKindCount; ++k)
        active.nodes[k].assign(seen[k].begin(), seen[k].end());
    return active;
}

namespace {

Triple sample_random_negative(const KnowledgeGraph& graph, const ActiveNodes& active,
                              RelationId relation, Rng& rng) {
    const RelationDef& def = graph.relation(relation);
    const auto& heads = active.of(def.head_kind);
    const auto& tails = active.of(def.tail_kind);
    if (heads.empty() || tails.empty())
        throw PoolExhaustedError("no active nodes to sample random negatives from");
    for (int attempt = 0; attempt < kRejectionLimit; ++attempt) {
        EntityId h{def.head_kind, heads[uniform_index(rng, heads.size())]};
        EntityId t{def.tail_kind, tails[uniform_index(rng, tails.size())]};
        if (!graph.is_positive(h, relation, t)) return Triple{h, relation, t, kUnknownYear};
    }
    throw RejectionOverflowError("random negative sampling exceeded " +
                                 std::to_string(kRejectionLimit) +
                                 " consecutive positive collisions");
}

}  // namespace

std::vector<Triple> sample_mixed(const NegativePool& pool, const KnowledgeGraph& graph,
                                 const ActiveNodes& active, const MixSpec& spec, Rng& rng) {
    spec.validate();
    const RelationDef& def = graph.relation(spec.relation);

    // round(fraction * batch) per pooled tier; the remainder is random.
    std::vector<std::pair<NegativeTier, std::size_t>> counts;
    std::size_t pooled = 0;
    for (const auto& [tier, frac] : spec.proportions) {
        if (tier == NegativeTier::Random) continue;
        auto n = static_cast<std::size_t>(
            std::llround(frac * static_cast<double>(spec.batch_size)));
        n = std::min(n, spec.batch_size - pooled);
        counts.emplace_back(tier, n);
        pooled += n;
    }
    const std::size_t n_random = spec.batch_size - pooled;

    std::vector<Triple> batch;
    batch.reserve(spec.batch_size);
    for (const auto& [tier, n] : counts) {
        if (n == 0) continue;
        const auto& entries = pool.tier(spec.relation, tier);
        if (entries.empty())
            throw PoolExhaustedError(std::string("negative tier '") + to_string(tier) +
                                     "' is empty but its fraction is positive");
        for (std::size_t i = 0; i < n; ++i) {
            const NegativeEntry& e = entries[uniform_index(rng, entries.size())];
            batch.push_back(Triple{EntityId{def.head_kind, e.head}, spec.relation,
                                   EntityId{def.tail_kind, e.tail}, e.year});
        }
    }
    for (std::size_t i = 0; i < n_random; ++i)
        batch.push_back(sample_random_negative(graph, active, spec.relation, rng));
    return batch;
}

Triple corrupt_filtered(const Triple& triple, const KnowledgeGraph& graph, CorruptSide side,
                        Rng& rng) {
    const RelationDef& def = graph.relation(triple.relation);
    const EntityKind kind = side == CorruptSide::Head ? def.head_kind : def.tail_kind;
    const std::size_t n = graph.entity_count(kind);
    if (n < 2) throw PoolExhaustedError("fewer than 2 entities of the corrupted kind");

    for (int attempt = 0; attempt < kRejectionLimit; ++attempt) {
        EntityId repl{kind, static_cast<std::uint32_t>(uniform_index(rng, n))};
        Triple corrupted = triple;
        if (side == CorruptSide::Head)
            corrupted.head = repl;
        else
            corrupted.tail = repl;
        corrupted.year = kUnknownYear;
        if (!graph.is_positive(corrupted.head, corrupted.relation, corrupted.tail))
            return corrupted;
    }
    throw RejectionOverflowError("filtered corruption exceeded " +
                                 std::to_string(kRejectionLimit) +
                                 " consecutive positive collisions");
}

}  // namespace kgbench
