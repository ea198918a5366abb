#include "kgbench/split.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include "kgbench/errors.hpp"
#include "kgbench/rng.hpp"

namespace kgbench {

void SplitConfig::validate() const {
    if (val_test_ratio <= 0.0 || val_test_ratio >= 1.0)
        throw SpecError("val_test_ratio must lie in (0, 1)");
    if (train_ratio < 0.0 || val_ratio < 0.0 || test_ratio < 0.0 ||
        std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
        throw SpecError("random-split ratios must be non-negative and sum to 1");
    if (cutoff_year < kMinYear || cutoff_year > kMaxYear)
        throw SpecError("cutoff_year outside the supported range");
    if (default_year < kMinYear || default_year > kMaxYear)
        throw SpecError("default_year outside the supported range");
}

const char* to_string(Bucket b) {
    switch (b) {
        case Bucket::Train: return "train";
        case Bucket::Validation: return "validation";
        case Bucket::Test: return "test";
    }
    return "?";
}

int resolve_timestamp(const std::vector<std::optional<int>>& candidates, int default_year) {
    for (const auto& c : candidates)
        if (c) return *c;
    return default_year;
}

namespace {

int resolved_year(const Triple& t, int default_year) {
    return year_known(t.year) ? t.year : default_year;
}

// Relocates pool edges whose head or tail has no training-side edge of this
// relation. Coverage is evaluated against the training set as of the start
// of each round, so the result does not depend on edge order; relocation
// only adds coverage, so the loop reaches fixpoint quickly.
std::size_t relocate_cold_start(std::vector<Triple>& train, std::vector<Triple>& pool,
                                std::vector<Triple>& relocated) {
    std::unordered_map<std::uint32_t, std::size_t> head_deg, tail_deg;
    for (const Triple& t : train) {
        ++head_deg[t.head.index];
        ++tail_deg[t.tail.index];
    }
    std::size_t moved_total = 0;
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<Triple> keep;
        std::vector<Triple> moved;
        keep.reserve(pool.size());
        for (const Triple& t : pool) {
            const bool covered = head_deg.count(t.head.index) && tail_deg.count(t.tail.index);
            (covered ? keep : moved).push_back(t);
        }
        if (!moved.empty()) {
            changed = true;
            for (const Triple& t : moved) {
                ++head_deg[t.head.index];
                ++tail_deg[t.tail.index];
                train.push_back(t);
                relocated.push_back(t);
            }
            moved_total += moved.size();
        }
        pool = std::move(keep);
    }
    return moved_total;
}

std::vector<Triple> edges_of_relation(const KnowledgeGraph& graph, RelationId relation) {
    std::vector<Triple> out;
    for (const Triple& t : graph.edges())
        if (t.relation == relation) out.push_back(t);
    return out;
}

}  // namespace

SplitResult temporal_split(const KnowledgeGraph& graph, RelationId relation,
                           const SplitConfig& config) {
    config.validate();
    SplitResult result;
    result.relation = relation;

    std::vector<Triple> pool;
    for (const Triple& t : edges_of_relation(graph, relation)) {
        if (resolved_year(t, config.default_year) <= config.cutoff_year)
            result.train.push_back(t);
        else
            pool.push_back(t);
    }
    result.audit.input_edges = result.train.size() + pool.size();
    result.audit.relocated = relocate_cold_start(result.train, pool, result.relocated);
    result.audit.empty_pool_warning = pool.empty() && result.audit.relocated > 0;

    Rng rng = derive_rng(config.seed, relation * 2 + 1);
    std::shuffle(pool.begin(), pool.end(), rng);
    auto n_val = static_cast<std::size_t>(
        std::floor(config.val_test_ratio * static_cast<double>(pool.size()) + 0.5));
    result.validation.assign(pool.begin(), pool.begin() + n_val);
    result.test.assign(pool.begin() + n_val, pool.end());

    result.audit.train = result.train.size();
    result.audit.validation = result.validation.size();
    result.audit.test = result.test.size();
    return result;
}

SplitResult random_split(const KnowledgeGraph& graph, RelationId relation,
                         const SplitConfig& config) {
    config.validate();
    SplitResult result;
    result.relation = relation;

    std::vector<Triple> edges = edges_of_relation(graph, relation);
    result.audit.input_edges = edges.size();
    Rng rng = derive_rng(config.seed, relation * 2 + 2);
    std::shuffle(edges.begin(), edges.end(), rng);

    const auto n = static_cast<double>(edges.size());
    auto train_end = static_cast<std::size_t>(std::floor(config.train_ratio * n + 0.5));
    auto val_end = static_cast<std::size_t>(
        std::floor((config.train_ratio + config.val_ratio) * n + 0.5));
    result.train.assign(edges.begin(), edges.begin() + train_end);
    result.validation.assign(edges.begin() + train_end, edges.begin() + val_end);
    result.test.assign(edges.begin() + val_end, edges.end());

    // Cold-start relocation over the combined validation/test pool, then
    // re-partition preserving each edge's original bucket.
    std::vector<Triple> pool = result.validation;
    const std::size_t val_count = pool.size();
    pool.insert(pool.end(), result.test.begin(), result.test.end());
    std::vector<std::uint8_t> was_val(pool.size(), 0);
    for (std::size_t i = 0; i < val_count; ++i) was_val[i] = 1;

    std::unordered_map<std::uint64_t, std::size_t> pos;
    for (std::size_t i = 0; i < pool.size(); ++i)
        pos[(static_cast<std::uint64_t>(pool[i].head.index) << 32) | pool[i].tail.index] = i;
    result.audit.relocated = relocate_cold_start(result.train, pool, result.relocated);

    result.validation.clear();
    result.test.clear();
    for (const Triple& t : pool) {
        std::size_t i = pos.at((static_cast<std::uint64_t>(t.head.index) << 32) | t.tail.index);
        (was_val[i] ? result.validation : result.test).push_back(t);
    }

    result.audit.train = result.train.size();
    result.audit.validation = result.validation.size();
    result.audit.test = result.test.size();
    return result;
}

std::pair<NegativePool, NegativePool> split_negatives(const NegativePool& pool, int cutoff_year,
                                                      int default_year) {
    NegativePool train_pool, test_pool;
    auto split_tier = [&](const std::vector<NegativeEntry>& entries,
                          std::vector<NegativeEntry> NegativePool::* member) {
        for (const NegativeEntry& e : entries) {
            int y = year_known(e.year) ? e.year : default_year;
            ((y <= cutoff_year ? train_pool : test_pool).*member).push_back(e);
        }
    };
    split_tier(pool.verified_dp, &NegativePool::verified_dp);
    split_tier(pool.hard_di, &NegativePool::hard_di);
    split_tier(pool.medium_di, &NegativePool::medium_di);
    return {std::move(train_pool), std::move(test_pool)};
}

void write_split_manifest(const std::filesystem::path& path, const KnowledgeGraph& graph,
                          const std::vector<SplitResult>& splits) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << "# head\trelation\ttail\tyear\tbucket\trelocated\n";
    for (const SplitResult& split : splits) {
        std::unordered_map<std::uint64_t, bool> relocated;
        for (const Triple& t : split.relocated)
            relocated[(static_cast<std::uint64_t>(t.head.index) << 32) | t.tail.index] = true;
        auto dump = [&](const std::vector<Triple>& triples, Bucket bucket) {
            for (const Triple& t : triples) {
                bool moved =
                    relocated.count((static_cast<std::uint64_t>(t.head.index) << 32) |
                                    t.tail.index) > 0;
                out << graph.name(t.head) << '\t' << graph.relation(t.relation).name << '\t'
                    << graph.name(t.tail) << '\t'
                    << (year_known(t.year) ? std::to_string(t.year) : "NA") << '\t'
                    << to_string(bucket) << '\t' << (moved ? 1 : 0) << '\n';
            }
        };
        dump(split.train, Bucket::Train);
        dump(split.validation, Bucket::Validation);
        dump(split.test, Bucket::Test);
    }
}

std::vector<SplitResult> read_split_manifest(const std::filesystem::path& path,
                                             const KnowledgeGraph& graph) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());
    const std::string path_str = path.string();
    std::map<RelationId, SplitResult> by_relation;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            std::size_t p = line.find('\t', start);
            if (p == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, p - start));
            start = p + 1;
        }
        if (fields.size() != 6) throw ParseError(path_str, line_no, "expected 6 columns");
        auto relation = graph.find_relation(fields[1]);
        if (!relation) throw ParseError(path_str, line_no, "unknown relation '" + fields[1] + "'");
        auto head = graph.find_entity(fields[0]);
        auto tail = graph.find_entity(fields[2]);
        if (!head || !tail)
            throw DataError(path_str + ":" + std::to_string(line_no) +
                            ": manifest references an entity missing from the graph");
        int year = kUnknownYear;
        if (fields[3] != "NA") {
            auto [ptr, ec] =
                std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), year);
            if (ec != std::errc()) throw ParseError(path_str, line_no, "bad year");
        }
        Triple t{*head, *relation, *tail, year};
        SplitResult& result = by_relation[*relation];
        result.relation = *relation;
        if (fields[4] == "train")
            result.train.push_back(t);
        else if (fields[4] == "validation")
            result.validation.push_back(t);
        else if (fields[4] == "test")
            result.test.push_back(t);
        else
            throw ParseError(path_str, line_no, "unknown bucket '" + fields[4] + "'");
        if (fields[5] == "1") result.relocated.push_back(t);
    }
    std::vector<SplitResult> out;
    for (auto& [rel, result] : by_relation) {
        result.audit.train = result.train.size();
        result.audit.validation = result.validation.size();
        result.audit.test = result.test.size();
        result.audit.relocated = result.relocated.size();
        result.audit.input_edges =
            result.train.size() + result.validation.size() + result.test.size();
        out.push_back(std::move(result));
    }
    return out;
}

}  // namespace kgbench
