#include "kgbench/ingest.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "kgbench/errors.hpp"
#include "kgbench/rng.hpp"

namespace kgbench {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::optional<int> parse_year_field(const std::string& field, const std::string& path,
                                    std::size_t line_no) {
    if (field == "NA") return std::nullopt;
    int year = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), year);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw ParseError(path, line_no, "bad year field '" + field + "'");
    return year;
}

double parse_double_field(const std::string& field, const std::string& path,
                          std::size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw ParseError(path, line_no, "bad float field '" + field + "'");
    if (!std::isfinite(v)) throw ParseError(path, line_no, "non-finite feature value");
    return v;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());
    return in;
}

}  // namespace

std::size_t load_edges(const std::filesystem::path& path, KnowledgeGraph& graph,
                       std::optional<RelationId> expected) {
    std::ifstream in = open_or_throw(path);
    const std::string path_str = path.string();
    std::size_t before = graph.edges().size();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_tabs(line);
        if (fields.size() != 4)
            throw ParseError(path_str, line_no,
                             "expected 4 tab-separated columns, got " +
                                 std::to_string(fields.size()));
        auto relation = graph.find_relation(fields[1]);
        if (!relation) throw ParseError(path_str, line_no, "unknown relation '" + fields[1] + "'");
        if (expected && *relation != *expected)
            throw ParseError(path_str, line_no,
                             "relation '" + fields[1] + "' does not match expected '" +
                                 graph.relation(*expected).name + "'");
        auto year = parse_year_field(fields[3], path_str, line_no);
        graph.add_triple(fields[0], *relation, fields[2], year);
    }
    return graph.edges().size() - before;
}

FeatureTable load_features(const std::filesystem::path& path, EntityKind kind,
                           const KnowledgeGraph& graph) {
    std::ifstream in = open_or_throw(path);
    const std::string path_str = path.string();
    std::string line;
    std::size_t line_no = 0;

    // Header: first non-empty line declares the dimension.
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        if (line.rfind("#dim=", 0) != 0)
            throw ParseError(path_str, line_no, "expected '#dim=<D>' header line");
        auto [ptr, ec] =
            std::from_chars(line.data() + 5, line.data() + line.size(), dim);
        if (ec != std::errc() || ptr != line.data() + line.size() || dim == 0)
            throw ParseError(path_str, line_no, "bad dimension in header");
        break;
    }
    if (dim == 0) throw ParseError(path_str, line_no, "missing '#dim=<D>' header");

    FeatureTable table;
    table.kind = kind;
    table.dim = dim;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_tabs(line);
        if (fields.size() != 2)
            throw ParseError(path_str, line_no, "expected 'id<TAB>floats' row");
        auto entity = graph.find_entity(fields[0]);
        if (!entity || entity->kind != kind) {
            ++table.skipped_unknown;
            continue;
        }
        Vec vec;
        vec.reserve(dim);
        std::size_t start = 0;
        const std::string& vals = fields[1];
        while (start <= vals.size()) {
            std::size_t pos = vals.find(',', start);
            std::string field =
                pos == std::string::npos ? vals.substr(start) : vals.substr(start, pos - start);
            vec.push_back(parse_double_field(field, path_str, line_no));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        if (vec.size() != dim)
            throw DimMismatchError(path_str + ":" + std::to_string(line_no) + ": row has " +
                                   std::to_string(vec.size()) + " values, header declares " +
                                   std::to_string(dim));
        table.vectors[entity->index] = std::move(vec);
    }
    return table;
}

NegativePool load_negatives(const std::filesystem::path& path, KnowledgeGraph& graph) {
    std::ifstream in = open_or_throw(path);
    const std::string path_str = path.string();
    NegativePool pool;
    std::set<std::pair<std::uint64_t, std::uint64_t>> seen;  // (relation, packed pair)
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_tabs(line);
        if (fields.size() != 5)
            throw ParseError(path_str, line_no,
                             "expected 5 tab-separated columns, got " +
                                 std::to_string(fields.size()));
        auto relation = graph.find_relation(fields[1]);
        if (!relation) throw ParseError(path_str, line_no, "unknown relation '" + fields[1] + "'");
        NegativeTier tier;
        if (fields[3] == "verified")
            tier = NegativeTier::Verified;
        else if (fields[3] == "hard")
            tier = NegativeTier::Hard;
        else if (fields[3] == "medium")
            tier = NegativeTier::Medium;
        else
            throw ParseError(path_str, line_no, "unknown tier '" + fields[3] + "'");
        const bool tier_ok = (*relation == kDrugProtein && tier == NegativeTier::Verified) ||
                             (*relation == kDrugIndication && (tier == NegativeTier::Hard ||
                                                               tier == NegativeTier::Medium));
        if (!tier_ok)
            throw ParseError(path_str, line_no,
                             "tier '" + fields[3] + "' not valid for relation '" + fields[1] +
                                 "'");
        auto year = parse_year_field(fields[4], path_str, line_no);

        const RelationDef& def = graph.relation(*relation);
        EntityId h = graph.intern(fields[0], def.head_kind);
        EntityId t = graph.intern(fields[2], def.tail_kind);
        if (graph.is_positive(h, *relation, t))
            throw DataError(path_str + ":" + std::to_string(line_no) +
                            ": negative entry collides with a positive edge");
        auto key = std::make_pair(static_cast<std::uint64_t>(*relation),
                                  (static_cast<std::uint64_t>(h.index) << 32) | t.index);
        if (!seen.insert(key).second) continue;  // duplicate pair, keep first tier
        pool.tier(*relation, tier)
            .push_back(NegativeEntry{h.index, t.index, year ? *year : kUnknownYear});
    }
    return pool;
}

namespace {
std::string year_field(int year) {
    return year_known(year) ? std::to_string(year) : "NA";
}
}  // namespace

void write_edges(const KnowledgeGraph& graph, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << "# head\trelation\ttail\tyear\n";
    for (const Triple& t : graph.edges()) {
        out << graph.name(t.head) << '\t' << graph.relation(t.relation).name << '\t'
            << graph.name(t.tail) << '\t' << year_field(t.year) << '\n';
    }
}

void write_negatives(const NegativePool& pool, const KnowledgeGraph& graph,
                     const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << "# head\trelation\ttail\ttier\tyear\n";
    auto dump = [&](const std::vector<NegativeEntry>& entries, RelationId rel,
                    NegativeTier tier) {
        const RelationDef& def = graph.relation(rel);
        for (const NegativeEntry& e : entries) {
            out << graph.name(EntityId{def.head_kind, e.head}) << '\t' << def.name << '\t'
                << graph.name(EntityId{def.tail_kind, e.tail}) << '\t' << to_string(tier) << '\t'
                << year_field(e.year) << '\n';
        }
    };
    dump(pool.verified_dp, kDrugProtein, NegativeTier::Verified);
    dump(pool.hard_di, kDrugIndication, NegativeTier::Hard);
    dump(pool.medium_di, kDrugIndication, NegativeTier::Medium);
}

void write_features(const FeatureTable& table, const KnowledgeGraph& graph,
                    const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << "#dim=" << table.dim << '\n';
    // Deterministic order: ascending entity index.
    std::vector<std::uint32_t> indices;
    indices.reserve(table.vectors.size());
    for (const auto& [idx, vec] : table.vectors) indices.push_back(idx);
    std::sort(indices.begin(), indices.end());
    out.precision(17);
    for (std::uint32_t idx : indices) {
        out << graph.name(EntityId{table.kind, idx}) << '\t';
        const Vec& vec = table.vectors.at(idx);
        for (std::size_t i = 0; i < vec.size(); ++i) {
            if (i) out << ',';
            out << vec[i];
        }
        out << '\n';
    }
}

void SyntheticSpec::validate() const {
    if (n_blocks == 0) throw SpecError("n_blocks must be positive");
    if (n_drugs < n_blocks || n_proteins < n_blocks || n_indications < n_blocks)
        throw SpecError("entity counts must be >= n_blocks");
    if (intra_block_edge_prob <= noise_edge_prob)
        throw SpecError("intra_block_edge_prob must exceed noise_edge_prob");
    if (intra_block_edge_prob < 0.0 || intra_block_edge_prob > 1.0 || noise_edge_prob < 0.0 ||
        noise_edge_prob > 1.0)
        throw SpecError("edge probabilities must lie in [0, 1]");
    if (year_min > year_max || year_min < kMinYear || year_max > kMaxYear)
        throw SpecError("bad year range");
}

std::size_t synth_block_of(std::uint32_t index, std::size_t count, std::size_t n_blocks) {
    return static_cast<std::size_t>(index) * n_blocks / count;
}

std::pair<KnowledgeGraph, NegativePool> generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    KnowledgeGraph graph;
    NegativePool pool;
    Rng rng(spec.seed);

    auto synth_name = [](char prefix, std::size_t i) {
        std::ostringstream os;
        os << prefix;
        os.width(4);
        os.fill('0');
        os << i;
        return os.str();
    };
    for (std::size_t i = 0; i < spec.n_drugs; ++i)
        graph.intern(synth_name('D', i), EntityKind::Drug);
    for (std::size_t i = 0; i < spec.n_proteins; ++i)
        graph.intern(synth_name('P', i), EntityKind::Protein);
    for (std::size_t i = 0; i < spec.n_indications; ++i)
        graph.intern(synth_name('I', i), EntityKind::Indication);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> year(spec.year_min, spec.year_max);

    auto sample_relation = [&](RelationId rel, std::size_t n_tails, char tail_prefix) {
        for (std::uint32_t d = 0; d < spec.n_drugs; ++d) {
            std::size_t bd = synth_block_of(d, spec.n_drugs, spec.n_blocks);
            for (std::uint32_t t = 0; t < n_tails; ++t) {
                std::size_t bt = synth_block_of(t, n_tails, spec.n_blocks);
                double p = bd == bt ? spec.intra_block_edge_prob : spec.noise_edge_prob;
                if (unit(rng) < p)
                    graph.add_triple(synth_name('D', d), rel, synth_name(tail_prefix, t),
                                     year(rng));
            }
        }
    };
    sample_relation(kDrugProtein, spec.n_proteins, 'P');
    sample_relation(kDrugIndication, spec.n_indications, 'I');

    // Verified negatives: every cross-block pair absent from the positives.
    auto collect_negatives = [&](RelationId rel, std::size_t n_tails, EntityKind tail_kind) {
        for (std::uint32_t d = 0; d < spec.n_drugs; ++d) {
            std::size_t bd = synth_block_of(d, spec.n_drugs, spec.n_blocks);
            for (std::uint32_t t = 0; t < n_tails; ++t) {
                std::size_t bt = synth_block_of(t, n_tails, spec.n_blocks);
                if (bd == bt) continue;
                EntityId head{EntityKind::Drug, d};
                EntityId tail{tail_kind, t};
                if (graph.is_positive(head, rel, tail)) continue;
                NegativeEntry entry{d, t, year(rng)};
                if (rel == kDrugProtein) {
                    pool.verified_dp.push_back(entry);
                } else {
                    std::size_t dist = bd > bt ? bd - bt : bt - bd;
                    (dist == 1 ? pool.hard_di : pool.medium_di).push_back(entry);
                }
            }
        }
    };
    collect_negatives(kDrugProtein, spec.n_proteins, EntityKind::Protein);
    collect_negatives(kDrugIndication, spec.n_indications, EntityKind::Indication);

    return {std::move(graph), std::move(pool)};
}

FeatureTable make_block_features(const KnowledgeGraph& graph, EntityKind kind, std::size_t dim,
                                 std::size_t n_blocks, std::uint64_t seed) {
    if (dim < n_blocks) throw SpecError("feature dim must be >= n_blocks");
    FeatureTable table;
    table.kind = kind;
    table.dim = dim;
    Rng rng = derive_rng(seed, static_cast<std::uint64_t>(kind) + 101);
    std::normal_distribution<double> noise(0.0, 0.25);
    const std::size_t count = graph.entity_count(kind);
    for (std::uint32_t i = 0; i < count; ++i) {
        Vec v(dim);
        for (double& x : v) x = noise(rng);
        v[synth_block_of(i, count, n_blocks)] += 1.0;
        table.vectors[i] = std::move(v);
    }
    return table;
}

}  // namespace kgbench
