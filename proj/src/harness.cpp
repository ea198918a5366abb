#include "kgbench/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "kgbench/checkpoint.hpp"
#include "kgbench/errors.hpp"
#include "kgbench/rng.hpp"

namespace kgbench {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<std::pair<NegativeTier, double>> parse_mix(const std::string& text) {
    std::vector<std::pair<NegativeTier, double>> mix;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t pos = text.find(',', start);
        std::string field =
            pos == std::string::npos ? text.substr(start) : text.substr(start, pos - start);
        if (!field.empty()) {
            std::size_t colon = field.find(':');
            if (colon == std::string::npos)
                throw UsageError("mix entry must be tier:fraction, got '" + field + "'");
            std::string tier = field.substr(0, colon);
            double frac = std::stod(field.substr(colon + 1));
            NegativeTier t;
            if (tier == "verified")
                t = NegativeTier::Verified;
            else if (tier == "hard")
                t = NegativeTier::Hard;
            else if (tier == "medium")
                t = NegativeTier::Medium;
            else if (tier == "random")
                t = NegativeTier::Random;
            else
                throw UsageError("unknown negative tier '" + tier + "'");
            mix.emplace_back(t, frac);
        }
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return mix;
}

}  // namespace

RunConfig RunConfig::from_config(const ConfigMap& map) {
    RunConfig c;
    c.edge_paths = map.get_string_list("edges");
    c.negatives_path = map.get_string("negatives", "");
    c.protein_features_path = map.get_string("protein_features", "");
    c.drug_features_path = map.get_string("drug_features", "");
    c.synthetic = map.get_bool("synthetic", false);
    c.synth.n_drugs = map.get_u64("synth_drugs", c.synth.n_drugs);
    c.synth.n_proteins = map.get_u64("synth_proteins", c.synth.n_proteins);
    c.synth.n_indications = map.get_u64("synth_indications", c.synth.n_indications);
    c.synth.n_blocks = map.get_u64("synth_blocks", c.synth.n_blocks);
    c.synth.intra_block_edge_prob = map.get_double("synth_intra_prob", c.synth.intra_block_edge_prob);
    c.synth.noise_edge_prob = map.get_double("synth_noise_prob", c.synth.noise_edge_prob);
    c.synth.year_min = static_cast<int>(map.get_int("synth_year_min", c.synth.year_min));
    c.synth.year_max = static_cast<int>(map.get_int("synth_year_max", c.synth.year_max));
    c.synth_feature_dim = map.get_u64("synth_feature_dim", c.synth_feature_dim);
    c.out_dir = map.get_string("out", "out");

    c.split.cutoff_year = static_cast<int>(map.get_int("cutoff_year", c.split.cutoff_year));
    c.split.default_year = static_cast<int>(map.get_int("default_year", c.split.default_year));
    c.split.val_test_ratio = map.get_double("val_test_ratio", c.split.val_test_ratio);
    c.split.di_random_split = map.get_bool("di_random_split", c.split.di_random_split);
    c.split.train_ratio = map.get_double("di_train_ratio", c.split.train_ratio);
    c.split.val_ratio = map.get_double("di_val_ratio", c.split.val_ratio);
    c.split.test_ratio = map.get_double("di_test_ratio", c.split.test_ratio);

    c.model = map.get_string("model", c.model);
    c.seed = map.get_u64("seed", c.seed);
    c.synth.seed = c.seed;
    c.split.seed = c.seed;

    c.kge.entity_dim = map.get_u64("dim", c.kge.entity_dim);
    c.kge.relation_dim = map.get_u64("relation_dim", 0);
    c.kge.margin = map.get_double("margin", c.kge.margin);
    c.kge.learning_rate = map.get_double("lr", c.kge.learning_rate);
    c.kge.epochs = map.get_u64("epochs", c.kge.epochs);
    c.kge.negatives_per_positive =
        map.get_u64("negatives_per_positive", c.kge.negatives_per_positive);
    c.kge.batch_size = map.get_u64("batch_size", c.kge.batch_size);
    c.kge.seed = c.seed;
    if (auto family = parse_kge_family(c.model)) c.kge.family = *family;

    c.topo.shared_dim = map.get_u64("dim", c.topo.shared_dim);
    c.topo.layers = map.get_u64("layers", c.topo.layers);
    c.topo.indication_init_dim = map.get_u64("indication_init_dim", c.topo.indication_init_dim);
    c.topo.drug_mode = map.get_string("drug_mode", "embedding") == "fixed"
                           ? DrugMode::FixedVector
                           : DrugMode::LearnableEmbedding;
    c.topo.use_protein_features = map.get_bool("use_protein_features", true);
    c.topo.missing_feature_fallback = map.get_bool("missing_feature_fallback", true);
    c.topo.learning_rate = map.get_double("lr", c.topo.learning_rate);
    c.topo.epochs = map.get_u64("epochs", c.topo.epochs);
    c.topo.negatives_per_positive =
        map.get_u64("negatives_per_positive", c.topo.negatives_per_positive);
    c.topo.early_stop_patience = map.get_u64("patience", c.topo.early_stop_patience);
    c.topo.seed = c.seed;

    if (map.has("dp_mix")) c.dp_mix = parse_mix(map.get_string("dp_mix", ""));
    if (map.has("di_mix")) c.di_mix = parse_mix(map.get_string("di_mix", ""));
    c.eval_negatives = map.get_string("eval_negatives", c.eval_negatives);
    c.rank_both_sides = map.get_bool("rank_both_sides", false);
    {
        auto ks = map.get_double_list("hits_k", {1, 3, 10});
        c.hits_k.clear();
        for (double k : ks) c.hits_k.push_back(static_cast<int>(k));
    }
    c.data_fraction = map.get_double("data_fraction", c.data_fraction);
    c.data_fractions = map.get_double_list("data_fractions", c.data_fractions);
    c.shared_dims = map.get_double_list("shared_dims", c.shared_dims);

    c.audit_dp_train = map.get_int("audit_dp_train", -1);
    c.audit_dp_relocated = map.get_int("audit_dp_relocated", -1);
    c.audit_dp_val = map.get_int("audit_dp_val", -1);
    c.audit_dp_test = map.get_int("audit_dp_test", -1);
    c.audit_neg_train = map.get_int("audit_neg_train", -1);
    c.audit_neg_test = map.get_int("audit_neg_test", -1);
    return c;
}

void RunConfig::validate() const {
    if (!synthetic && edge_paths.empty())
        throw UsageError("no edge files configured and synthetic mode is off");
    if (data_fraction <= 0.0 || data_fraction > 1.0)
        throw SpecError("data_fraction must lie in (0, 1]");
    if (model != "topo" && !parse_kge_family(model))
        throw UsageError("unknown model '" + model + "'");
    if (eval_negatives != "verified" && eval_negatives != "random")
        throw UsageError("eval_negatives must be 'verified' or 'random'");
}

LoadedData load_data(const RunConfig& config) {
    LoadedData data;
    if (config.synthetic) {
        auto [graph, pool] = generate_synthetic(config.synth);
        data.graph = std::move(graph);
        data.pool = std::move(pool);
        if (config.model == "topo" && config.topo.use_protein_features)
            data.protein_features =
                make_block_features(data.graph, EntityKind::Protein, config.synth_feature_dim,
                                    config.synth.n_blocks, config.seed);
        if (config.model == "topo" && config.topo.drug_mode == DrugMode::FixedVector)
            data.drug_features =
                make_block_features(data.graph, EntityKind::Drug, config.synth_feature_dim,
                                    config.synth.n_blocks, config.seed);
        return data;
    }
    for (const std::string& path : config.edge_paths) load_edges(path, data.graph);
    if (!config.negatives_path.empty())
        data.pool = load_negatives(config.negatives_path, data.graph);
    if (!config.protein_features_path.empty())
        data.protein_features =
            load_features(config.protein_features_path, EntityKind::Protein, data.graph);
    if (!config.drug_features_path.empty())
        data.drug_features =
            load_features(config.drug_features_path, EntityKind::Drug, data.graph);
    return data;
}

std::vector<SplitResult> make_or_load_splits(const RunConfig& config,
                                             const KnowledgeGraph& graph) {
    const auto manifest_path = config.out_dir / "split_manifest.tsv";
    if (std::filesystem::exists(manifest_path)) return read_split_manifest(manifest_path, graph);
    std::vector<SplitResult> splits;
    splits.push_back(temporal_split(graph, kDrugProtein, config.split));
    if (config.split.di_random_split)
        splits.push_back(random_split(graph, kDrugIndication, config.split));
    else
        splits.push_back(temporal_split(graph, kDrugIndication, config.split));
    write_split_manifest(manifest_path, graph, splits);
    return splits;
}

std::vector<Triple> subsample_training(const std::vector<Triple>& edges, double fraction,
                                       std::uint64_t seed) {
    if (fraction <= 0.0 || fraction > 1.0) throw SpecError("fraction must lie in (0, 1]");
    std::vector<std::size_t> perm(edges.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = derive_rng(seed, 42);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto keep = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(edges.size())));
    std::vector<Triple> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.push_back(edges[perm[i]]);
    return out;
}

namespace {

struct TrainedModel {
    std::optional<KgeParams> kge;
    std::optional<TopoParams> topo;
    std::optional<NodeStates> topo_states;  // encoded over the training edges
    std::vector<double> loss_trace;

    std::size_t parameter_count() const {
        return kge ? count_parameters(*kge) : count_parameters(*topo);
    }
};

TripleScorer make_scorer(const TrainedModel& model, const KnowledgeGraph& graph) {
    if (model.kge) {
        const KgeParams* params = &*model.kge;
        return [params, &graph](const Triple& t) { return kge_score(*params, graph, t); };
    }
    const TopoParams* params = &*model.topo;
    const NodeStates* states = &*model.topo_states;
    return [params, states](const Triple& t) {
        return predict_link(*params, states->of(t.head), states->of(t.tail), t.relation);
    };
}

std::vector<Triple> pool_triples(const NegativePool& pool, const KnowledgeGraph& graph,
                                 RelationId relation) {
    const RelationDef& def = graph.relation(relation);
    std::vector<Triple> out;
    auto emit = [&](const std::vector<NegativeEntry>& entries) {
        for (const NegativeEntry& e : entries)
            out.push_back(Triple{EntityId{def.head_kind, e.head}, relation,
                                 EntityId{def.tail_kind, e.tail}, e.year});
    };
    if (relation == kDrugProtein) {
        emit(pool.verified_dp);
    } else {
        emit(pool.hard_di);
        emit(pool.medium_di);
    }
    return out;
}

std::size_t estimate_peak_memory_bytes(const KnowledgeGraph& graph, const RunConfig& config,
                                       const LoadedData& data, std::size_t param_count) {
    // Accounting over the dominant allocations: parameter + gradient tables,
    // the edge store with its indices, negative pools, feature tables, and
    // (for the message-passing model) per-layer state buffers.
    std::size_t bytes = 2 * param_count * sizeof(double);
    bytes += graph.edges().size() * (sizeof(Triple) + 3 * sizeof(std::uint64_t));
    bytes += data.pool.total() * sizeof(NegativeEntry);
    for (const auto& table : {data.protein_features, data.drug_features})
        if (table) bytes += table->vectors.size() * table->dim * sizeof(double);
    if (config.model == "topo") {
        std::size_t nodes = graph.total_entity_count();
        std::size_t sd = config.topo.shared_dim;
        // states + cats + gradients per layer
        bytes += (config.topo.layers + 1) * nodes * sd * sizeof(double) * 2;
        bytes += config.topo.layers * nodes * 2 * sd * sizeof(double);
    }
    return bytes;
}

}  // namespace

EvalReport evaluate_split(const KnowledgeGraph& graph, const SplitResult& split,
                          const NegativePool& test_pool, const RunConfig& config,
                          const TripleScorer& scorer, const ActiveNodes& active,
                          std::size_t peak_memory) {
    const RelationId relation = split.relation;
    EvalReport report;
    report.relation = graph.relation(relation).name;
    report.peak_memory_bytes = peak_memory;
    auto start = std::chrono::steady_clock::now();

    if (split.test.empty()) {
        report.notes = "empty test pool; no metrics computed";
        report.wall_time_s = seconds_since(start);
        return report;
    }

    std::vector<Triple> negatives;
    std::string neg_protocol;
    if (config.eval_negatives == "verified") {
        negatives = pool_triples(test_pool, graph, relation);
        if (negatives.empty())
            throw PoolExhaustedError(
                "no verified test-side negatives for relation '" + report.relation +
                "' (negatives file: '" + config.negatives_path + "')");
        neg_protocol = "verified test-side negatives";
    } else {
        Rng rng = derive_rng(config.seed, 5001 + relation);
        negatives = sample_mixed(NegativePool{}, graph, active,
                                 MixSpec::random_only(relation, split.test.size()), rng);
        neg_protocol = "random filtered negatives (1 per positive)";
    }

    ScoredSet set;
    for (const Triple& t : split.test) {
        set.scores.push_back(scorer(t));
        set.labels.push_back(1);
    }
    for (const Triple& t : negatives) {
        set.scores.push_back(scorer(t));
        set.labels.push_back(0);
    }
    report.pr_auc = pr_auc(set);
    report.roc_auc = roc_auc(set);
    report.n_pos = split.test.size();
    report.n_neg = negatives.size();

    std::vector<double> ranks;
    ranks.reserve(split.test.size() * (config.rank_both_sides ? 2 : 1));
    for (const Triple& t : split.test) {
        ranks.push_back(filtered_rank(scorer, t, graph, RankSide::Tail));
        if (config.rank_both_sides)
            ranks.push_back(filtered_rank(scorer, t, graph, RankSide::Head));
    }
    for (int k : config.hits_k) report.hits[k] = hits_at_k(ranks, k);

    report.notes = "pr/roc over test positives vs " + neg_protocol + "; hits@k via filtered " +
                   (config.rank_both_sides ? std::string("head+tail") : std::string("tail")) +
                   " ranking";
    report.wall_time_s = seconds_since(start);
    return report;
}

namespace {

void check_audits(const RunConfig& config, const std::vector<SplitResult>& splits,
                  const NegativePool& train_pool, const NegativePool& test_pool) {
    auto expect = [](std::int64_t expected, std::size_t actual, const char* what) {
        if (expected >= 0 && static_cast<std::size_t>(expected) != actual)
            throw DataError(std::string("audit assertion failed: ") + what + " expected " +
                            std::to_string(expected) + ", got " + std::to_string(actual));
    };
    for (const SplitResult& split : splits) {
        if (split.relation != kDrugProtein) continue;
        expect(config.audit_dp_train, split.audit.train, "drug_protein train edges");
        expect(config.audit_dp_relocated, split.audit.relocated, "drug_protein relocated edges");
        expect(config.audit_dp_val, split.audit.validation, "drug_protein validation edges");
        expect(config.audit_dp_test, split.audit.test, "drug_protein test edges");
    }
    expect(config.audit_neg_train, train_pool.total(), "train-side negatives");
    expect(config.audit_neg_test, test_pool.total(), "test-side negatives");
}

}  // namespace

BenchmarkOutput run_benchmark(const RunConfig& config) {
    config.validate();
    auto run_start = std::chrono::steady_clock::now();
    std::filesystem::create_directories(config.out_dir);

    LoadedData data = load_data(config);
    data.graph.freeze();
    if (config.synthetic) {
        write_edges(data.graph, config.out_dir / "edges.tsv");
        write_negatives(data.pool, data.graph, config.out_dir / "negatives.tsv");
    }

    std::vector<SplitResult> splits = make_or_load_splits(config, data.graph);
    auto [train_pool, test_pool] =
        split_negatives(data.pool, config.split.cutoff_year, config.split.default_year);
    check_audits(config, splits, train_pool, test_pool);

    std::vector<Triple> train_edges;
    for (const SplitResult& split : splits) {
        auto sub = subsample_training(split.train, config.data_fraction,
                                      config.seed + split.relation);
        train_edges.insert(train_edges.end(), sub.begin(), sub.end());
    }
    if (train_edges.empty()) throw DataError("no training edges after split/subsample");
    ActiveNodes active = ActiveNodes::from_edges(train_edges);

    BenchmarkOutput output;
    output.train_edge_count = train_edges.size();

    auto train_start = std::chrono::steady_clock::now();
    TrainedModel model;
    if (config.model == "topo") {
        TopoTrainOptions options;
        options.pool = &train_pool;
        options.dp_proportions = config.dp_mix;
        options.di_proportions = config.di_mix;
        std::vector<Triple> validation;
        for (const SplitResult& split : splits)
            validation.insert(validation.end(), split.validation.begin(),
                              split.validation.end());
        if (!validation.empty()) options.validation = &validation;
        const FeatureTable* pf =
            data.protein_features ? &*data.protein_features : nullptr;
        const FeatureTable* df = data.drug_features ? &*data.drug_features : nullptr;
        try {
            auto result = train_topo(data.graph, train_edges, config.topo, pf, df, options);
            model.topo = std::move(result.params);
            model.loss_trace = std::move(result.loss_trace);
        } catch (const PoolExhaustedError& e) {
            throw PoolExhaustedError(std::string(e.what()) + " (negatives file: '" +
                                     (config.negatives_path.empty() ? "<none>"
                                                                    : config.negatives_path) +
                                     "')");
        }
        TrainGraph tg = TrainGraph::build(data.graph, train_edges);
        model.topo_states = encode_nodes(*model.topo, tg,
                                         data.protein_features ? &*data.protein_features : nullptr,
                                         data.drug_features ? &*data.drug_features : nullptr);
    } else {
        auto result = train_kge(data.graph, train_edges, config.kge);
        model.kge = std::move(result.params);
        model.loss_trace = std::move(result.loss_trace);
    }
    output.train_time_s = seconds_since(train_start);
    output.parameter_count = model.parameter_count();
    output.loss_trace = model.loss_trace;

    // Persist checkpoint and loss trace.
    Checkpoint ckpt = model.kge ? kge_to_checkpoint(*model.kge, data.graph.registry_hash())
                                : topo_to_checkpoint(*model.topo, data.graph.registry_hash());
    save_checkpoint(config.out_dir / "checkpoint.bin", ckpt);
    {
        std::ofstream trace(config.out_dir / "loss_trace.tsv");
        trace << "# epoch\tmean_loss\n";
        trace.precision(17);
        for (std::size_t i = 0; i < model.loss_trace.size(); ++i)
            trace << i << '\t' << model.loss_trace[i] << '\n';
    }

    const std::size_t peak_memory =
        estimate_peak_memory_bytes(data.graph, config, data, output.parameter_count);
    TripleScorer scorer = make_scorer(model, data.graph);
    std::ofstream table(config.out_dir / "report.txt");
    table << EvalReport::table_header() << '\n';
    for (const SplitResult& split : splits) {
        EvalReport report = evaluate_split(data.graph, split, test_pool, config, scorer,
                                           active, peak_memory);
        std::string relation_name = data.graph.relation(split.relation).name;
        std::ofstream json(config.out_dir / ("report_" + relation_name + ".json"));
        json << report.to_json() << '\n';
        table << report.table_row() << '\n';
        output.reports.emplace(relation_name, std::move(report));
    }
    output.total_time_s = seconds_since(run_start);
    return output;
}

const char* to_string(SweepTrack track) {
    return track == SweepTrack::DataScaling ? "data_scaling" : "param_scaling";
}

std::string SweepReport::to_json() const {
    nlohmann::json j;
    j["track"] = to_string(track);
    nlohmann::json cells_json = nlohmann::json::array();
    for (const SweepCell& cell : cells) {
        nlohmann::json c;
        c["axis_value"] = cell.axis_value;
        c["parameter_count"] = cell.parameter_count;
        c["train_edge_count"] = cell.train_edge_count;
        c["wall_time_s"] = cell.wall_time_s;
        c["error"] = cell.error;
        nlohmann::json reports;
        for (const auto& [name, report] : cell.reports)
            reports[name] = nlohmann::json::parse(report.to_json());
        c["reports"] = reports;
        cells_json.push_back(c);
    }
    j["cells"] = cells_json;
    return j.dump(2);
}

SweepReport run_sweep(const RunConfig& config, SweepTrack track) {
    const std::vector<double>& grid =
        track == SweepTrack::DataScaling ? config.data_fractions : config.shared_dims;
    if (grid.empty()) throw SpecError("sweep grid is empty");

    SweepReport report;
    report.track = track;
    std::filesystem::create_directories(config.out_dir);
    for (double value : grid) {
        SweepCell cell;
        cell.axis_value = value;
        RunConfig cell_config = config;
        char name[64];
        if (track == SweepTrack::DataScaling) {
            cell_config.data_fraction = value;
            std::snprintf(name, sizeof(name), "data_%g", value);
        } else {
            cell_config.data_fraction = 1.0;
            auto dim = static_cast<std::size_t>(value);
            cell_config.kge.entity_dim = dim;
            cell_config.topo.shared_dim = dim;
            std::snprintf(name, sizeof(name), "dim_%g", value);
        }
        cell_config.out_dir = config.out_dir / name;
        auto start = std::chrono::steady_clock::now();
        try {
            BenchmarkOutput out = run_benchmark(cell_config);
            cell.reports = std::move(out.reports);
            cell.parameter_count = out.parameter_count;
            cell.train_edge_count = out.train_edge_count;
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
        cell.wall_time_s = seconds_since(start);
        report.cells.push_back(std::move(cell));
    }
    std::ofstream out(config.out_dir / "sweep_report.json");
    out << report.to_json() << '\n';
    return report;
}

void write_predictions(const std::filesystem::path& path, const KnowledgeGraph& graph,
                       const std::vector<NovelPrediction>& predictions) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << "# rank\tdrug\ttail\tprobability\n";
    char prob[32];
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const NovelPrediction& p = predictions[i];
        std::snprintf(prob, sizeof(prob), "%.6f", p.probability);
        out << (i + 1) << '\t' << graph.name(p.drug) << '\t' << graph.name(p.tail) << '\t'
            << prob << '\n';
    }
}

}  // namespace kgbench
