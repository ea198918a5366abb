// kgbench command-line interface.
//
// Subcommands: synth, ingest, split, train, eval, sweep, predict.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"

#include "kgbench/checkpoint.hpp"
#include "kgbench/errors.hpp"
#include "kgbench/harness.hpp"

namespace {

using namespace kgbench;

struct CommonFlags {
    std::string config_path;
    std::string out;
    std::string model;
    std::string edges;
    std::string negatives;
    std::string protein_features;
    std::string drug_features;
    double data_fraction = -1.0;
    std::int64_t dim = -1;
    std::int64_t epochs = -1;
    double lr = -1.0;
    std::int64_t seed = -1;
    bool synthetic = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "key = value config file");
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_option("--model", flags.model,
                    "transe|transr|rotate|complex|distmult|topo");
    cmd->add_option("--edges", flags.edges, "comma-separated edge TSV files");
    cmd->add_option("--negatives", flags.negatives, "negative pool TSV file");
    cmd->add_option("--protein-features", flags.protein_features, "protein feature file");
    cmd->add_option("--drug-features", flags.drug_features, "drug feature file");
    cmd->add_option("--data-fraction", flags.data_fraction, "training-edge fraction in (0,1]");
    cmd->add_option("--dim", flags.dim, "embedding / shared dimension");
    cmd->add_option("--epochs", flags.epochs, "training epochs");
    cmd->add_option("--lr", flags.lr, "learning rate");
    cmd->add_option("--seed", flags.seed, "RNG seed");
    cmd->add_flag("--synthetic", flags.synthetic, "generate a synthetic graph instead of files");
}

RunConfig build_config(const CommonFlags& flags) {
    ConfigMap map;
    if (!flags.config_path.empty()) map = ConfigMap::from_file(flags.config_path);
    if (!flags.out.empty()) map.set("out", flags.out);
    if (!flags.model.empty()) map.set("model", flags.model);
    if (!flags.edges.empty()) map.set("edges", flags.edges);
    if (!flags.negatives.empty()) map.set("negatives", flags.negatives);
    if (!flags.protein_features.empty()) map.set("protein_features", flags.protein_features);
    if (!flags.drug_features.empty()) map.set("drug_features", flags.drug_features);
    if (flags.data_fraction >= 0.0)
        map.set("data_fraction", std::to_string(flags.data_fraction));
    if (flags.dim >= 0) map.set("dim", std::to_string(flags.dim));
    if (flags.epochs >= 0) map.set("epochs", std::to_string(flags.epochs));
    if (flags.lr >= 0.0) map.set("lr", std::to_string(flags.lr));
    if (flags.seed >= 0) map.set("seed", std::to_string(flags.seed));
    if (flags.synthetic) map.set("synthetic", "true");
    return RunConfig::from_config(map);
}

int cmd_synth(const RunConfig& config) {
    std::filesystem::create_directories(config.out_dir);
    auto [graph, pool] = generate_synthetic(config.synth);
    graph.freeze();
    write_edges(graph, config.out_dir / "edges.tsv");
    write_negatives(pool, graph, config.out_dir / "negatives.tsv");
    FeatureTable protein = make_block_features(graph, EntityKind::Protein,
                                               config.synth_feature_dim, config.synth.n_blocks,
                                               config.seed);
    write_features(protein, graph, config.out_dir / "protein_features.tsv");
    FeatureTable drug = make_block_features(graph, EntityKind::Drug, config.synth_feature_dim,
                                            config.synth.n_blocks, config.seed);
    write_features(drug, graph, config.out_dir / "drug_features.tsv");
    std::printf("synthetic graph: %zu drugs, %zu proteins, %zu indications, %zu edges\n",
                graph.entity_count(EntityKind::Drug), graph.entity_count(EntityKind::Protein),
                graph.entity_count(EntityKind::Indication), graph.edges().size());
    std::printf("negative pool: %zu verified, %zu hard, %zu medium\n", pool.verified_dp.size(),
                pool.hard_di.size(), pool.medium_di.size());
    std::printf("files written under %s\n", config.out_dir.string().c_str());
    return 0;
}

int cmd_ingest(const RunConfig& config) {
    LoadedData data = load_data(config);
    data.graph.freeze();
    std::printf("entities: %zu drugs, %zu proteins, %zu indications\n",
                data.graph.entity_count(EntityKind::Drug),
                data.graph.entity_count(EntityKind::Protein),
                data.graph.entity_count(EntityKind::Indication));
    std::size_t dp = 0, di = 0;
    for (const Triple& t : data.graph.edges()) (t.relation == kDrugProtein ? dp : di)++;
    std::printf("edges: %zu drug_protein, %zu drug_indication\n", dp, di);
    std::printf("negatives: %zu verified, %zu hard, %zu medium\n", data.pool.verified_dp.size(),
                data.pool.hard_di.size(), data.pool.medium_di.size());
    for (const auto& table : {std::make_pair("protein", data.protein_features),
                              std::make_pair("drug", data.drug_features)})
        if (table.second)
            std::printf("%s features: dim %zu, %zu vectors, %zu unknown rows skipped\n",
                        table.first, table.second->dim, table.second->vectors.size(),
                        table.second->skipped_unknown);
    return 0;
}

int cmd_split(const RunConfig& config) {
    std::filesystem::create_directories(config.out_dir);
    LoadedData data = load_data(config);
    data.graph.freeze();
    auto splits = make_or_load_splits(config, data.graph);
    for (const SplitResult& split : splits) {
        const SplitAudit& a = split.audit;
        std::printf("%s: %zu edges -> %zu train (%zu relocated), %zu val, %zu test%s\n",
                    data.graph.relation(split.relation).name.c_str(), a.input_edges, a.train,
                    a.relocated, a.validation, a.test,
                    a.empty_pool_warning ? "  [warning: all candidate edges relocated]" : "");
    }
    auto [train_pool, test_pool] =
        split_negatives(data.pool, config.split.cutoff_year, config.split.default_year);
    std::printf("negatives: %zu train-side, %zu test-side\n", train_pool.total(),
                test_pool.total());
    std::printf("manifest: %s\n", (config.out_dir / "split_manifest.tsv").string().c_str());
    return 0;
}

int cmd_train(const RunConfig& config) {
    BenchmarkOutput out = run_benchmark(config);
    std::printf("model %s: %zu parameters, %zu train edges, trained in %.1fs\n",
                config.model.c_str(), out.parameter_count, out.train_edge_count,
                out.train_time_s);
    std::printf("%s\n", EvalReport::table_header());
    for (const auto& [name, report] : out.reports) std::printf("%s\n", report.table_row().c_str());
    std::printf("artifacts under %s\n", config.out_dir.string().c_str());
    return 0;
}

int cmd_eval(const RunConfig& config, const std::string& ckpt_path) {
    // Re-evaluates a saved checkpoint against the split manifest in out_dir.
    LoadedData data = load_data(config);
    data.graph.freeze();
    Checkpoint ckpt = load_checkpoint(ckpt_path.empty()
                                          ? (config.out_dir / "checkpoint.bin").string()
                                          : ckpt_path);
    if (ckpt.registry_hash != data.graph.registry_hash())
        throw CheckpointError("checkpoint was trained on a different entity/relation registry");
    auto splits = make_or_load_splits(config, data.graph);
    auto [train_pool, test_pool] =
        split_negatives(data.pool, config.split.cutoff_year, config.split.default_year);

    std::vector<Triple> train_edges;
    for (const SplitResult& split : splits) {
        auto sub =
            subsample_training(split.train, config.data_fraction, config.seed + split.relation);
        train_edges.insert(train_edges.end(), sub.begin(), sub.end());
    }
    ActiveNodes active = ActiveNodes::from_edges(train_edges);

    TripleScorer scorer;
    std::optional<KgeParams> kge;
    std::optional<TopoParams> topo;
    std::optional<NodeStates> states;
    if (ckpt.model_tag == "topo") {
        topo = topo_from_checkpoint(ckpt);
        TrainGraph tg = TrainGraph::build(data.graph, train_edges);
        states = encode_nodes(*topo, tg,
                              data.protein_features ? &*data.protein_features : nullptr,
                              data.drug_features ? &*data.drug_features : nullptr);
        scorer = [&](const Triple& t) {
            return predict_link(*topo, states->of(t.head), states->of(t.tail), t.relation);
        };
    } else {
        kge = kge_from_checkpoint(ckpt);
        scorer = [&](const Triple& t) { return kge_score(*kge, data.graph, t); };
    }

    std::printf("%s\n", EvalReport::table_header());
    for (const SplitResult& split : splits) {
        EvalReport report = evaluate_split(data.graph, split, test_pool, config, scorer, active,
                                           /*peak_memory_bytes=*/0);
        std::ofstream json(config.out_dir / ("report_" + report.relation + ".json"));
        json << report.to_json() << '\n';
        std::printf("%s\n", report.table_row().c_str());
    }
    return 0;
}

int cmd_predict(const RunConfig& config, const std::string& ckpt_path, std::size_t k) {
    LoadedData data = load_data(config);
    data.graph.freeze();
    Checkpoint ckpt = load_checkpoint(ckpt_path.empty()
                                          ? (config.out_dir / "checkpoint.bin").string()
                                          : ckpt_path);
    if (ckpt.model_tag != "topo")
        throw UsageError("predict requires a topo checkpoint; got '" + ckpt.model_tag + "'");
    if (ckpt.registry_hash != data.graph.registry_hash())
        throw CheckpointError("checkpoint was trained on a different entity/relation registry");
    TopoParams params = topo_from_checkpoint(ckpt);

    auto splits = make_or_load_splits(config, data.graph);
    std::vector<Triple> train_edges;
    for (const SplitResult& split : splits) {
        auto sub =
            subsample_training(split.train, config.data_fraction, config.seed + split.relation);
        train_edges.insert(train_edges.end(), sub.begin(), sub.end());
    }
    for (RelationId relation : {kDrugIndication, kDrugProtein}) {
        auto preds = top_k_novel(params, data.graph, train_edges,
                                 data.protein_features ? &*data.protein_features : nullptr,
                                 data.drug_features ? &*data.drug_features : nullptr, relation,
                                 k);
        auto path = config.out_dir /
                    ("predictions_" + data.graph.relation(relation).name + ".tsv");
        write_predictions(path, data.graph, preds);
        std::printf("wrote %zu predictions to %s\n", preds.size(), path.string().c_str());
    }
    return 0;
}

int cmd_sweep(const RunConfig& config, const std::string& track_name) {
    SweepTrack track;
    if (track_name == "data")
        track = SweepTrack::DataScaling;
    else if (track_name == "param")
        track = SweepTrack::ParamScaling;
    else
        throw UsageError("sweep track must be 'data' or 'param'");
    SweepReport report = run_sweep(config, track);
    for (const SweepCell& cell : report.cells) {
        if (cell.ok())
            std::printf("cell %-8g params=%-10zu train_edges=%-8zu %.1fs\n", cell.axis_value,
                        cell.parameter_count, cell.train_edge_count, cell.wall_time_s);
        else
            std::printf("cell %-8g FAILED: %s\n", cell.axis_value, cell.error.c_str());
    }
    std::printf("sweep report: %s\n",
                (config.out_dir / "sweep_report.json").string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"link-prediction benchmark engine for drug-protein-indication graphs"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string ckpt_path;
    std::string track = "data";
    std::size_t top_k = 50;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
    add_common(synth, flags);
    CLI::App* ingest = app.add_subcommand("ingest", "load and validate input files");
    add_common(ingest, flags);
    CLI::App* split = app.add_subcommand("split", "create the split manifest");
    add_common(split, flags);
    CLI::App* train = app.add_subcommand("train", "run the full benchmark pipeline");
    add_common(train, flags);
    CLI::App* eval = app.add_subcommand("eval", "re-evaluate a saved checkpoint");
    add_common(eval, flags);
    eval->add_option("--ckpt", ckpt_path, "checkpoint path (default <out>/checkpoint.bin)");
    CLI::App* predict = app.add_subcommand("predict", "rank novel pairs from a topo checkpoint");
    add_common(predict, flags);
    predict->add_option("--ckpt", ckpt_path, "checkpoint path (default <out>/checkpoint.bin)");
    predict->add_option("--k", top_k, "number of predictions per relation");
    CLI::App* sweep = app.add_subcommand("sweep", "run a scaling sweep");
    add_common(sweep, flags);
    sweep->add_option("--track", track, "data | param");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        kgbench::RunConfig config = build_config(flags);
        if (synth->parsed()) return cmd_synth(config);
        if (ingest->parsed()) return cmd_ingest(config);
        if (split->parsed()) return cmd_split(config);
        if (train->parsed()) return cmd_train(config);
        if (eval->parsed()) return cmd_eval(config, ckpt_path);
        if (predict->parsed()) return cmd_predict(config, ckpt_path, top_k);
        if (sweep->parsed()) return cmd_sweep(config, track);
        return 1;
    } catch (const kgbench::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
