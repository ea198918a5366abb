#pragma once

// Orchestration: run configuration, benchmark pipeline (ingest -> split ->
// train -> evaluate -> persist), and the two scaling sweep tracks.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kgbench/config.hpp"
#include "kgbench/graph.hpp"
#include "kgbench/ingest.hpp"
#include "kgbench/kge.hpp"
#include "kgbench/metrics.hpp"
#include "kgbench/split.hpp"
#include "kgbench/topo.hpp"

namespace kgbench {

struct RunConfig {
    // Data sources: either file paths or the synthetic generator.
    std::vector<std::string> edge_paths;
    std::string negatives_path;
    std::string protein_features_path;
    std::string drug_features_path;
    bool synthetic = false;
    SyntheticSpec synth;
    std::size_t synth_feature_dim = 16;
    std::filesystem::path out_dir = "out";

    SplitConfig split;
    std::string model = "distmult";  // transe|transr|rotate|complex|distmult|topo
    KgeConfig kge;
    TopoConfig topo;
    std::vector<std::pair<NegativeTier, double>> dp_mix;  // empty: defaults
    std::vector<std::pair<NegativeTier, double>> di_mix;
    std::string eval_negatives = "verified";  // or "random"
    bool rank_both_sides = false;
    std::vector<int> hits_k = {1, 3, 10};
    double data_fraction = 1.0;
    std::vector<double> data_fractions = {0.25, 0.5, 0.75, 1.0};
    std::vector<double> shared_dims = {64, 128, 192, 256, 512};
    std::uint64_t seed = 0;

    // Audit assertions, active only when set (>= 0); checked after splitting.
    std::int64_t audit_dp_train = -1;
    std::int64_t audit_dp_relocated = -1;
    std::int64_t audit_dp_val = -1;
    std::int64_t audit_dp_test = -1;
    std::int64_t audit_neg_train = -1;
    std::int64_t audit_neg_test = -1;

    static RunConfig from_config(const ConfigMap& map);
    void validate() const;
};

struct LoadedData {
    KnowledgeGraph graph;
    NegativePool pool;
    std::optional<FeatureTable> protein_features;
    std::optional<FeatureTable> drug_features;
};

LoadedData load_data(const RunConfig& config);

// Reads out_dir/split_manifest.tsv when present, otherwise splits and writes
// it: temporal for drug_protein, random (configurable) for drug_indication.
std::vector<SplitResult> make_or_load_splits(const RunConfig& config,
                                             const KnowledgeGraph& graph);

// Uniform seeded sample without replacement of ceil(fraction * N) edges,
// taken as a permutation prefix so fractions nest for one seed.
std::vector<Triple> subsample_training(const std::vector<Triple>& edges, double fraction,
                                       std::uint64_t seed);

// Per-relation evaluation: pr/roc over test positives vs verified (or
// random) negatives, hits@k via filtered ranking.
EvalReport evaluate_split(const KnowledgeGraph& graph, const SplitResult& split,
                          const NegativePool& test_pool, const RunConfig& config,
                          const TripleScorer& scorer, const ActiveNodes& active,
                          std::size_t peak_memory_bytes);

struct BenchmarkOutput {
    std::map<std::string, EvalReport> reports;  // keyed by relation name
    std::size_t parameter_count = 0;
    std::size_t train_edge_count = 0;
    double train_time_s = 0.0;
    double total_time_s = 0.0;
    std::vector<double> loss_trace;
};

BenchmarkOutput run_benchmark(const RunConfig& config);

enum class SweepTrack { DataScaling, ParamScaling };
const char* to_string(SweepTrack track);

struct SweepCell {
    double axis_value = 0.0;
    std::size_t parameter_count = 0;
    std::size_t train_edge_count = 0;
    double wall_time_s = 0.0;
    std::map<std::string, EvalReport> reports;
    std::string error;  // empty on success

    bool ok() const { return error.empty(); }
};

struct SweepReport {
    SweepTrack track = SweepTrack::DataScaling;
    std::vector<SweepCell> cells;

    std::string to_json() const;
};

// One benchmark per grid cell with the controlled variable fixed per track;
// per-cell failures are recorded and the sweep continues.
SweepReport run_sweep(const RunConfig& config, SweepTrack track);

// Writes rank / drug / tail / probability rows for the top k novel pairs.
void write_predictions(const std::filesystem::path& path, const KnowledgeGraph& graph,
                       const std::vector<NovelPrediction>& predictions);

}  // namespace kgbench
