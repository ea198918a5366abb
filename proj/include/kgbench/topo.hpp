#pragma once

// Topological link-prediction model: learnable drug/indication embeddings,
// fixed protein feature projection, L layers of heterogeneous mean-aggregation
// message passing over training edges, and per-relation MLP link heads
// trained with binary cross-entropy against mixed negatives. Gradients are
// reverse-accumulated by hand through the fixed computation graph.
//
//   h^{l+1}_u = relu(W^l [h^l_u || mean_{v in N(u)} h^l_v] + b^l)
//   p(u,r,v)  = sigmoid(MLP_r([z_u || z_v]))
//
// Neighborhoods are undirected unions over all relation types on training
// edges only; isolated nodes aggregate the zero vector.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "kgbench/checkpoint.hpp"
#include "kgbench/graph.hpp"
#include "kgbench/ingest.hpp"
#include "kgbench/mat.hpp"
#include "kgbench/sampling.hpp"

namespace kgbench {

enum class DrugMode { LearnableEmbedding, FixedVector };
const char* to_string(DrugMode mode);

struct TopoConfig {
    std::size_t shared_dim = 256;
    std::size_t layers = 3;
    std::size_t protein_feature_dim = 0;   // 0: take from the feature table
    std::size_t indication_init_dim = 32;
    DrugMode drug_mode = DrugMode::LearnableEmbedding;
    bool use_protein_features = true;      // false: learnable protein embeddings
    bool missing_feature_fallback = true;  // learnable rows for uncovered proteins
    double learning_rate = 0.5;
    std::size_t epochs = 500;
    std::size_t negatives_per_positive = 1;
    std::size_t early_stop_patience = 50;  // 0 disables early stopping
    std::uint64_t seed = 0;

    void validate() const;
};

struct LinkHead {
    Mat w1;  // sd x 2sd
    Vec b1;  // sd
    Mat w2;  // 1 x sd
    Vec b2;  // 1
};

struct TopoParams {
    TopoConfig cfg;                    // structural fields describe the shapes
    Mat drug_embeddings;               // |D| x sd  (LearnableEmbedding mode)
    Mat drug_projection;               // drug_feature_dim x sd (FixedVector mode)
    std::size_t drug_feature_dim = 0;
    Mat protein_projection;            // protein_feature_dim x sd
    Mat protein_embeddings;            // |P| x sd when !use_protein_features
    Mat protein_fallback;              // rows for proteins missing a feature vector
    std::vector<std::int32_t> protein_fallback_row;  // |P|, -1 when covered
    Mat indication_embeddings;         // |I| x indication_init_dim
    Mat indication_projection;         // indication_init_dim x sd
    std::vector<Mat> layer_w;          // L x (sd x 2sd)
    std::vector<Vec> layer_b;          // L x sd
    LinkHead head_dp;
    LinkHead head_di;

    std::size_t fallback_count() const { return protein_fallback.rows; }
};

// Undirected neighbor lists over training edges, canonical (sorted) order.
struct TrainGraph {
    std::array<std::vector<std::vector<EntityId>>, kKindCount> neighbors;

    static TrainGraph build(const KnowledgeGraph& graph, const std::vector<Triple>& train_edges);
    const std::vector<EntityId>& of(EntityId id) const {
        return neighbors[static_cast<std::size_t>(id.kind)][id.index];
    }
};

struct NodeStates {
    std::array<std::vector<Vec>, kKindCount> h;

    const Vec& of(EntityId id) const { return h[static_cast<std::size_t>(id.kind)][id.index]; }
    Vec& of(EntityId id) { return h[static_cast<std::size_t>(id.kind)][id.index]; }
};

TopoParams init_topo_params(const KnowledgeGraph& graph, const TopoConfig& config,
                            const FeatureTable* protein_features,
                            const FeatureTable* drug_features);

// Final-layer states for every entity.
NodeStates encode_nodes(const TopoParams& params, const TrainGraph& train_graph,
                        const FeatureTable* protein_features, const FeatureTable* drug_features);

double predict_link(const TopoParams& params, const Vec& z_u, const Vec& z_v,
                    RelationId relation);

// All trainable arrays, in a fixed order; gradients reuse the TopoParams
// shape so views align pairwise.
std::vector<std::span<double>> parameter_views(TopoParams& params);
TopoParams make_zero_like(const TopoParams& params);

// Mean binary cross-entropy over the labeled batch and its exact gradients
// (when grads != nullptr). Pure in params.
double bce_forward_backward(const TopoParams& params, const TrainGraph& train_graph,
                            const FeatureTable* protein_features,
                            const FeatureTable* drug_features,
                            const std::vector<Triple>& positives,
                            const std::vector<Triple>& negatives, TopoParams* grads);

// One SGD step on the batch; returns the pre-update loss.
double bce_step(TopoParams& params, const TrainGraph& train_graph,
                const FeatureTable* protein_features, const FeatureTable* drug_features,
                const std::vector<Triple>& positives, const std::vector<Triple>& negatives);

struct TopoTrainOptions {
    const NegativePool* pool = nullptr;  // nullptr: random-only negatives
    std::vector<std::pair<NegativeTier, double>> dp_proportions;  // empty: defaults
    std::vector<std::pair<NegativeTier, double>> di_proportions;
    const std::vector<Triple>* validation = nullptr;  // enables early stopping
};

struct TopoTrainResult {
    TopoParams params;
    std::vector<double> loss_trace;      // mean BCE per epoch
    std::vector<double> val_pr_trace;    // validation PR-AUC per epoch (if enabled)
    std::size_t stopped_epoch = 0;       // epochs actually run
};

TopoTrainResult train_topo(const KnowledgeGraph& graph, const std::vector<Triple>& train_edges,
                           const TopoConfig& config, const FeatureTable* protein_features,
                           const FeatureTable* drug_features, const TopoTrainOptions& options);

struct NovelPrediction {
    EntityId drug;
    EntityId tail;
    double probability;
};

// Top k type-valid pairs absent from the training positive set, by
// probability; ties break by ascending (drug index, tail index).
std::vector<NovelPrediction> top_k_novel(const TopoParams& params, const KnowledgeGraph& graph,
                                         const std::vector<Triple>& train_edges,
                                         const FeatureTable* protein_features,
                                         const FeatureTable* drug_features, RelationId relation,
                                         std::size_t k);

std::size_t count_parameters(const TopoParams& params);

Checkpoint topo_to_checkpoint(const TopoParams& params, std::uint64_t registry_hash);
TopoParams topo_from_checkpoint(const Checkpoint& ckpt);

}  // namespace kgbench
