#pragma once

// Shallow embedding models with closed-form scores, analytic subgradients of
// the margin ranking objective, and a deterministic SGD training loop.
//
// Scores (higher = more plausible):
//   TransE    -||h + r - t||2
//   TransR    -||M_r h + r - M_r t||2,  M_r per relation (d_r x d_e)
//   RotatE    -||h o r - t||2, complex Hadamard; relations stored as phase
//             angles so unit modulus holds by construction
//   ComplEx   Re(<h, r, conj(t)>)
//   DistMult  <h, r, t>, terms computed as (h_i*t_i)*r_i so the score is
//             exactly symmetric in h and t
//
// Complex coordinates interleave as (re, im) pairs; dims must be even.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgbench/checkpoint.hpp"
#include "kgbench/graph.hpp"
#include "kgbench/mat.hpp"
#include "kgbench/rng.hpp"

namespace kgbench {

enum class KgeFamily { TransE, TransR, RotatE, ComplEx, DistMult };
const char* to_string(KgeFamily family);
std::optional<KgeFamily> parse_kge_family(const std::string& name);

struct KgeConfig {
    KgeFamily family = KgeFamily::DistMult;
    std::size_t entity_dim = 128;
    std::size_t relation_dim = 0;  // TransR only; 0 means entity_dim
    double margin = 1.0;
    double learning_rate = 0.01;
    std::size_t epochs = 500;
    std::size_t negatives_per_positive = 1;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;

    void validate() const;
    // Width of a relation row as stored: d_r for TransR, d_e/2 phase angles
    // for RotatE, d_e otherwise.
    std::size_t stored_relation_dim() const;
};

struct KgeParams {
    KgeFamily family = KgeFamily::DistMult;
    std::size_t entity_dim = 0;
    std::size_t relation_dim = 0;          // stored width, see above
    Mat entity_table;                      // |E| x entity_dim, global entity index
    Mat relation_table;                    // |R| x relation_dim
    std::vector<Mat> projections;          // TransR: per relation, d_r x d_e
};

// Sparse gradient accumulator congruent to KgeParams; untouched rows are
// implicitly zero.
struct KgeGradients {
    std::unordered_map<std::uint32_t, Vec> entity;
    std::unordered_map<std::uint32_t, Vec> relation;
    std::unordered_map<std::uint32_t, Mat> projection;

    Vec& entity_row(std::uint32_t row, std::size_t dim);
    Vec& relation_row(std::uint32_t row, std::size_t dim);
    Mat& projection_mat(std::uint32_t relation, std::size_t rows, std::size_t cols);
};

KgeParams init_kge_params(const KnowledgeGraph& graph, const KgeConfig& config);

double kge_score(const KgeParams& params, const KnowledgeGraph& graph, const Triple& triple);

// Sum over aligned pairs of max{0, margin + s(neg) - s(pos)}; negatives[i*n+j]
// pairs with positives[i].
double margin_loss(const KgeParams& params, const KnowledgeGraph& graph,
                   const std::vector<Triple>& positives, const std::vector<Triple>& negatives,
                   double margin);

// Exact subgradients of margin_loss; the zero branch is taken at the hinge
// boundary. Returns the loss of the same batch.
double loss_gradients(const KgeParams& params, const KnowledgeGraph& graph,
                      const std::vector<Triple>& positives, const std::vector<Triple>& negatives,
                      double margin, KgeGradients& grads);

struct KgeTrainResult {
    KgeParams params;
    std::vector<double> loss_trace;  // mean per-pair loss per epoch
};

KgeTrainResult train_kge(const KnowledgeGraph& graph, const std::vector<Triple>& train_edges,
                         const KgeConfig& config);

std::size_t count_parameters(const KgeParams& params);

Checkpoint kge_to_checkpoint(const KgeParams& params, std::uint64_t registry_hash);
KgeParams kge_from_checkpoint(const Checkpoint& ckpt);

}  // namespace kgbench
