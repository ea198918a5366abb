#include "kgbench/kge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kgbench/errors.hpp"
#include "kgbench/sampling.hpp"

namespace kgbench {

const char* to_string(KgeFamily family) {
    switch (family) {
        case KgeFamily::TransE: return "transe";
        case KgeFamily::TransR: return "transr";
        case KgeFamily::RotatE: return "rotate";
        case KgeFamily::ComplEx: return "complex";
        case KgeFamily::DistMult: return "distmult";
    }
    return "?";
}

std::optional<KgeFamily> parse_kge_family(const std::string& name) {
    if (name == "transe") return KgeFamily::TransE;
    if (name == "transr") return KgeFamily::TransR;
    if (name == "rotate") return KgeFamily::RotatE;
    if (name == "complex") return KgeFamily::ComplEx;
    if (name == "distmult") return KgeFamily::DistMult;
    return std::nullopt;
}

void KgeConfig::validate() const {
    if (entity_dim == 0) throw SpecError("entity_dim must be positive");
    if (margin <= 0.0) throw SpecError("margin must be positive");
    if (learning_rate <= 0.0) throw SpecError("learning_rate must be positive");
    if (negatives_per_positive == 0) throw SpecError("negatives_per_positive must be positive");
    if (batch_size == 0) throw SpecError("batch_size must be positive");
    if ((family == KgeFamily::RotatE || family == KgeFamily::ComplEx) && entity_dim % 2 != 0)
        throw SpecError("rotate/complex require an even entity_dim");
}

std::size_t KgeConfig::stored_relation_dim() const {
    switch (family) {
        case KgeFamily::TransR: return relation_dim == 0 ? entity_dim : relation_dim;
        case KgeFamily::RotatE: return entity_dim / 2;
        default: return entity_dim;
    }
}

Vec& KgeGradients::entity_row(std::uint32_t row, std::size_t dim) {
    auto [it, inserted] = entity.try_emplace(row);
    if (inserted) it->second.assign(dim, 0.0);
    return it->second;
}

Vec& KgeGradients::relation_row(std::uint32_t row, std::size_t dim) {
    auto [it, inserted] = relation.try_emplace(row);
    if (inserted) it->second.assign(dim, 0.0);
    return it->second;
}

Mat& KgeGradients::projection_mat(std::uint32_t relation, std::size_t rows, std::size_t cols) {
    auto [it, inserted] = projection.try_emplace(relation);
    if (inserted) it->second = Mat(rows, cols);
    return it->second;
}

KgeParams init_kge_params(const KnowledgeGraph& graph, const KgeConfig& config) {
    config.validate();
    if (!graph.frozen()) throw Error("KGE parameters require a frozen graph");
    KgeParams params;
    params.family = config.family;
    params.entity_dim = config.entity_dim;
    params.relation_dim = config.stored_relation_dim();
    params.entity_table = Mat(graph.total_entity_count(), params.entity_dim);
    params.relation_table = Mat(graph.relation_count(), params.relation_dim);

    Rng rng(config.seed);
    auto init_uniform = [&](Mat& m) {
        const double b = 6.0 / std::sqrt(static_cast<double>(m.cols));
        std::uniform_real_distribution<double> dist(-b, b);
        for (double& v : m.data) v = dist(rng);
    };
    init_uniform(params.entity_table);
    init_uniform(params.relation_table);
    if (config.family == KgeFamily::TransR) {
        params.projections.reserve(graph.relation_count());
        for (std::size_t r = 0; r < graph.relation_count(); ++r)
            params.projections.push_back(
                Mat::identity_padded(params.relation_dim, params.entity_dim));
    }
    return params;
}

namespace {

struct IndexedTriple {
    std::uint32_t head;
    std::uint32_t relation;
    std::uint32_t tail;
};

IndexedTriple index_triple(const KnowledgeGraph& graph, const Triple& t) {
    return {graph.global_index(t.head), t.relation, graph.global_index(t.tail)};
}

// Score of one triple; when grads != nullptr also accumulates
// coeff * d(score)/d(params).
double score_impl(const KgeParams& P, const IndexedTriple& t, double coeff,
                  KgeGradients* grads) {
    if (t.head >= P.entity_table.rows || t.tail >= P.entity_table.rows ||
        t.relation >= P.relation_table.rows)
        throw IndexError("triple indexes outside the parameter tables");
    const auto h = P.entity_table.row(t.head);
    const auto r = P.relation_table.row(t.relation);
    const auto tl = P.entity_table.row(t.tail);
    const std::size_t d = P.entity_dim;

    switch (P.family) {
        case KgeFamily::TransE: {
            Vec v(d);
            for (std::size_t i = 0; i < d; ++i) v[i] = h[i] + r[i] - tl[i];
            double n = l2_norm(v);
            if (grads && n > 0.0) {
                Vec& gh = grads->entity_row(t.head, d);
                Vec& gr = grads->relation_row(t.relation, d);
                Vec& gt = grads->entity_row(t.tail, d);
                for (std::size_t i = 0; i < d; ++i) {
                    double u = v[i] / n;  // d||v||/dv
                    gh[i] += coeff * -u;
                    gr[i] += coeff * -u;
                    gt[i] += coeff * u;
                }
            }
            return -n;
        }
        case KgeFamily::TransR: {
            const Mat& M = P.projections[t.relation];
            const std::size_t dr = P.relation_dim;
            Vec diff(d);  // h - t
            for (std::size_t i = 0; i < d; ++i) diff[i] = h[i] - tl[i];
            Vec v(dr);
            for (std::size_t i = 0; i < dr; ++i) v[i] = dot(M.row(i), diff) + r[i];
            double n = l2_norm(v);
            if (grads && n > 0.0) {
                Vec& gh = grads->entity_row(t.head, d);
                Vec& gr = grads->relation_row(t.relation, dr);
                Vec& gt = grads->entity_row(t.tail, d);
                Mat& gM = grads->projection_mat(t.relation, dr, d);
                for (std::size_t i = 0; i < dr; ++i) {
                    double u = v[i] / n;
                    gr[i] += coeff * -u;
                    for (std::size_t j = 0; j < d; ++j) {
                        gh[j] += coeff * -u * M(i, j);
                        gt[j] += coeff * u * M(i, j);
                        gM(i, j) += coeff * -u * diff[j];
                    }
                }
            }
            return -n;
        }
        case KgeFamily::RotatE: {
            const std::size_t m = d / 2;  // complex coordinates
            Vec vre(m), vim(m);
            double sq = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                double a = h[2 * i], b = h[2 * i + 1];
                double c = tl[2 * i], e = tl[2 * i + 1];
                double cs = std::cos(r[i]), sn = std::sin(r[i]);
                vre[i] = a * cs - b * sn - c;
                vim[i] = a * sn + b * cs - e;
                sq += vre[i] * vre[i] + vim[i] * vim[i];
            }
            double n = std::sqrt(sq);
            if (grads && n > 0.0) {
                Vec& gh = grads->entity_row(t.head, d);
                Vec& gr = grads->relation_row(t.relation, m);
                Vec& gt = grads->entity_row(t.tail, d);
                for (std::size_t i = 0; i < m; ++i) {
                    double a = h[2 * i], b = h[2 * i + 1];
                    double cs = std::cos(r[i]), sn = std::sin(r[i]);
                    double ure = vre[i] / n, uim = vim[i] / n;
                    gh[2 * i] += coeff * -(ure * cs + uim * sn);
                    gh[2 * i + 1] += coeff * -(-ure * sn + uim * cs);
                    gt[2 * i] += coeff * ure;
                    gt[2 * i + 1] += coeff * uim;
                    gr[i] += coeff * -(ure * (-a * sn - b * cs) + uim * (a * cs - b * sn));
                }
            }
            return -n;
        }
        case KgeFamily::ComplEx: {
            const std::size_t m = d / 2;
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                double hr = h[2 * i], hi = h[2 * i + 1];
                double rr = r[2 * i], ri = r[2 * i + 1];
                double tr = tl[2 * i], ti = tl[2 * i + 1];
                s += (hr * rr - hi * ri) * tr + (hr * ri + hi * rr) * ti;
            }
            if (grads) {
                Vec& gh = grads->entity_row(t.head, d);
                Vec& gr = grads->relation_row(t.relation, d);
                Vec& gt = grads->entity_row(t.tail, d);
                for (std::size_t i = 0; i < m; ++i) {
                    double hr = h[2 * i], hi = h[2 * i + 1];
                    double rr = r[2 * i], ri = r[2 * i + 1];
                    double tr = tl[2 * i], ti = tl[2 * i + 1];
                    gh[2 * i] += coeff * (rr * tr + ri * ti);
                    gh[2 * i + 1] += coeff * (-ri * tr + rr * ti);
                    gr[2 * i] += coeff * (hr * tr + hi * ti);
                    gr[2 * i + 1] += coeff * (hr * ti - hi * tr);
                    gt[2 * i] += coeff * (hr * rr - hi * ri);
                    gt[2 * i + 1] += coeff * (hr * ri + hi * rr);
                }
            }
            return s;
        }
        case KgeFamily::DistMult: {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) s += (h[i] * tl[i]) * r[i];
            if (grads) {
                Vec& gh = grads->entity_row(t.head, d);
                Vec& gr = grads->relation_row(t.relation, d);
                Vec& gt = grads->entity_row(t.tail, d);
                for (std::size_t i = 0; i < d; ++i) {
                    gh[i] += coeff * r[i] * tl[i];
                    gr[i] += coeff * h[i] * tl[i];
                    gt[i] += coeff * h[i] * r[i];
                }
            }
            return s;
        }
    }
    throw Error("unreachable");
}

}  // namespace

double kge_score(const KgeParams& params, const KnowledgeGraph& graph, const Triple& triple) {
    return score_impl(params, index_triple(graph, triple), 0.0, nullptr);
}

double margin_loss(const KgeParams& params, const KnowledgeGraph& graph,
                   const std::vector<Triple>& positives, const std::vector<Triple>& negatives,
                   double margin) {
    if (positives.empty() || negatives.size() % positives.size() != 0)
        throw SpecError("negatives must align with positives");
    const std::size_t npp = negatives.size() / positives.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < positives.size(); ++i) {
        double s_pos = kge_score(params, graph, positives[i]);
        for (std::size_t j = 0; j < npp; ++j) {
            double s_neg = kge_score(params, graph, negatives[i * npp + j]);
            loss += std::max(0.0, margin + s_neg - s_pos);
        }
    }
    return loss;
}

double loss_gradients(const KgeParams& params, const KnowledgeGraph& graph,
                      const std::vector<Triple>& positives, const std::vector<Triple>& negatives,
                      double margin, KgeGradients& grads) {
    if (positives.empty() || negatives.size() % positives.size() != 0)
        throw SpecError("negatives must align with positives");
    const std::size_t npp = negatives.size() / positives.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < positives.size(); ++i) {
        IndexedTriple pos = index_triple(graph, positives[i]);
        double s_pos = score_impl(params, pos, 0.0, nullptr);
        for (std::size_t j = 0; j < npp; ++j) {
            IndexedTriple neg = index_triple(graph, negatives[i * npp + j]);
            double s_neg = score_impl(params, neg, 0.0, nullptr);
            double slack = margin + s_neg - s_pos;
            if (slack > 0.0) {  // zero branch at the hinge boundary
                loss += slack;
                score_impl(params, neg, 1.0, &grads);
                score_impl(params, pos, -1.0, &grads);
            }
        }
    }
    return loss;
}

namespace {

void apply_gradients(KgeParams& params, const KgeGradients& grads, double lr) {
    for (const auto& [row, g] : grads.entity) axpy(-lr, g, params.entity_table.row(row));
    for (const auto& [row, g] : grads.relation) axpy(-lr, g, params.relation_table.row(row));
    for (const auto& [rel, g] : grads.projection)
        axpy(-lr, g.data, {params.projections[rel].data.data(), params.projections[rel].size()});
}

void end_of_epoch_renorm(KgeParams& params) {
    if (params.family == KgeFamily::TransE) {
        // Project entity rows onto the unit ball.
        for (std::size_t i = 0; i < params.entity_table.rows; ++i) {
            auto row = params.entity_table.row(i);
            double n = l2_norm(row);
            if (n > 1.0) scale(row, 1.0 / n);
        }
    }
    // RotatE relations are phase angles: unit modulus by construction.
}

void check_finite(const KgeParams& params, std::size_t epoch) {
    if (!all_finite(params.entity_table.data) || !all_finite(params.relation_table.data))
        throw DivergenceError("non-finite parameters after epoch " + std::to_string(epoch));
    for (const Mat& m : params.projections)
        if (!all_finite(m.data))
            throw DivergenceError("non-finite projection after epoch " + std::to_string(epoch));
}

}  // namespace

KgeTrainResult train_kge(const KnowledgeGraph& graph, const std::vector<Triple>& train_edges,
                         const KgeConfig& config) {
    config.validate();
    if (train_edges.empty()) throw DataError("training edge set is empty");

    KgeTrainResult result;
    result.params = init_kge_params(graph, config);
    Rng rng = derive_rng(config.seed, 7);

    std::vector<std::size_t> order(train_edges.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t epoch_pairs = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<Triple> positives;
            std::vector<Triple> negatives;
            positives.reserve(end - start);
            negatives.reserve((end - start) * config.negatives_per_positive);
            for (std::size_t k = start; k < end; ++k) {
                const Triple& pos = train_edges[order[k]];
                positives.push_back(pos);
                for (std::size_t j = 0; j < config.negatives_per_positive; ++j) {
                    CorruptSide side = coin(rng) ? CorruptSide::Head : CorruptSide::Tail;
                    negatives.push_back(corrupt_filtered(pos, graph, side, rng));
                }
            }
            KgeGradients grads;
            double batch_loss =
                loss_gradients(result.params, graph, positives, negatives, config.margin, grads);
            if (!std::isfinite(batch_loss))
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch));
            apply_gradients(result.params, grads, config.learning_rate);
            epoch_loss += batch_loss;
            epoch_pairs += negatives.size();
        }
        end_of_epoch_renorm(result.params);
        check_finite(result.params, epoch);
        result.loss_trace.push_back(epoch_loss / static_cast<double>(epoch_pairs));
    }
    return result;
}

std::size_t count_parameters(const KgeParams& params) {
    std::size_t n = params.entity_table.size() + params.relation_table.size();
    for (const Mat& m : params.projections) n += m.size();
    return n;
}

Checkpoint kge_to_checkpoint(const KgeParams& params, std::uint64_t registry_hash) {
    Checkpoint ckpt;
    ckpt.model_tag = to_string(params.family);
    ckpt.registry_hash = registry_hash;
    ckpt.meta = {
        {"entity_dim", std::to_string(params.entity_dim)},
        {"relation_dim", std::to_string(params.relation_dim)},
    };
    ckpt.tables.push_back({"entity_table", params.entity_table});
    ckpt.tables.push_back({"relation_table", params.relation_table});
    for (std::size_t r = 0; r < params.projections.size(); ++r)
        ckpt.tables.push_back({"projection_" + std::to_string(r), params.projections[r]});
    return ckpt;
}

KgeParams kge_from_checkpoint(const Checkpoint& ckpt) {
    auto family = parse_kge_family(ckpt.model_tag);
    if (!family) throw CheckpointError("checkpoint is not a KGE model: " + ckpt.model_tag);
    KgeParams params;
    params.family = *family;
    params.entity_dim = std::stoul(ckpt.meta_value("entity_dim"));
    params.relation_dim = std::stoul(ckpt.meta_value("relation_dim"));
    params.entity_table = ckpt.table("entity_table");
    params.relation_table = ckpt.table("relation_table");
    for (std::size_t r = 0;; ++r) {
        std::string name = "projection_" + std::to_string(r);
        if (!ckpt.has_table(name)) break;
        params.projections.push_back(ckpt.table(name));
    }
    return params;
}

}  // namespace kgbench
