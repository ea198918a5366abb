#include "kgbench/topo.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kgbench/errors.hpp"
#include "kgbench/metrics.hpp"
#include "kgbench/rng.hpp"

namespace kgbench {

const char* to_string(DrugMode mode) {
    return mode == DrugMode::LearnableEmbedding ? "embedding" : "fixed";
}

void TopoConfig::validate() const {
    if (shared_dim == 0) throw SpecError("shared_dim must be positive");
    if (indication_init_dim == 0) throw SpecError("indication_init_dim must be positive");
    if (learning_rate <= 0.0) throw SpecError("learning_rate must be positive");
    if (negatives_per_positive == 0) throw SpecError("negatives_per_positive must be positive");
}

TrainGraph TrainGraph::build(const KnowledgeGraph& graph,
                             const std::vector<Triple>& train_edges) {
    TrainGraph tg;
    for (std::size_t k = 0; k < kKindCount; ++k)
        tg.neighbors[k].resize(graph.entity_count(static_cast<EntityKind>(k)));
    for (const Triple& t : train_edges) {
        tg.neighbors[static_cast<std::size_t>(t.head.kind)][t.head.index].push_back(t.tail);
        tg.neighbors[static_cast<std::size_t>(t.tail.kind)][t.tail.index].push_back(t.head);
    }
    for (auto& kind_lists : tg.neighbors)
        for (auto& list : kind_lists) {
            std::sort(list.begin(), list.end());
            list.erase(std::unique(list.begin(), list.end()), list.end());
        }
    return tg;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Numerically stable -[y log p + (1-y) log(1-p)] with p = sigmoid(z).
double bce_from_logit(double z, double y) {
    return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
}

// Embedding tables: the classic 6/sqrt(d) uniform bound.
void init_embedding(Mat& m, Rng& rng) {
    if (m.empty()) return;
    const double b = 6.0 / std::sqrt(static_cast<double>(m.cols));
    std::uniform_real_distribution<double> dist(-b, b);
    for (double& v : m.data) v = dist(rng);
}

// Weight matrices: Glorot uniform, so activations stay bounded through the
// stacked layers.
void init_glorot(Mat& m, Rng& rng, std::size_t fan_in, std::size_t fan_out) {
    if (m.empty()) return;
    const double b = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-b, b);
    for (double& v : m.data) v = dist(rng);
}

const LinkHead& head_for(const TopoParams& params, RelationId relation) {
    if (relation == kDrugProtein) return params.head_dp;
    if (relation == kDrugIndication) return params.head_di;
    throw IndexError("no link head for relation " + std::to_string(relation));
}

LinkHead& head_for(TopoParams& params, RelationId relation) {
    return const_cast<LinkHead&>(head_for(static_cast<const TopoParams&>(params), relation));
}

// Layer inputs cached for the backward pass: cat[l][kind][i] is
// [h^l_i || mean neighbor state] fed into layer l.
struct ForwardTrace {
    std::vector<NodeStates> states;  // 0..L
    std::vector<NodeStates> cats;    // 0..L-1
};

NodeStates layer0_states(const TopoParams& params, const KnowledgeGraph* graph_counts,
                         const std::array<std::size_t, kKindCount>& counts,
                         const FeatureTable* protein_features,
                         const FeatureTable* drug_features) {
    (void)graph_counts;
    const TopoConfig& cfg = params.cfg;
    const std::size_t sd = cfg.shared_dim;
    NodeStates s;
    for (std::size_t k = 0; k < kKindCount; ++k) s.h[k].assign(counts[k], Vec(sd, 0.0));

    auto& drugs = s.h[static_cast<std::size_t>(EntityKind::Drug)];
    for (std::size_t i = 0; i < drugs.size(); ++i) {
        if (cfg.drug_mode == DrugMode::LearnableEmbedding) {
            auto row = params.drug_embeddings.row(i);
            std::copy(row.begin(), row.end(), drugs[i].begin());
        } else {
            const Vec* f = drug_features ? drug_features->find(static_cast<std::uint32_t>(i))
                                         : nullptr;
            if (!f) throw MissingFeatureError("drug " + std::to_string(i) +
                                              " has no fixed feature vector");
            for (std::size_t j = 0; j < sd; ++j) {
                double v = 0.0;
                for (std::size_t a = 0; a < params.drug_feature_dim; ++a)
                    v += (*f)[a] * params.drug_projection(a, j);
                drugs[i][j] = v;
            }
        }
    }

    auto& prots = s.h[static_cast<std::size_t>(EntityKind::Protein)];
    for (std::size_t i = 0; i < prots.size(); ++i) {
        if (!cfg.use_protein_features) {
            auto row = params.protein_embeddings.row(i);
            std::copy(row.begin(), row.end(), prots[i].begin());
            continue;
        }
        const Vec* f =
            protein_features ? protein_features->find(static_cast<std::uint32_t>(i)) : nullptr;
        if (f) {
            for (std::size_t j = 0; j < sd; ++j) {
                double v = 0.0;
                for (std::size_t a = 0; a < f->size(); ++a)
                    v += (*f)[a] * params.protein_projection(a, j);
                prots[i][j] = v;
            }
        } else {
            std::int32_t row = i < params.protein_fallback_row.size()
                                   ? params.protein_fallback_row[i]
                                   : -1;
            if (row < 0)
                throw MissingFeatureError("protein " + std::to_string(i) +
                                          " has no feature vector and no fallback row");
            auto fb = params.protein_fallback.row(static_cast<std::size_t>(row));
            std::copy(fb.begin(), fb.end(), prots[i].begin());
        }
    }

    auto& inds = s.h[static_cast<std::size_t>(EntityKind::Indication)];
    for (std::size_t i = 0; i < inds.size(); ++i) {
        auto e = params.indication_embeddings.row(i);
        for (std::size_t j = 0; j < sd; ++j) {
            double v = 0.0;
            for (std::size_t a = 0; a < cfg.indication_init_dim; ++a)
                v += e[a] * params.indication_projection(a, j);
            inds[i][j] = v;
        }
    }
    return s;
}

ForwardTrace forward_encode(const TopoParams& params, const TrainGraph& tg,
                            const FeatureTable* protein_features,
                            const FeatureTable* drug_features) {
    const TopoConfig& cfg = params.cfg;
    const std::size_t sd = cfg.shared_dim;
    std::array<std::size_t, kKindCount> counts;
    for (std::size_t k = 0; k < kKindCount; ++k) counts[k] = tg.neighbors[k].size();

    ForwardTrace trace;
    trace.states.push_back(layer0_states(params, nullptr, counts, protein_features, drug_features));

    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const NodeStates& prev = trace.states.back();
        NodeStates cat;
        NodeStates next;
        for (std::size_t k = 0; k < kKindCount; ++k) {
            cat.h[k].assign(counts[k], Vec(2 * sd, 0.0));
            next.h[k].assign(counts[k], Vec(sd, 0.0));
        }
        const Mat& w = params.layer_w[l];
        const Vec& b = params.layer_b[l];
        for (std::size_t k = 0; k < kKindCount; ++k) {
            for (std::size_t i = 0; i < counts[k]; ++i) {
                Vec& c = cat.h[k][i];
                const Vec& self = prev.h[k][i];
                std::copy(self.begin(), self.end(), c.begin());
                const auto& nbrs = tg.neighbors[k][i];
                if (!nbrs.empty()) {
                    for (const EntityId& v : nbrs) axpy(1.0, prev.of(v), {c.data() + sd, sd});
                    scale({c.data() + sd, sd}, 1.0 / static_cast<double>(nbrs.size()));
                }
                Vec& out = next.h[k][i];
                for (std::size_t j = 0; j < sd; ++j) {
                    double pre = b[j] + dot(w.row(j), c);
                    out[j] = pre > 0.0 ? pre : 0.0;
                }
            }
        }
        trace.cats.push_back(std::move(cat));
        trace.states.push_back(std::move(next));
    }
    return trace;
}

struct HeadTrace {
    Vec x;       // 2sd input
    Vec hidden;  // sd post-relu
    double logit = 0.0;
};

HeadTrace head_forward(const LinkHead& head, const Vec& z_u, const Vec& z_v) {
    const std::size_t sd = head.b1.size();
    HeadTrace t;
    t.x.resize(2 * sd);
    std::copy(z_u.begin(), z_u.end(), t.x.begin());
    std::copy(z_v.begin(), z_v.end(), t.x.begin() + sd);
    t.hidden.resize(sd);
    for (std::size_t j = 0; j < sd; ++j) {
        double pre = head.b1[j] + dot(head.w1.row(j), t.x);
        t.hidden[j] = pre > 0.0 ? pre : 0.0;
    }
    t.logit = head.b2[0] + dot(head.w2.row(0), t.hidden);
    return t;
}

}  // namespace

TopoParams init_topo_params(const KnowledgeGraph& graph, const TopoConfig& config,
                            const FeatureTable* protein_features,
                            const FeatureTable* drug_features) {
    config.validate();
    TopoParams params;
    params.cfg = config;
    const std::size_t sd = config.shared_dim;
    const std::size_t n_drugs = graph.entity_count(EntityKind::Drug);
    const std::size_t n_prots = graph.entity_count(EntityKind::Protein);
    const std::size_t n_inds = graph.entity_count(EntityKind::Indication);
    Rng rng(config.seed);

    if (config.drug_mode == DrugMode::LearnableEmbedding) {
        params.drug_embeddings = Mat(n_drugs, sd);
        init_embedding(params.drug_embeddings, rng);
    } else {
        if (!drug_features) throw MissingFeatureError("fixed drug mode requires a feature table");
        params.drug_feature_dim = drug_features->dim;
        params.drug_projection = Mat(params.drug_feature_dim, sd);
        init_glorot(params.drug_projection, rng, params.drug_feature_dim, sd);
    }

    if (config.use_protein_features) {
        if (!protein_features && !config.missing_feature_fallback)
            throw MissingFeatureError("protein features requested but no table supplied");
        std::size_t feat_dim =
            protein_features ? protein_features->dim : config.protein_feature_dim;
        if (config.protein_feature_dim != 0 && protein_features &&
            protein_features->dim != config.protein_feature_dim)
            throw DimMismatchError("protein feature table dim " +
                                   std::to_string(protein_features->dim) +
                                   " != configured " +
                                   std::to_string(config.protein_feature_dim));
        if (feat_dim == 0) throw SpecError("protein feature dimension unknown");
        params.cfg.protein_feature_dim = feat_dim;
        params.protein_projection = Mat(feat_dim, sd);
        init_glorot(params.protein_projection, rng, feat_dim, sd);

        params.protein_fallback_row.assign(n_prots, -1);
        std::size_t missing = 0;
        for (std::uint32_t i = 0; i < n_prots; ++i) {
            if (!protein_features || !protein_features->find(i)) {
                if (!config.missing_feature_fallback)
                    throw MissingFeatureError("protein " + graph.name({EntityKind::Protein, i}) +
                                              " lacks a feature vector");
                params.protein_fallback_row[i] = static_cast<std::int32_t>(missing++);
            }
        }
        params.protein_fallback = Mat(missing, sd);
        init_embedding(params.protein_fallback, rng);
    } else {
        params.protein_embeddings = Mat(n_prots, sd);
        init_embedding(params.protein_embeddings, rng);
        params.protein_fallback_row.assign(n_prots, -1);
    }

    params.indication_embeddings = Mat(n_inds, config.indication_init_dim);
    init_embedding(params.indication_embeddings, rng);
    params.indication_projection = Mat(config.indication_init_dim, sd);
    init_glorot(params.indication_projection, rng, config.indication_init_dim, sd);

    for (std::size_t l = 0; l < config.layers; ++l) {
        params.layer_w.emplace_back(sd, 2 * sd);
        init_glorot(params.layer_w.back(), rng, 2 * sd, sd);
        params.layer_b.emplace_back(sd, 0.0);
    }
    for (LinkHead* head : {&params.head_dp, &params.head_di}) {
        head->w1 = Mat(sd, 2 * sd);
        init_glorot(head->w1, rng, 2 * sd, sd);
        head->b1.assign(sd, 0.0);
        head->w2 = Mat(1, sd);
        init_glorot(head->w2, rng, sd, 1);
        head->b2.assign(1, 0.0);
    }
    return params;
}

NodeStates encode_nodes(const TopoParams& params, const TrainGraph& train_graph,
                        const FeatureTable* protein_features, const FeatureTable* drug_features) {
    return forward_encode(params, train_graph, protein_features, drug_features).states.back();
}

double predict_link(const TopoParams& params, const Vec& z_u, const Vec& z_v,
                    RelationId relation) {
    return sigmoid(head_forward(head_for(params, relation), z_u, z_v).logit);
}

std::vector<std::span<double>> parameter_views(TopoParams& params) {
    std::vector<std::span<double>> views;
    auto add_mat = [&](Mat& m) {
        if (!m.empty()) views.emplace_back(m.data);
    };
    auto add_vec = [&](Vec& v) {
        if (!v.empty()) views.emplace_back(v);
    };
    add_mat(params.drug_embeddings);
    add_mat(params.drug_projection);
    add_mat(params.protein_projection);
    add_mat(params.protein_embeddings);
    add_mat(params.protein_fallback);
    add_mat(params.indication_embeddings);
    add_mat(params.indication_projection);
    for (Mat& w : params.layer_w) add_mat(w);
    for (Vec& b : params.layer_b) add_vec(b);
    for (LinkHead* head : {&params.head_dp, &params.head_di}) {
        add_mat(head->w1);
        add_vec(head->b1);
        add_mat(head->w2);
        add_vec(head->b2);
    }
    return views;
}

TopoParams make_zero_like(const TopoParams& params) {
    TopoParams zero = params;
    for (auto view : parameter_views(zero)) std::fill(view.begin(), view.end(), 0.0);
    return zero;
}

double bce_forward_backward(const TopoParams& params, const TrainGraph& tg,
                            const FeatureTable* protein_features,
                            const FeatureTable* drug_features,
                            const std::vector<Triple>& positives,
                            const std::vector<Triple>& negatives, TopoParams* grads) {
    const TopoConfig& cfg = params.cfg;
    const std::size_t sd = cfg.shared_dim;
    const std::size_t n_pairs = positives.size() + negatives.size();
    if (n_pairs == 0) throw DataError("empty batch");
    const double inv_n = 1.0 / static_cast<double>(n_pairs);

    ForwardTrace trace = forward_encode(params, tg, protein_features, drug_features);
    const NodeStates& z = trace.states.back();

    // dLoss/dz for the final layer, accumulated across pairs.
    NodeStates dz;
    if (grads)
        for (std::size_t k = 0; k < kKindCount; ++k)
            dz.h[k].assign(z.h[k].size(), Vec(sd, 0.0));

    double loss = 0.0;
    auto process = [&](const Triple& t, double y) {
        const LinkHead& head = head_for(params, t.relation);
        HeadTrace ht = head_forward(head, z.of(t.head), z.of(t.tail));
        loss += bce_from_logit(ht.logit, y) * inv_n;
        if (!grads) return;
        const double g = (sigmoid(ht.logit) - y) * inv_n;  // d(mean loss)/d logit
        LinkHead& gh = head_for(*grads, t.relation);
        gh.b2[0] += g;
        Vec dhidden(sd, 0.0);
        for (std::size_t j = 0; j < sd; ++j) {
            gh.w2(0, j) += g * ht.hidden[j];
            if (ht.hidden[j] > 0.0) dhidden[j] = g * head.w2(0, j);
        }
        Vec dx(2 * sd, 0.0);
        for (std::size_t j = 0; j < sd; ++j) {
            if (dhidden[j] == 0.0) continue;
            gh.b1[j] += dhidden[j];
            auto w1_row = head.w1.row(j);
            auto gw1_row = gh.w1.row(j);
            for (std::size_t a = 0; a < 2 * sd; ++a) {
                gw1_row[a] += dhidden[j] * ht.x[a];
                dx[a] += dhidden[j] * w1_row[a];
            }
        }
        axpy(1.0, {dx.data(), sd}, dz.of(t.head));
        axpy(1.0, {dx.data() + sd, sd}, dz.of(t.tail));
    };
    for (const Triple& t : positives) process(t, 1.0);
    for (const Triple& t : negatives) process(t, 0.0);
    if (!grads) return loss;

    // Reverse through the message-passing layers.
    NodeStates dcur = std::move(dz);
    for (std::size_t l = cfg.layers; l-- > 0;) {
        const NodeStates& out = trace.states[l + 1];
        const NodeStates& cat = trace.cats[l];
        const Mat& w = params.layer_w[l];
        Mat& gw = grads->layer_w[l];
        Vec& gb = grads->layer_b[l];
        NodeStates dprev;
        for (std::size_t k = 0; k < kKindCount; ++k)
            dprev.h[k].assign(dcur.h[k].size(), Vec(sd, 0.0));
        for (std::size_t k = 0; k < kKindCount; ++k) {
            for (std::size_t i = 0; i < dcur.h[k].size(); ++i) {
                const Vec& delta = dcur.h[k][i];
                const Vec& out_i = out.h[k][i];
                const Vec& cat_i = cat.h[k][i];
                Vec dcat(2 * sd, 0.0);
                bool any = false;
                for (std::size_t j = 0; j < sd; ++j) {
                    if (delta[j] == 0.0 || out_i[j] <= 0.0) continue;
                    any = true;
                    gb[j] += delta[j];
                    auto w_row = w.row(j);
                    auto gw_row = gw.row(j);
                    for (std::size_t a = 0; a < 2 * sd; ++a) {
                        gw_row[a] += delta[j] * cat_i[a];
                        dcat[a] += delta[j] * w_row[a];
                    }
                }
                if (!any) continue;
                axpy(1.0, {dcat.data(), sd}, dprev.h[k][i]);
                const auto& nbrs = tg.neighbors[k][i];
                if (!nbrs.empty()) {
                    const double inv_deg = 1.0 / static_cast<double>(nbrs.size());
                    for (const EntityId& v : nbrs)
                        axpy(inv_deg, {dcat.data() + sd, sd}, dprev.of(v));
                }
            }
        }
        dcur = std::move(dprev);
    }

    // Layer-0 gradients into embeddings and projections.
    const auto drug_k = static_cast<std::size_t>(EntityKind::Drug);
    for (std::size_t i = 0; i < dcur.h[drug_k].size(); ++i) {
        const Vec& delta = dcur.h[drug_k][i];
        if (cfg.drug_mode == DrugMode::LearnableEmbedding) {
            axpy(1.0, delta, grads->drug_embeddings.row(i));
        } else {
            const Vec& f = *drug_features->find(static_cast<std::uint32_t>(i));
            for (std::size_t a = 0; a < params.drug_feature_dim; ++a)
                axpy(f[a], delta, grads->drug_projection.row(a));
        }
    }
    const auto prot_k = static_cast<std::size_t>(EntityKind::Protein);
    for (std::size_t i = 0; i < dcur.h[prot_k].size(); ++i) {
        const Vec& delta = dcur.h[prot_k][i];
        if (!cfg.use_protein_features) {
            axpy(1.0, delta, grads->protein_embeddings.row(i));
            continue;
        }
        const Vec* f =
            protein_features ? protein_features->find(static_cast<std::uint32_t>(i)) : nullptr;
        if (f) {
            for (std::size_t a = 0; a < f->size(); ++a)
                axpy((*f)[a], delta, grads->protein_projection.row(a));
        } else {
            std::int32_t row = params.protein_fallback_row[i];
            axpy(1.0, delta, grads->protein_fallback.row(static_cast<std::size_t>(row)));
        }
    }
    const auto ind_k = static_cast<std::size_t>(EntityKind::Indication);
    for (std::size_t i = 0; i < dcur.h[ind_k].size(); ++i) {
        const Vec& delta = dcur.h[ind_k][i];
        auto e = params.indication_embeddings.row(i);
        auto ge = grads->indication_embeddings.row(i);
        for (std::size_t a = 0; a < cfg.indication_init_dim; ++a) {
            axpy(e[a], delta, grads->indication_projection.row(a));
            ge[a] += dot(params.indication_projection.row(a), delta);
        }
    }
    return loss;
}

double bce_step(TopoParams& params, const TrainGraph& train_graph,
                const FeatureTable* protein_features, const FeatureTable* drug_features,
                const std::vector<Triple>& positives, const std::vector<Triple>& negatives) {
    TopoParams grads = make_zero_like(params);
    double loss = bce_forward_backward(params, train_graph, protein_features, drug_features,
                                       positives, negatives, &grads);
    if (!std::isfinite(loss)) throw DivergenceError("non-finite BCE loss");
    auto pv = parameter_views(params);
    auto gv = parameter_views(grads);
    for (std::size_t i = 0; i < pv.size(); ++i)
        axpy(-params.cfg.learning_rate, gv[i], pv[i]);
    return loss;
}

namespace {

MixSpec mix_for(RelationId relation, std::size_t batch, const TopoTrainOptions& options) {
    if (options.pool == nullptr) return MixSpec::random_only(relation, batch);
    const auto& override_props =
        relation == kDrugProtein ? options.dp_proportions : options.di_proportions;
    MixSpec spec = relation == kDrugProtein ? MixSpec::drug_protein_default(batch)
                                            : MixSpec::drug_indication_default(batch);
    if (!override_props.empty()) spec.proportions = override_props;
    return spec;
}

}  // namespace

TopoTrainResult train_topo(const KnowledgeGraph& graph, const std::vector<Triple>& train_edges,
                           const TopoConfig& config, const FeatureTable* protein_features,
                           const FeatureTable* drug_features, const TopoTrainOptions& options) {
    config.validate();
    if (train_edges.empty()) throw DataError("training edge set is empty");

    TopoTrainResult result;
    result.params = init_topo_params(graph, config, protein_features, drug_features);
    TrainGraph tg = TrainGraph::build(graph, train_edges);
    ActiveNodes active = ActiveNodes::from_edges(train_edges);

    std::vector<RelationId> relations;
    std::array<std::size_t, 2> rel_counts{0, 0};
    for (const Triple& t : train_edges)
        if (t.relation < 2) ++rel_counts[t.relation];
    for (RelationId r = 0; r < 2; ++r)
        if (rel_counts[r] > 0) relations.push_back(r);

    // Fixed validation negatives so the early-stop signal is comparable
    // across epochs.
    std::vector<Triple> val_neg;
    const bool early_stop = options.validation && !options.validation->empty() &&
                            config.early_stop_patience > 0;
    if (early_stop) {
        Rng vrng = derive_rng(config.seed, 1234);
        std::array<std::size_t, 2> val_counts{0, 0};
        for (const Triple& t : *options.validation)
            if (t.relation < 2) ++val_counts[t.relation];
        for (RelationId r = 0; r < 2; ++r) {
            if (val_counts[r] == 0) continue;
            auto batch = sample_mixed(NegativePool{}, graph, active,
                                      MixSpec::random_only(r, val_counts[r]), vrng);
            val_neg.insert(val_neg.end(), batch.begin(), batch.end());
        }
    }

    Rng rng = derive_rng(config.seed, 7);
    NegativePool empty_pool;
    const NegativePool& pool = options.pool ? *options.pool : empty_pool;

    TopoParams best;
    double best_val = -1.0;
    std::size_t best_epoch = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<Triple> negatives;
        negatives.reserve(train_edges.size() * config.negatives_per_positive);
        for (RelationId r : relations) {
            MixSpec spec =
                mix_for(r, rel_counts[r] * config.negatives_per_positive, options);
            auto batch = sample_mixed(pool, graph, active, spec, rng);
            negatives.insert(negatives.end(), batch.begin(), batch.end());
        }
        double loss = bce_step(result.params, tg, protein_features, drug_features, train_edges,
                               negatives);
        result.loss_trace.push_back(loss);
        result.stopped_epoch = epoch + 1;

        if (early_stop) {
            NodeStates z = encode_nodes(result.params, tg, protein_features, drug_features);
            ScoredSet set;
            auto score_into = [&](const std::vector<Triple>& triples, int label) {
                for (const Triple& t : triples) {
                    set.scores.push_back(
                        predict_link(result.params, z.of(t.head), z.of(t.tail), t.relation));
                    set.labels.push_back(label);
                }
            };
            score_into(*options.validation, 1);
            score_into(val_neg, 0);
            double val_pr = pr_auc(set);
            result.val_pr_trace.push_back(val_pr);
            if (val_pr > best_val) {
                best_val = val_pr;
                best = result.params;
                best_epoch = epoch;
            } else if (epoch - best_epoch >= config.early_stop_patience) {
                result.params = best;
                break;
            }
        }
    }
    if (early_stop && best_val >= 0.0 && result.stopped_epoch == config.epochs)
        result.params = best;
    return result;
}

std::vector<NovelPrediction> top_k_novel(const TopoParams& params, const KnowledgeGraph& graph,
                                         const std::vector<Triple>& train_edges,
                                         const FeatureTable* protein_features,
                                         const FeatureTable* drug_features, RelationId relation,
                                         std::size_t k) {
    TrainGraph tg = TrainGraph::build(graph, train_edges);
    NodeStates z = encode_nodes(params, tg, protein_features, drug_features);
    const RelationDef& def = graph.relation(relation);

    std::set<std::uint64_t> train_positive;
    for (const Triple& t : train_edges)
        if (t.relation == relation)
            train_positive.insert((static_cast<std::uint64_t>(t.head.index) << 32) |
                                  t.tail.index);

    std::vector<NovelPrediction> all;
    const std::size_t n_drugs = graph.entity_count(def.head_kind);
    const std::size_t n_tails = graph.entity_count(def.tail_kind);
    for (std::uint32_t d = 0; d < n_drugs; ++d) {
        for (std::uint32_t t = 0; t < n_tails; ++t) {
            if (train_positive.count((static_cast<std::uint64_t>(d) << 32) | t)) continue;
            EntityId drug{def.head_kind, d};
            EntityId tail{def.tail_kind, t};
            all.push_back(
                {drug, tail, predict_link(params, z.of(drug), z.of(tail), relation)});
        }
    }
    std::sort(all.begin(), all.end(), [](const NovelPrediction& a, const NovelPrediction& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        if (a.drug.index != b.drug.index) return a.drug.index < b.drug.index;
        return a.tail.index < b.tail.index;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

std::size_t count_parameters(const TopoParams& params) {
    std::size_t n = 0;
    for (auto view : parameter_views(const_cast<TopoParams&>(params))) n += view.size();
    return n;
}

Checkpoint topo_to_checkpoint(const TopoParams& params, std::uint64_t registry_hash) {
    Checkpoint ckpt;
    ckpt.model_tag = "topo";
    ckpt.registry_hash = registry_hash;
    const TopoConfig& cfg = params.cfg;
    ckpt.meta = {
        {"shared_dim", std::to_string(cfg.shared_dim)},
        {"layers", std::to_string(cfg.layers)},
        {"protein_feature_dim", std::to_string(cfg.protein_feature_dim)},
        {"indication_init_dim", std::to_string(cfg.indication_init_dim)},
        {"drug_mode", to_string(cfg.drug_mode)},
        {"use_protein_features", cfg.use_protein_features ? "1" : "0"},
        {"drug_feature_dim", std::to_string(params.drug_feature_dim)},
    };
    auto add = [&](const std::string& name, const Mat& m) {
        if (!m.empty()) ckpt.tables.push_back({name, m});
    };
    add("drug_embeddings", params.drug_embeddings);
    add("drug_projection", params.drug_projection);
    add("protein_projection", params.protein_projection);
    add("protein_embeddings", params.protein_embeddings);
    add("protein_fallback", params.protein_fallback);
    if (!params.protein_fallback_row.empty()) {
        Mat rows(1, params.protein_fallback_row.size());
        for (std::size_t i = 0; i < rows.cols; ++i)
            rows(0, i) = static_cast<double>(params.protein_fallback_row[i]);
        ckpt.tables.push_back({"protein_fallback_index", std::move(rows)});
    }
    add("indication_embeddings", params.indication_embeddings);
    add("indication_projection", params.indication_projection);
    for (std::size_t l = 0; l < params.layer_w.size(); ++l) {
        add("layer_w_" + std::to_string(l), params.layer_w[l]);
        Mat b(1, params.layer_b[l].size());
        std::copy(params.layer_b[l].begin(), params.layer_b[l].end(), b.data.begin());
        ckpt.tables.push_back({"layer_b_" + std::to_string(l), std::move(b)});
    }
    auto add_head = [&](const std::string& prefix, const LinkHead& head) {
        add(prefix + "_w1", head.w1);
        Mat b1(1, head.b1.size());
        std::copy(head.b1.begin(), head.b1.end(), b1.data.begin());
        ckpt.tables.push_back({prefix + "_b1", std::move(b1)});
        add(prefix + "_w2", head.w2);
        Mat b2(1, 1);
        b2(0, 0) = head.b2[0];
        ckpt.tables.push_back({prefix + "_b2", std::move(b2)});
    };
    add_head("head_dp", params.head_dp);
    add_head("head_di", params.head_di);
    return ckpt;
}

TopoParams topo_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.model_tag != "topo") throw CheckpointError("checkpoint is not a topo model");
    TopoParams params;
    TopoConfig cfg;
    cfg.shared_dim = std::stoul(ckpt.meta_value("shared_dim"));
    cfg.layers = std::stoul(ckpt.meta_value("layers"));
    cfg.protein_feature_dim = std::stoul(ckpt.meta_value("protein_feature_dim"));
    cfg.indication_init_dim = std::stoul(ckpt.meta_value("indication_init_dim"));
    cfg.drug_mode = ckpt.meta_value("drug_mode") == std::string("fixed")
                        ? DrugMode::FixedVector
                        : DrugMode::LearnableEmbedding;
    cfg.use_protein_features = ckpt.meta_value("use_protein_features") == "1";
    params.cfg = cfg;
    params.drug_feature_dim = std::stoul(ckpt.meta_value("drug_feature_dim"));

    auto take = [&](const std::string& name, Mat& dst) {
        if (ckpt.has_table(name)) dst = ckpt.table(name);
    };
    take("drug_embeddings", params.drug_embeddings);
    take("drug_projection", params.drug_projection);
    take("protein_projection", params.protein_projection);
    take("protein_embeddings", params.protein_embeddings);
    take("protein_fallback", params.protein_fallback);
    if (ckpt.has_table("protein_fallback_index")) {
        const Mat& rows = ckpt.table("protein_fallback_index");
        params.protein_fallback_row.resize(rows.cols);
        for (std::size_t i = 0; i < rows.cols; ++i)
            params.protein_fallback_row[i] = static_cast<std::int32_t>(rows(0, i));
    }
    take("indication_embeddings", params.indication_embeddings);
    take("indication_projection", params.indication_projection);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        params.layer_w.push_back(ckpt.table("layer_w_" + std::to_string(l)));
        const Mat& b = ckpt.table("layer_b_" + std::to_string(l));
        params.layer_b.emplace_back(b.data.begin(), b.data.end());
    }
    auto take_head = [&](const std::string& prefix, LinkHead& head) {
        head.w1 = ckpt.table(prefix + "_w1");
        const Mat& b1 = ckpt.table(prefix + "_b1");
        head.b1.assign(b1.data.begin(), b1.data.end());
        head.w2 = ckpt.table(prefix + "_w2");
        head.b2.assign(1, ckpt.table(prefix + "_b2")(0, 0));
    };
    take_head("head_dp", params.head_dp);
    take_head("head_di", params.head_di);
    return params;
}

}  // namespace kgbench
