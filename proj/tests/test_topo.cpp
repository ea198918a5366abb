#include <cmath>
#include <filesystem>

#include "doctest.h"

#include "helpers.hpp"
#include "kgbench/errors.hpp"
#include "kgbench/ingest.hpp"
#include "kgbench/topo.hpp"

using namespace kgbench;

namespace {

struct Toy {
    KnowledgeGraph g;
    std::vector<Triple> train;
    TrainGraph tg;
};

// Small tri-modal graph: a path plus a few extras.
Toy toy_graph() {
    Toy toy;
    toy.g.add_triple("d0", kDrugProtein, "p0", 2000);
    toy.g.add_triple("d1", kDrugProtein, "p0", 2000);
    toy.g.add_triple("d1", kDrugIndication, "i0", 2000);
    toy.g.add_triple("d2", kDrugIndication, "i0", 2000);
    toy.g.add_triple("d2", kDrugProtein, "p1", 2000);
    toy.g.add_triple("d3", kDrugProtein, "p2", 2000);  // disconnected pair
    toy.g.intern("d4", EntityKind::Drug);              // isolated drug
    toy.g.freeze();
    toy.train = toy.g.edges();
    toy.tg = TrainGraph::build(toy.g, toy.train);
    return toy;
}

TopoConfig small_config(std::size_t sd = 4, std::size_t layers = 1) {
    TopoConfig c;
    c.shared_dim = sd;
    c.layers = layers;
    c.indication_init_dim = 3;
    c.use_protein_features = false;
    c.seed = 17;
    return c;
}

double fd_slot(const TopoParams& params, const Toy& toy, const std::vector<Triple>& pos,
               const std::vector<Triple>& neg, double* slot) {
    const double h = 1e-6;
    const double orig = *slot;
    *slot = orig + h;
    double up = bce_forward_backward(params, toy.tg, nullptr, nullptr, pos, neg, nullptr);
    *slot = orig - h;
    double down = bce_forward_backward(params, toy.tg, nullptr, nullptr, pos, neg, nullptr);
    *slot = orig;
    return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("neighbor aggregation takes the plain mean") {
    // d0 has neighbors p0 (1,1) and i0 (3,3); with W selecting the message
    // half and a linear-friendly positive input, the output is the mean.
    KnowledgeGraph g;
    g.add_triple("d0", kDrugProtein, "p0", 2000);
    g.add_triple("d0", kDrugIndication, "i0", 2000);
    g.freeze();
    TrainGraph tg = TrainGraph::build(g, g.edges());

    TopoConfig c = small_config(2, 1);
    TopoParams params = init_topo_params(g, c, nullptr, nullptr);
    params.drug_embeddings.fill(0.0);
    params.protein_embeddings.fill(0.0);
    params.protein_embeddings(0, 0) = 1.0;
    params.protein_embeddings(0, 1) = 1.0;
    // Indication layer-0 must equal (3,3): identity-ish projection.
    params.indication_embeddings.fill(0.0);
    params.indication_embeddings(0, 0) = 3.0;
    params.indication_projection.fill(0.0);
    params.indication_projection(0, 0) = 1.0;
    params.indication_projection(0, 1) = 1.0;
    // W = [0 | I], b = 0: output is relu(mean message).
    params.layer_w[0].fill(0.0);
    params.layer_w[0](0, 2) = 1.0;
    params.layer_w[0](1, 3) = 1.0;
    params.layer_b[0].assign(2, 0.0);

    NodeStates z = encode_nodes(params, tg, nullptr, nullptr);
    const Vec& zd = z.of(*g.find_entity("d0"));
    CHECK(zd[0] == doctest::Approx(2.0));
    CHECK(zd[1] == doctest::Approx(2.0));
}

TEST_CASE("isolated nodes aggregate the zero vector") {
    Toy toy = toy_graph();
    TopoConfig c = small_config(3, 1);
    TopoParams params = init_topo_params(toy.g, c, nullptr, nullptr);
    // W = [I | I]: output = relu(h + message); for the isolated drug the
    // message is zero, so z = relu(h0).
    params.layer_w[0].fill(0.0);
    for (int j = 0; j < 3; ++j) {
        params.layer_w[0](j, j) = 1.0;
        params.layer_w[0](j, 3 + j) = 1.0;
    }
    params.layer_b[0].assign(3, 0.0);
    NodeStates z = encode_nodes(params, toy.tg, nullptr, nullptr);
    EntityId d4 = *toy.g.find_entity("d4");
    auto h0 = params.drug_embeddings.row(d4.index);
    for (int j = 0; j < 3; ++j)
        CHECK(z.of(d4)[j] == doctest::Approx(std::max(0.0, h0[j])));
}

TEST_CASE("zero layers returns the projected inputs") {
    Toy toy = toy_graph();
    TopoConfig c = small_config(4, 0);
    TopoParams params = init_topo_params(toy.g, c, nullptr, nullptr);
    NodeStates z = encode_nodes(params, toy.tg, nullptr, nullptr);
    EntityId d0 = *toy.g.find_entity("d0");
    for (int j = 0; j < 4; ++j)
        CHECK(z.of(d0)[j] == doctest::Approx(params.drug_embeddings(d0.index, j)));
}

TEST_CASE("link head basics") {
    Toy toy = toy_graph();
    TopoConfig c = small_config();
    TopoParams params = init_topo_params(toy.g, c, nullptr, nullptr);

    Vec zu(4, 0.3), zv(4, -0.2);
    // Zero weights and bias: logistic(0) = 0.5.
    params.head_dp.w1.fill(0.0);
    params.head_dp.b1.assign(4, 0.0);
    params.head_dp.w2.fill(0.0);
    params.head_dp.b2.assign(1, 0.0);
    CHECK(predict_link(params, zu, zv, kDrugProtein) == doctest::Approx(0.5));

    // Range and monotonicity in the output bias.
    Rng rng(23);
    for (int i = 0; i < 30; ++i) {
        for (double& v : zu) v = uniform_real(rng, -3.0, 3.0);
        for (double& v : zv) v = uniform_real(rng, -3.0, 3.0);
        TopoParams p2 = init_topo_params(toy.g, c, nullptr, nullptr);
        double p = predict_link(p2, zu, zv, kDrugProtein);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        p2.head_dp.b2[0] += 0.5;
        CHECK(predict_link(p2, zu, zv, kDrugProtein) > p);
    }
}

TEST_CASE("uniform 0.5 predictions give ln 2 loss") {
    Toy toy = toy_graph();
    TopoConfig c = small_config();
    TopoParams params = init_topo_params(toy.g, c, nullptr, nullptr);
    for (LinkHead* head : {&params.head_dp, &params.head_di}) {
        head->w1.fill(0.0);
        head->b1.assign(head->b1.size(), 0.0);
        head->w2.fill(0.0);
        head->b2.assign(1, 0.0);
    }
    std::vector<Triple> pos = toy.train;
    std::vector<Triple> neg = {Triple{*toy.g.find_entity("d3"), kDrugProtein,
                                      *toy.g.find_entity("p0"), kUnknownYear}};
    double loss = bce_forward_backward(params, toy.tg, nullptr, nullptr, pos, neg, nullptr);
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match finite differences on toy graphs") {
    Toy toy = toy_graph();
    Rng rng(71);
    int instances = 0;
    for (int round = 0; round < 12; ++round) {
        TopoConfig c = small_config(2 + uniform_index(rng, 3), 1 + uniform_index(rng, 2));
        c.seed = rng();
        TopoParams params = init_topo_params(toy.g, c, nullptr, nullptr);
        // Jitter the zero-initialized biases to a generic position: exact-zero
        // pre-activations sit on the relu kink, where central differences and
        // the zero-branch subgradient legitimately disagree.
        for (Vec& b : params.layer_b)
            for (double& v : b) v = uniform_real(rng, -0.05, 0.05);
        for (LinkHead* head : {&params.head_dp, &params.head_di}) {
            for (double& v : head->b1) v = uniform_real(rng, -0.05, 0.05);
            head->b2[0] = uniform_real(rng, -0.05, 0.05);
        }

        std::vector<Triple> pos, neg;
        for (int i = 0; i < 3; ++i)
            pos.push_back(toy.train[uniform_index(rng, toy.train.size())]);
        neg.push_back(Triple{*toy.g.find_entity("d0"), kDrugProtein, *toy.g.find_entity("p2"),
                             kUnknownYear});
        neg.push_back(Triple{*toy.g.find_entity("d3"), kDrugIndication, *toy.g.find_entity("i0"),
                             kUnknownYear});

        TopoParams grads = make_zero_like(params);
        bce_forward_backward(params, toy.tg, nullptr, nullptr, pos, neg, &grads);

        auto pviews = parameter_views(params);
        auto gviews = parameter_views(grads);
        REQUIRE(pviews.size() == gviews.size());
        double worst = 0.0;
        for (std::size_t v = 0; v < pviews.size(); ++v) {
            for (std::size_t i = 0; i < pviews[v].size(); ++i) {
                double fd = fd_slot(params, toy, pos, neg, &pviews[v][i]);
                double analytic = gviews[v][i];
                worst = std::max(worst, std::abs(analytic - fd) /
                                            std::max(std::abs(analytic) + std::abs(fd), 1e-2));
            }
        }
        CHECK(worst < 1e-4);
        ++instances;
    }
    CHECK(instances == 12);
}

TEST_CASE("fixed-vector drug mode trains the projection against features") {
    Toy toy = toy_graph();
    FeatureTable drug_feats;
    drug_feats.kind = EntityKind::Drug;
    drug_feats.dim = 3;
    Rng rng(5);
    for (std::uint32_t i = 0; i < toy.g.entity_count(EntityKind::Drug); ++i) {
        Vec v(3);
        for (double& x : v) x = uniform_real(rng, -1.0, 1.0);
        drug_feats.vectors[i] = v;
    }
    TopoConfig c = small_config(4, 1);
    c.drug_mode = DrugMode::FixedVector;
    TopoParams params = init_topo_params(toy.g, c, nullptr, &drug_feats);
    CHECK(params.drug_projection.rows == 3);
    CHECK(params.drug_embeddings.empty());

    std::vector<Triple> pos = toy.train;
    std::vector<Triple> neg = {Triple{*toy.g.find_entity("d0"), kDrugProtein,
                                      *toy.g.find_entity("p2"), kUnknownYear}};
    TopoParams grads = make_zero_like(params);
    double loss =
        bce_forward_backward(params, toy.tg, nullptr, &drug_feats, pos, neg, &grads);
    CHECK(std::isfinite(loss));

    // Finite-difference spot check on the projection.
    const double h = 1e-6;
    double* slot = &params.drug_projection(1, 2);
    double orig = *slot;
    *slot = orig + h;
    double up = bce_forward_backward(params, toy.tg, nullptr, &drug_feats, pos, neg, nullptr);
    *slot = orig - h;
    double down = bce_forward_backward(params, toy.tg, nullptr, &drug_feats, pos, neg, nullptr);
    *slot = orig;
    double fd = (up - down) / (2.0 * h);
    CHECK(grads.drug_projection(1, 2) == doctest::Approx(fd).epsilon(1e-4));
}

TEST_CASE("protein features flow through the projection with fallback rows") {
    Toy toy = toy_graph();
    FeatureTable feats;
    feats.kind = EntityKind::Protein;
    feats.dim = 5;
    feats.vectors[0] = Vec{1, 0, 0, 0, 0};
    feats.vectors[1] = Vec{0, 1, 0, 0, 0};
    // p2 is missing: it gets a learnable fallback row.
    TopoConfig c = small_config(4, 1);
    c.use_protein_features = true;
    TopoParams params = init_topo_params(toy.g, c, &feats, nullptr);
    CHECK(params.fallback_count() == 1);
    CHECK(params.protein_fallback_row[2] == 0);
    NodeStates z = encode_nodes(params, toy.tg, &feats, nullptr);
    CHECK(z.h[static_cast<std::size_t>(EntityKind::Protein)].size() == 3);

    TopoConfig strict = c;
    strict.missing_feature_fallback = false;
    CHECK_THROWS_AS(init_topo_params(toy.g, strict, &feats, nullptr), MissingFeatureError);
}

TEST_CASE("embedding-only protein mode never touches a feature table") {
    Toy toy = toy_graph();
    TopoConfig c = small_config(4, 2);
    c.use_protein_features = false;
    TopoParams params = init_topo_params(toy.g, c, nullptr, nullptr);
    // nullptr feature tables prove the forward pass reads none.
    NodeStates z = encode_nodes(params, toy.tg, nullptr, nullptr);
    CHECK(z.h[0].size() == toy.g.entity_count(EntityKind::Drug));
    std::vector<Triple> neg = {Triple{*toy.g.find_entity("d0"), kDrugProtein,
                                      *toy.g.find_entity("p2"), kUnknownYear}};
    TopoParams grads = make_zero_like(params);
    CHECK(std::isfinite(
        bce_forward_backward(params, toy.tg, nullptr, nullptr, toy.train, neg, &grads)));
}

TEST_CASE("predictions are invariant under entity relabeling") {
    // Same structure, entities interned in a different order; parameter rows
    // permuted to match. Probabilities must agree.
    KnowledgeGraph a, b;
    a.add_triple("d0", kDrugProtein, "p0", 2000);
    a.add_triple("d1", kDrugProtein, "p0", 2000);
    a.add_triple("d1", kDrugIndication, "i0", 2000);
    a.add_triple("d2", kDrugProtein, "p1", 2000);

    b.add_triple("d2", kDrugProtein, "p1", 2000);
    b.add_triple("d1", kDrugIndication, "i0", 2000);
    b.add_triple("d1", kDrugProtein, "p0", 2000);
    b.add_triple("d0", kDrugProtein, "p0", 2000);
    a.freeze();
    b.freeze();

    TopoConfig c = small_config(4, 2);
    TopoParams pa = init_topo_params(a, c, nullptr, nullptr);
    TopoParams pb = pa;  // same weights; permute the per-entity rows
    for (std::uint32_t i = 0; i < a.entity_count(EntityKind::Drug); ++i) {
        EntityId in_b = *b.find_entity(a.name(EntityId{EntityKind::Drug, i}));
        std::copy(pa.drug_embeddings.row(i).begin(), pa.drug_embeddings.row(i).end(),
                  pb.drug_embeddings.row(in_b.index).begin());
    }
    for (std::uint32_t i = 0; i < a.entity_count(EntityKind::Protein); ++i) {
        EntityId in_b = *b.find_entity(a.name(EntityId{EntityKind::Protein, i}));
        std::copy(pa.protein_embeddings.row(i).begin(), pa.protein_embeddings.row(i).end(),
                  pb.protein_embeddings.row(in_b.index).begin());
    }
    for (std::uint32_t i = 0; i < a.entity_count(EntityKind::Indication); ++i) {
        EntityId in_b = *b.find_entity(a.name(EntityId{EntityKind::Indication, i}));
        std::copy(pa.indication_embeddings.row(i).begin(), pa.indication_embeddings.row(i).end(),
                  pb.indication_embeddings.row(in_b.index).begin());
    }

    TrainGraph ta = TrainGraph::build(a, a.edges());
    TrainGraph tb = TrainGraph::build(b, b.edges());
    NodeStates za = encode_nodes(pa, ta, nullptr, nullptr);
    NodeStates zb = encode_nodes(pb, tb, nullptr, nullptr);
    for (const Triple& t : a.edges()) {
        EntityId hb = *b.find_entity(a.name(t.head));
        EntityId tb_ = *b.find_entity(a.name(t.tail));
        double prob_a = predict_link(pa, za.of(t.head), za.of(t.tail), t.relation);
        double prob_b = predict_link(pb, zb.of(hb), zb.of(tb_), t.relation);
        CHECK(prob_a == doctest::Approx(prob_b).epsilon(1e-9));
    }
}

TEST_CASE("states only depend on nodes within L hops") {
    // Path: d0-p0-d1-i0-d2-p1. Distance d0 -> p1 is 5 > L = 3.
    KnowledgeGraph g;
    g.add_triple("d0", kDrugProtein, "p0", 2000);
    g.add_triple("d1", kDrugProtein, "p0", 2000);
    g.add_triple("d1", kDrugIndication, "i0", 2000);
    g.add_triple("d2", kDrugIndication, "i0", 2000);
    g.add_triple("d2", kDrugProtein, "p1", 2000);
    g.freeze();
    TrainGraph tg = TrainGraph::build(g, g.edges());
    TopoConfig c = small_config(4, 3);
    TopoParams params = init_topo_params(g, c, nullptr, nullptr);
    // All-positive propagation so relu masking cannot hide the near-node
    // dependency: W = [I | I], non-negative layer-0 states.
    for (Mat& w : params.layer_w) {
        w.fill(0.0);
        for (int j = 0; j < 4; ++j) {
            w(j, j) = 1.0;
            w(j, 4 + j) = 1.0;
        }
    }
    for (double& v : params.drug_embeddings.data) v = std::abs(v);
    for (double& v : params.protein_embeddings.data) v = std::abs(v);
    for (double& v : params.indication_embeddings.data) v = std::abs(v);
    for (double& v : params.indication_projection.data) v = std::abs(v);

    EntityId d0 = *g.find_entity("d0");
    EntityId p1 = *g.find_entity("p1");
    EntityId i0 = *g.find_entity("i0");
    NodeStates before = encode_nodes(params, tg, nullptr, nullptr);

    TopoParams poked = params;
    for (std::size_t j = 0; j < 4; ++j)
        poked.protein_embeddings(p1.index, j) += 1.0;  // distance 5 from d0
    NodeStates after = encode_nodes(poked, tg, nullptr, nullptr);
    CHECK(after.of(d0) == before.of(d0));

    TopoParams poked_near = params;
    poked_near.indication_embeddings(i0.index, 0) += 1.0;  // distance 3 from d0
    NodeStates after_near = encode_nodes(poked_near, tg, nullptr, nullptr);
    CHECK(after_near.of(d0) != before.of(d0));
}

TEST_CASE("training memorizes a 20-edge graph") {
    Rng rng(91);
    KnowledgeGraph g;
    int added = 0;
    while (added < 20) {
        std::string d = kgtest::eid("d", uniform_index(rng, 8));
        bool dp = coin(rng);
        std::string tail = dp ? kgtest::eid("p", uniform_index(rng, 6))
                              : kgtest::eid("i", uniform_index(rng, 6));
        std::size_t before = g.edges().size();
        g.add_triple(d, dp ? kDrugProtein : kDrugIndication, tail, 2000);
        if (g.edges().size() > before) ++added;
    }
    g.freeze();

    TopoConfig c;
    c.shared_dim = 16;
    c.layers = 2;
    c.indication_init_dim = 8;
    c.use_protein_features = false;
    c.learning_rate = 1.0;
    c.epochs = 200;
    c.early_stop_patience = 0;
    c.seed = 13;
    TopoTrainOptions options;  // random-only negatives
    TopoTrainResult result = train_topo(g, g.edges(), c, nullptr, nullptr, options);
    CHECK(result.loss_trace.back() < 0.05);
}

TEST_CASE("training is deterministic and top-k output is stable") {
    Toy toy = toy_graph();
    TopoConfig c = small_config(4, 2);
    c.epochs = 15;
    c.learning_rate = 0.3;
    c.early_stop_patience = 0;
    TopoTrainOptions options;
    TopoTrainResult a = train_topo(toy.g, toy.train, c, nullptr, nullptr, options);
    TopoTrainResult b = train_topo(toy.g, toy.train, c, nullptr, nullptr, options);
    CHECK(a.loss_trace == b.loss_trace);

    auto preds_a = top_k_novel(a.params, toy.g, toy.train, nullptr, nullptr, kDrugProtein, 5);
    auto preds_b = top_k_novel(b.params, toy.g, toy.train, nullptr, nullptr, kDrugProtein, 5);
    REQUIRE(preds_a.size() == preds_b.size());
    for (std::size_t i = 0; i < preds_a.size(); ++i) {
        CHECK(preds_a[i].drug == preds_b[i].drug);
        CHECK(preds_a[i].tail == preds_b[i].tail);
        CHECK(preds_a[i].probability == preds_b[i].probability);
    }
}

TEST_CASE("top-k filters training positives and respects k") {
    Toy toy = toy_graph();
    TopoConfig c = small_config(4, 1);
    TopoParams params = init_topo_params(toy.g, c, nullptr, nullptr);

    CHECK(top_k_novel(params, toy.g, toy.train, nullptr, nullptr, kDrugProtein, 0).empty());

    std::size_t n_drugs = toy.g.entity_count(EntityKind::Drug);
    std::size_t n_prots = toy.g.entity_count(EntityKind::Protein);
    std::size_t n_train_dp = 0;
    for (const Triple& t : toy.train)
        if (t.relation == kDrugProtein) ++n_train_dp;
    auto all = top_k_novel(params, toy.g, toy.train, nullptr, nullptr, kDrugProtein, 1000000);
    CHECK(all.size() == n_drugs * n_prots - n_train_dp);
    for (const NovelPrediction& p : all)
        CHECK_FALSE(toy.g.is_positive(p.drug, kDrugProtein, p.tail));
    for (std::size_t i = 1; i < all.size(); ++i)
        CHECK(all[i - 1].probability >= all[i].probability);
}

TEST_CASE("topo checkpoints round trip bit-exactly") {
    Toy toy = toy_graph();
    FeatureTable feats;
    feats.kind = EntityKind::Protein;
    feats.dim = 5;
    feats.vectors[0] = Vec{1, 0, 0, 0, 0.5};
    feats.vectors[1] = Vec{0, 1, 0, 0.25, 0};
    TopoConfig c = small_config(4, 2);
    c.use_protein_features = true;
    c.epochs = 8;
    c.learning_rate = 0.2;
    c.early_stop_patience = 0;
    TopoTrainOptions options;
    TopoTrainResult result = train_topo(toy.g, toy.train, c, &feats, nullptr, options);

    auto path = std::filesystem::temp_directory_path() / "kgbench_test_topo.ckpt";
    save_checkpoint(path, topo_to_checkpoint(result.params, toy.g.registry_hash()));
    TopoParams back = topo_from_checkpoint(load_checkpoint(path));

    TopoParams& orig = result.params;
    CHECK(back.cfg.shared_dim == orig.cfg.shared_dim);
    CHECK(back.cfg.layers == orig.cfg.layers);
    CHECK(back.protein_projection.data == orig.protein_projection.data);
    CHECK(back.protein_fallback.data == orig.protein_fallback.data);
    CHECK(back.protein_fallback_row == orig.protein_fallback_row);
    CHECK(back.indication_embeddings.data == orig.indication_embeddings.data);
    for (std::size_t l = 0; l < orig.layer_w.size(); ++l) {
        CHECK(back.layer_w[l].data == orig.layer_w[l].data);
        CHECK(back.layer_b[l] == orig.layer_b[l]);
    }
    CHECK(back.head_dp.w1.data == orig.head_dp.w1.data);
    CHECK(back.head_di.w2.data == orig.head_di.w2.data);

    // Same predictions from the reloaded params.
    NodeStates z1 = encode_nodes(orig, toy.tg, &feats, nullptr);
    NodeStates z2 = encode_nodes(back, toy.tg, &feats, nullptr);
    for (const Triple& t : toy.train)
        CHECK(predict_link(orig, z1.of(t.head), z1.of(t.tail), t.relation) ==
              predict_link(back, z2.of(t.head), z2.of(t.tail), t.relation));
}

TEST_CASE("topo parameter count matches the closed form") {
    Toy toy = toy_graph();  // 5 drugs, 3 proteins, 1 indication
    TopoConfig c = small_config(4, 2);
    c.indication_init_dim = 3;
    TopoParams params = init_topo_params(toy.g, c, nullptr, nullptr);
    const std::size_t sd = 4;
    std::size_t expected = 5 * sd            // drug embeddings
                           + 3 * sd          // protein embeddings
                           + 1 * 3 + 3 * sd  // indication embeddings + projection
                           + 2 * (sd * 2 * sd + sd)        // layers
                           + 2 * (sd * 2 * sd + sd + sd + 1);  // heads
    CHECK(count_parameters(params) == expected);
}
