#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"

#include "json.hpp"

#include "helpers.hpp"
#include "kgbench/errors.hpp"
#include "kgbench/harness.hpp"

using namespace kgbench;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("kgbench_harness_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunConfig synthetic_config(const std::string& out_name, const std::string& model) {
    RunConfig c;
    c.synthetic = true;
    c.synth.n_drugs = c.synth.n_proteins = c.synth.n_indications = 48;
    c.synth.n_blocks = 4;
    c.synth.seed = 7;
    c.synth_feature_dim = 8;
    c.out_dir = fresh_dir(out_name);
    c.model = model;
    c.seed = 7;
    c.kge.family = *parse_kge_family(model == "topo" ? "distmult" : model);
    c.kge.entity_dim = 8;
    c.kge.epochs = 10;
    c.kge.learning_rate = 0.05;
    c.kge.seed = 7;
    c.topo.shared_dim = 8;
    c.topo.layers = 2;
    c.topo.indication_init_dim = 4;
    c.topo.epochs = 10;
    c.topo.learning_rate = 0.3;
    c.topo.early_stop_patience = 0;
    c.topo.seed = 7;
    return c;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

nlohmann::json report_without_timing(const fs::path& path) {
    nlohmann::json j = nlohmann::json::parse(slurp(path));
    j.erase("wall_time_s");
    return j;
}

}  // namespace

TEST_CASE("subsample_training keeps prefixes nested across fractions") {
    Rng rng(3);
    KnowledgeGraph g = kgtest::random_graph(rng);
    std::vector<Triple> edges = g.edges();

    auto all = subsample_training(edges, 1.0, 11);
    CHECK(all.size() == edges.size());

    std::vector<Triple> ten(edges.begin(), edges.begin() + 10);
    CHECK(subsample_training(ten, 0.5, 11).size() == 5);

    auto key = [&](const Triple& t) {
        return (static_cast<std::uint64_t>(t.relation) << 56) |
               (static_cast<std::uint64_t>(t.head.index) << 28) | t.tail.index;
    };
    std::set<std::uint64_t> prev;
    for (double fraction : {0.25, 0.5, 0.75, 1.0}) {
        auto sub = subsample_training(edges, fraction, 11);
        std::set<std::uint64_t> cur;
        for (const Triple& t : sub) cur.insert(key(t));
        CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
        prev = std::move(cur);
    }

    CHECK_THROWS_AS(subsample_training(edges, 0.0, 1), SpecError);
    CHECK_THROWS_AS(subsample_training(edges, 1.5, 1), SpecError);
}

TEST_CASE("benchmark run on synthetic data populates every field and artifact") {
    RunConfig c = synthetic_config("smoke", "distmult");
    BenchmarkOutput out = run_benchmark(c);

    REQUIRE(out.reports.count("drug_protein") == 1);
    REQUIRE(out.reports.count("drug_indication") == 1);
    for (const auto& [name, report] : out.reports) {
        CHECK(report.n_pos > 0);
        CHECK(report.n_neg > 0);
        CHECK(report.pr_auc > 0.0);
        CHECK(report.roc_auc > 0.0);
        CHECK(report.hits.count(1) == 1);
        CHECK(report.hits.count(3) == 1);
        CHECK(report.hits.count(10) == 1);
        CHECK(report.peak_memory_bytes > 0);
        CHECK_FALSE(report.notes.empty());
    }
    CHECK(out.parameter_count > 0);
    CHECK(fs::exists(c.out_dir / "checkpoint.bin"));
    CHECK(fs::exists(c.out_dir / "split_manifest.tsv"));
    CHECK(fs::exists(c.out_dir / "report_drug_protein.json"));
    CHECK(fs::exists(c.out_dir / "report_drug_indication.json"));
    CHECK(fs::exists(c.out_dir / "loss_trace.tsv"));
}

TEST_CASE("identical config and seed reproduce identical non-timing outputs") {
    RunConfig a = synthetic_config("det_a", "transe");
    RunConfig b = synthetic_config("det_b", "transe");
    run_benchmark(a);
    run_benchmark(b);

    for (const char* rel : {"drug_protein", "drug_indication"}) {
        auto ja = report_without_timing(a.out_dir / (std::string("report_") + rel + ".json"));
        auto jb = report_without_timing(b.out_dir / (std::string("report_") + rel + ".json"));
        CHECK(ja == jb);
    }
    CHECK(slurp(a.out_dir / "checkpoint.bin") == slurp(b.out_dir / "checkpoint.bin"));
    CHECK(slurp(a.out_dir / "loss_trace.tsv") == slurp(b.out_dir / "loss_trace.tsv"));
    CHECK(slurp(a.out_dir / "split_manifest.tsv") == slurp(b.out_dir / "split_manifest.tsv"));
}

TEST_CASE("missing negatives with a verified-tier mix surfaces PoolExhausted") {
    Rng rng(5);
    KnowledgeGraph g = kgtest::random_graph(rng);
    auto edges_path = fs::temp_directory_path() / "kgbench_harness_nopool_edges.tsv";
    write_edges(g, edges_path);

    RunConfig c;
    c.edge_paths = {edges_path.string()};
    c.out_dir = fresh_dir("nopool");
    c.model = "topo";
    c.topo.shared_dim = 4;
    c.topo.layers = 1;
    c.topo.epochs = 2;
    c.topo.use_protein_features = false;
    c.topo.early_stop_patience = 0;
    c.seed = 1;
    try {
        run_benchmark(c);
        FAIL("expected PoolExhaustedError");
    } catch (const PoolExhaustedError& e) {
        CHECK(std::string(e.what()).find("negatives file") != std::string::npos);
    }
}

TEST_CASE("audit assertions fire on mismatching counts") {
    RunConfig c = synthetic_config("audit", "distmult");
    c.audit_dp_train = 1;  // wrong on purpose
    CHECK_THROWS_AS(run_benchmark(c), DataError);
}

TEST_CASE("param-scaling sweep yields increasing counts and records cell errors") {
    RunConfig c = synthetic_config("sweep_param", "distmult");
    c.shared_dims = {4, 8, 7};  // 7 is odd: fine for distmult
    SweepReport report = run_sweep(c, SweepTrack::ParamScaling);
    REQUIRE(report.cells.size() == 3);
    CHECK(report.cells[0].ok());
    CHECK(report.cells[1].ok());
    CHECK(report.cells[1].parameter_count > report.cells[0].parameter_count);
    CHECK(fs::exists(c.out_dir / "sweep_report.json"));

    // An odd dimension breaks rotate; the sweep must continue and record it.
    RunConfig r = synthetic_config("sweep_rotate", "rotate");
    r.kge.epochs = 3;
    r.shared_dims = {4, 5, 8};
    SweepReport rr = run_sweep(r, SweepTrack::ParamScaling);
    REQUIRE(rr.cells.size() == 3);
    CHECK(rr.cells[0].ok());
    CHECK_FALSE(rr.cells[1].ok());
    CHECK(rr.cells[2].ok());
}

TEST_CASE("data-scaling sweep cell train counts scale with the fraction") {
    RunConfig c = synthetic_config("sweep_data", "distmult");
    c.data_fractions = {0.25, 1.0};
    SweepReport report = run_sweep(c, SweepTrack::DataScaling);
    REQUIRE(report.cells.size() == 2);
    REQUIRE(report.cells[0].ok());
    REQUIRE(report.cells[1].ok());
    double ratio = static_cast<double>(report.cells[1].train_edge_count) /
                   static_cast<double>(report.cells[0].train_edge_count);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("config files parse with overrides and defaults") {
    auto path = fs::temp_directory_path() / "kgbench_harness_config.cfg";
    {
        std::ofstream out(path);
        out << "# run configuration\n"
               "model = transr\n"
               "dim = 24\n"
               "lr = 0.125\n"
               "seed = 99\n"
               "data_fractions = 0.5, 1.0\n"
               "di_random_split = false\n"
               "synthetic = true\n";
    }
    ConfigMap map = ConfigMap::from_file(path);
    RunConfig c = RunConfig::from_config(map);
    CHECK(c.model == "transr");
    CHECK(c.kge.family == KgeFamily::TransR);
    CHECK(c.kge.entity_dim == 24);
    CHECK(c.kge.learning_rate == doctest::Approx(0.125));
    CHECK(c.seed == 99);
    CHECK(c.split.seed == 99);
    CHECK(c.data_fractions == std::vector<double>{0.5, 1.0});
    CHECK_FALSE(c.split.di_random_split);
    CHECK(c.synthetic);

    ConfigMap bad;
    bad.set("model", "nonsense");
    bad.set("synthetic", "true");
    CHECK_THROWS_AS(RunConfig::from_config(bad).validate(), UsageError);
}

TEST_CASE("predictions file format is rank tab ids tab fixed-precision probability") {
    KnowledgeGraph g;
    g.add_triple("aspirin", kDrugIndication, "pain", 2000);
    g.intern("fever", EntityKind::Indication);
    g.freeze();
    std::vector<NovelPrediction> preds = {
        {*g.find_entity("aspirin"), *g.find_entity("fever"), 0.8125},
    };
    auto path = fs::temp_directory_path() / "kgbench_harness_preds.tsv";
    write_predictions(path, g, preds);
    CHECK(slurp(path) == "# rank\tdrug\ttail\tprobability\n1\taspirin\tfever\t0.812500\n");
}
