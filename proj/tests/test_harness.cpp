#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "hopular/checkpoint.hpp"
#include "hopular/cli.hpp"
#include "hopular/harness.hpp"
#include "hopular/training.hpp"

using namespace hopular;

namespace {

Tensor unit_columns(int64_t dim, int64_t n, Rng& rng) {
    Tensor z = Tensor::matrix(dim, n);
    for (int64_t j = 0; j < n; ++j) {
        double norm = 0.0;
        std::vector<double> v(static_cast<size_t>(dim));
        for (double& x : v) {
            x = rng.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (int64_t i = 0; i < dim; ++i) z.at(i, j) = v[static_cast<size_t>(i)] / norm;
    }
    return z;
}

}  // namespace

TEST_CASE("nw_regress with a single training point returns its label") {
    const Tensor z = Tensor::matrix(2, 1, {1.0, 0.0});
    const Tensor y = Tensor::matrix(1, 1, {42.0});
    const Tensor est = nw_regress(z, y, Tensor::vector({0.3, 0.9}), 2.0, false);
    CHECK(est[0] == doctest::Approx(42.0).epsilon(1e-15));
}

TEST_CASE("nw_regress is 1/2 at a query equidistant from labels 0 and 1") {
    const Tensor z = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0});  // e1, e2 columns
    const Tensor y = Tensor::matrix(1, 2, {0.0, 1.0});
    const Tensor query = Tensor::vector({std::sqrt(0.5), std::sqrt(0.5)});
    const Tensor est = nw_regress(z, y, query, 3.0);
    CHECK(est[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("nw_regress matches the explicit kernel-ratio formula") {
    Rng rng(41);
    const int64_t dim = 4, n = 20;
    const Tensor z = unit_columns(dim, n, rng);
    Tensor y = Tensor::matrix(1, n);
    for (int64_t j = 0; j < n; ++j) y.at(0, j) = rng.uniform(-2.0, 2.0);
    Tensor query = Tensor::zeros({dim});
    for (int64_t i = 0; i < dim; ++i) query[i] = rng.normal();
    query = scale(query, 1.0 / query.norm());
    const double beta = 1.8;

    const Tensor est = nw_regress(z, y, query, beta);

    // RBF kernel ratio: sum_i y_i k(z_i, q) / sum_i k(z_i, q)
    double num = 0.0, den = 0.0;
    for (int64_t j = 0; j < n; ++j) {
        const Tensor zj = z.col_vector(j);
        const double k = std::exp(-0.5 * beta * sub(zj, query).norm() * sub(zj, query).norm());
        num += y.at(0, j) * k;
        den += k;
    }
    CHECK(est[0] == doctest::Approx(num / den).epsilon(1e-10));
}

TEST_CASE("nw_regress rejects zero-norm and non-normalized inputs") {
    const Tensor z = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 0.0});  // second column zero
    const Tensor y = Tensor::matrix(1, 2, {0.0, 1.0});
    CHECK_THROWS_AS(nw_regress(z, y, Tensor::vector({1.0, 0.0}), 1.0, false), DomainError);

    const Tensor z2 = Tensor::matrix(2, 1, {3.0, 4.0});  // norm 5
    const Tensor y2 = Tensor::matrix(1, 1, {1.0});
    CHECK_THROWS_AS(nw_regress(z2, y2, Tensor::vector({1.0, 0.0}), 1.0, true), DomainError);
    CHECK_NOTHROW(nw_regress(z2, y2, Tensor::vector({1.0, 0.0}), 1.0, false));
}

TEST_CASE("hs head equals kernel regression under the label-matrix construction") {
    // identity-like construction first
    HsEquivalenceCase base;
    base.seed = 7;
    CHECK(equivalence_nw_vs_hs(base) < 1e-12);

    // 50 random seeded cases at beta 1 and beta 100
    for (double beta : {1.0, 100.0}) {
        double worst = 0.0;
        for (uint64_t s = 0; s < 50; ++s) {
            HsEquivalenceCase c;
            c.seed = 1000 + s;
            c.beta = beta;
            worst = std::max(worst, equivalence_nw_vs_hs(c));
        }
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("adaboost gradient at the origin is the scaled class-weighted mean") {
    Rng rng(43);
    const int64_t dim = 3, n = 8;
    Tensor z = Tensor::matrix(dim, n);
    for (int64_t i = 0; i < z.size(); ++i) z[i] = rng.uniform(-1.0, 1.0);
    std::vector<int> labels;
    for (int64_t j = 0; j < n; ++j) labels.push_back(j % 2 == 0 ? 1 : -1);

    const Tensor grad = adaboost_gradient(z, labels, Tensor::zeros({dim}), 1.5);
    for (int64_t i = 0; i < dim; ++i) {
        double expected = 0.0;
        for (int64_t j = 0; j < n; ++j)
            expected -= static_cast<double>(labels[static_cast<size_t>(j)]) * z.at(i, j) /
                        static_cast<double>(n);
        CHECK(grad[i] == doctest::Approx(expected).epsilon(1e-13));
    }
}

TEST_CASE("adaboost gradient for one sample is -y z exactly") {
    const Tensor z = Tensor::matrix(3, 1, {0.5, -1.0, 2.0});
    const Tensor grad = adaboost_gradient(z, {-1}, Tensor::vector({0.1, 0.2, 0.3}), 2.0);
    CHECK(grad[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(grad[1] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(grad[2] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("adaboost gradient rejects labels outside +-1") {
    const Tensor z = Tensor::matrix(2, 1, {1.0, 0.0});
    CHECK_THROWS_AS(adaboost_gradient(z, {3}, Tensor::zeros({2}), 1.0), DomainError);
}

TEST_CASE("adaboost gradient agrees with finite differences and the hs substitution") {
    Rng rng(44);
    double worst_fd = 0.0, worst_hs = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int64_t dim = 3, n = 8;
        Tensor z = Tensor::matrix(dim, n);
        for (int64_t i = 0; i < z.size(); ++i) z[i] = rng.uniform(-1.0, 1.0);
        std::vector<int> labels;
        for (int64_t j = 0; j < n; ++j) labels.push_back(rng.uniform01() < 0.5 ? -1 : 1);
        Tensor xi = Tensor::zeros({dim});
        for (int64_t i = 0; i < dim; ++i) xi[i] = rng.uniform(-1.0, 1.0);
        const double beta = rng.uniform(0.5, 2.0);

        const Tensor analytic = adaboost_gradient(z, labels, xi, beta);

        // central differences of lse(beta, -Y Z^T xi)
        const double eps = 1e-5;
        for (int64_t i = 0; i < dim; ++i) {
            Tensor xp = xi, xm = xi;
            xp[i] += eps;
            xm[i] -= eps;
            const double central = (adaboost_objective(z, labels, xp, beta) -
                                    adaboost_objective(z, labels, xm, beta)) /
                                   (2.0 * eps);
            worst_fd = std::max(worst_fd,
                                std::abs(analytic[i] - central) /
                                    (std::abs(analytic[i]) + std::abs(central) + 1e-12));
        }

        // substitution route: X = Z Y, identity maps; gradient = -H_s(-xi)
        Tensor x_sub = Tensor::matrix(dim, n);
        for (int64_t j = 0; j < n; ++j)
            for (int64_t i = 0; i < dim; ++i)
                x_sub.at(i, j) = z.at(i, j) * static_cast<double>(labels[static_cast<size_t>(j)]);
        Tape tape;
        ForwardContext ctx{&tape, nullptr, false};
        BoundHsHead head{tape.constant(Tensor::identity(dim)),
                         tape.constant(Tensor::identity(dim)),
                         tape.constant(Tensor::identity(dim))};
        const Tensor hs_at_neg = tape.value(hs_head_forward(
            ctx, head, tape.constant(scale(xi, -1.0)), tape.constant(x_sub), beta));
        for (int64_t i = 0; i < dim; ++i)
            worst_hs = std::max(worst_hs, std::abs(analytic[i] + hs_at_neg[i]));
    }
    CHECK(worst_fd < 1e-6);
    CHECK(worst_hs < 1e-12);
}

TEST_CASE("knn baseline closed cases and the exhaustive oracle") {
    const Dataset ds = make_toy_dataset();
    const std::vector<int64_t> train_rows = ds.rows_of_split(kTrain);

    // query equal to a training row with k = 1 returns that row's label
    const KnnPrediction self = knn_baseline(ds, train_rows, 1, encode(ds, 2));
    CHECK(self.category == ds.target_class(2));

    // k = n reduces to the global majority (2 zeros vs 2 ones; tie resolves
    // toward the class containing the smallest row index, which is 0)
    const KnnPrediction all = knn_baseline(ds, train_rows, 4, encode(ds, 0));
    CHECK(all.category == 0);

    CHECK_THROWS_AS(knn_baseline(ds, train_rows, 5, encode(ds, 0)), ContractError);
    CHECK_THROWS_AS(knn_baseline(ds, train_rows, 0, encode(ds, 0)), ContractError);
}

TEST_CASE("knn matches a full-sort oracle on random data") {
    // 30 random points, 3 classes, scan several k
    Dataset ds;
    ds.schema = TableSchema::parse_text("x,continuous,0\ny,continuous,0\nc,categorical,3,1\n");
    ds.category_tokens = {{}, {}, {"0", "1", "2"}};
    Rng rng(55);
    std::vector<int> splits;
    for (int i = 0; i < 30; ++i) {
        ds.rows.push_back({{false, rng.uniform(-2.0, 2.0), -1},
                           {false, rng.uniform(-2.0, 2.0), -1},
                           {false, 0.0, static_cast<int64_t>(rng.uniform_index(3))}});
        splits.push_back(kTrain);
    }
    assign_split(ds, splits);
    const std::vector<int64_t> train_rows = ds.rows_of_split(kTrain);

    EncodedSample query = encode(ds, 0);
    query.values[0] += 0.37;
    query.values[1] -= 0.11;

    for (int64_t k : {1, 3, 7}) {
        const KnnPrediction fast = knn_baseline(ds, train_rows, k, query);
        // oracle: exhaustive sort on squared distance then majority count
        std::vector<std::pair<double, int64_t>> all;
        for (int64_t r : train_rows) {
            const EncodedSample enc = encode(ds, r);
            const double dx = enc.values[0] - query.values[0];
            const double dy = enc.values[1] - query.values[1];
            all.push_back({dx * dx + dy * dy, r});
        }
        std::sort(all.begin(), all.end());
        std::vector<int64_t> votes(3, 0);
        for (int64_t i = 0; i < k; ++i) ++votes[static_cast<size_t>(
            ds.target_class(all[static_cast<size_t>(i)].second))];
        int64_t best = 0;
        for (int64_t c = 1; c < 3; ++c)
            if (votes[static_cast<size_t>(c)] > votes[static_cast<size_t>(best)]) best = c;
        // only compare when the oracle vote is unique
        int ties = 0;
        for (int64_t c = 0; c < 3; ++c)
            if (votes[static_cast<size_t>(c)] == votes[static_cast<size_t>(best)]) ++ties;
        if (ties == 1) CHECK(fast.category == best);
    }
}

TEST_CASE("replicate summaries report mean and standard error") {
    const std::vector<double> values = {0.8, 0.9, 1.0};
    const MetricsReport report =
        summarize_replicates(Task::classification, "accuracy", values);
    CHECK(report.value == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(report.std_error == doctest::Approx(0.1 / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(report.replicates == 3);
}

TEST_CASE("regression metric is 1000x the denormalized mean squared error") {
    Dataset ds;
    ds.schema = TableSchema::parse_text("x,continuous,0\ny,continuous,1\n");
    ds.category_tokens = {{}, {}};
    Rng rng(66);
    std::vector<int> splits;
    for (int i = 0; i < 30; ++i) {
        const double x = rng.uniform(-1.0, 1.0);
        ds.rows.push_back({{false, x, -1}, {false, 3.0 * x + rng.normal() * 0.1, -1}});
        splits.push_back(i < 20 ? kTrain : (i < 25 ? kVal : kTest));
    }
    assign_split(ds, splits);

    Rng mrng(5);
    HyperParams hp;
    hp.blocks = 1;
    hp.heads = 2;
    hp.embed_dim = 4;
    hp.dropout_input = hp.dropout_hidden = hp.dropout_output = 0.0;
    HopularModel model = make_model(ds.schema, hp, mrng);
    const EvalMetric metric = evaluate_model(model, ds, kTest);
    CHECK(metric.name == "mse_x1000");

    // reference: forward each test row, de-normalize, accumulate
    double ss = 0.0;
    const std::vector<int64_t> test_rows = ds.rows_of_split(kTest);
    for (int64_t r : test_rows) {
        Tape tape;
        ForwardContext ctx{&tape, nullptr, false};
        BoundModel bound = bind_model(tape, model, false);
        std::vector<ModelInput> mem_inputs;
        for (int64_t tr : ds.rows_of_split(kTrain))
            mem_inputs.push_back(target_masked_input(ds, tr));
        MemoryBase memory = build_memory_base(ctx, bound, mem_inputs);
        ForwardResult fr = forward(ctx, bound, target_masked_input(ds, r), memory, -1);
        const double pred = denormalize_target(ds, tape.value(fr.predictions[1]).item());
        const double truth = ds.rows[static_cast<size_t>(r)][1].number;
        ss += (pred - truth) * (pred - truth);
    }
    const double expected = 1000.0 * ss / static_cast<double>(test_rows.size());
    CHECK(metric.value == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("checkpoints round-trip parameters bit-exactly") {
    const Dataset ds = make_toy_dataset();
    Rng rng(77);
    HyperParams hp;
    hp.blocks = 1;
    hp.heads = 2;
    hp.embed_dim = 4;
    CheckpointBundle bundle;
    bundle.model = make_model(ds.schema, hp, rng);
    bundle.mean = ds.mean;
    bundle.stddev = ds.stddev;
    bundle.category_tokens = ds.category_tokens;
    bundle.split_of_row = ds.split_of_row;
    bundle.schema_fingerprint = hex64(fnv1a64(ds.schema.to_text()));
    bundle.data_fingerprint = "feedbeef00000000";
    bundle.run_config_json = "{}";

    const std::string path = "/tmp/hopular_test_ckpt.json";
    save_checkpoint(path, bundle);
    const CheckpointBundle back = load_checkpoint(path);
    std::remove(path.c_str());

    std::vector<Tensor> original;
    bundle.model.visit_params(
        [&original](const std::string&, const Tensor& t) { original.push_back(t); });
    size_t k = 0;
    bool identical = true;
    back.model.visit_params([&](const std::string&, const Tensor& t) {
        for (int64_t i = 0; i < t.size(); ++i)
            identical = identical && t[i] == original[k][i];
        ++k;
    });
    CHECK(identical);
    CHECK(back.schema_fingerprint == bundle.schema_fingerprint);

    Dataset fresh = make_toy_dataset();
    CHECK_THROWS_AS(apply_checkpoint_dataset_state(back, fresh, "0000000000000000"),
                    ConfigError);
    CHECK_NOTHROW(apply_checkpoint_dataset_state(back, fresh, "feedbeef00000000"));
}

TEST_CASE("cli: unknown flags exit with status 2") {
    CHECK(run_cli({"capacity-check", "--beta", "1", "--K", "3", "--d", "20", "--p", "0.001",
                   "--bogus"}) == 2);
    CHECK(run_cli({"no-such-subcommand"}) == 2);
}

TEST_CASE("cli: capacity-check reports the published constant") {
    const std::string manifest = "/tmp/hopular_test_cap_manifest.json";
    CHECK(run_cli({"capacity-check", "--beta", "1", "--K", "3", "--d", "20", "--p", "0.001",
                   "--manifest", manifest}) == 0);
    std::ifstream in(manifest);
    CHECK(in.good());  // every run leaves a manifest
    std::remove(manifest.c_str());
}

TEST_CASE("cli: oracle suites pass") {
    const std::string manifest = "/tmp/hopular_test_oracle_manifest.json";
    CHECK(run_cli({"oracle-nw", "--cases", "10", "--manifest", manifest}) == 0);
    CHECK(run_cli({"oracle-adaboost", "--cases", "10", "--manifest", manifest}) == 0);
    std::remove(manifest.c_str());
}

TEST_CASE("cli: retrieve emits a converged fixed point") {
    const std::string patterns = "/tmp/hopular_test_patterns.csv";
    const std::string manifest = "/tmp/hopular_test_ret_manifest.json";
    {
        std::ofstream out(patterns);
        out << "1,0\n0,1\n";
    }
    CHECK(run_cli({"retrieve", "--patterns", patterns, "--query", "0.9,0.1", "--beta", "8",
                   "--manifest", manifest}) == 0);
    std::remove(patterns.c_str());
    std::remove(manifest.c_str());
}

TEST_CASE("cli: train then evaluate on a generated table") {
    const std::string csv = "/tmp/hopular_test_nb.csv";
    const std::string schema = "/tmp/hopular_test_nb_schema.txt";
    const std::string config = "/tmp/hopular_test_cfg.json";
    const std::string ckpt = "/tmp/hopular_test_model.ckpt";
    const std::string hist = "/tmp/hopular_test_hist.jsonl";
    const std::string metrics = "/tmp/hopular_test_metrics.jsonl";
    const std::string manifest = "/tmp/hopular_test_manifest.json";
    write_planted_neighbors_dataset(csv, schema, 60, 4, 2, 2, 0.5, 9);
    {
        std::ofstream out(config);
        out << "{\"blocks\":1,\"heads\":2,\"embed_dim\":4,\"epochs\":4,\"patience\":4,"
               "\"train_frac\":0.6,\"val_frac\":0.2,\"test_frac\":0.2}";
    }
    CHECK(run_cli({"train", "--data", csv, "--schema", schema, "--config", config, "--seed",
                   "1", "--out", ckpt, "--history", hist, "--metrics", metrics, "--manifest",
                   manifest}) == 0);
    // history exists with one record per epoch
    std::ifstream hin(hist);
    int64_t lines = 0;
    std::string line;
    while (std::getline(hin, line)) ++lines;
    CHECK(lines == 4);
    // manifest carries fingerprints
    std::ifstream min(manifest);
    std::string manifest_text((std::istreambuf_iterator<char>(min)),
                              std::istreambuf_iterator<char>());
    CHECK(manifest_text.find("data_fingerprints") != std::string::npos);
    CHECK(manifest_text.find("code_version") != std::string::npos);

    CHECK(run_cli({"evaluate", "--checkpoint", ckpt, "--data", csv, "--schema", schema,
                   "--split", "test", "--manifest", manifest}) == 0);
    CHECK(run_cli({"evaluate", "--checkpoint", ckpt, "--data", csv, "--schema", schema,
                   "--split", "bogus", "--manifest", manifest}) == 1);

    for (const std::string& f :
         {csv, schema, config, ckpt, hist, metrics, manifest})
        std::remove(f.c_str());
}
