#include "hopular/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hopular/checkpoint.hpp"
#include "hopular/errors.hpp"
#include "hopular/harness.hpp"
#include "hopular/hopfield.hpp"
#include "hopular/training.hpp"

namespace hopular {

namespace {

// Run configuration; defaults follow the smallest listed hyperparameter row
// (4 blocks, 8 Hopfield networks, mask 0.025 / replace 0.175, weight decay
// 0.1, dropout 0.1/0.1/0.01, learning rate 0.001).
struct RunConfig {
    int64_t blocks = 4;
    int64_t heads = 8;
    int64_t embed_dim = 16;
    double beta_scale = 1.0;
    double mask_prob = 0.025;
    double replace_prob = 0.175;
    double weight_decay = 0.1;
    double dropout_input = 0.1;
    double dropout_hidden = 0.1;
    double dropout_output = 0.01;
    double learning_rate = 0.001;
    int64_t epochs = 10000;
    int64_t patience = 500;
    double gamma_start = 1.0;
    bool detach_memory = false;
    bool drop_self_column = false;
    double train_frac = 0.7;
    double val_frac = 0.15;
    double test_frac = 0.15;
};

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    cfg.blocks = j.value("blocks", cfg.blocks);
    cfg.heads = j.value("heads", cfg.heads);
    cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
    cfg.beta_scale = j.value("beta_scale", cfg.beta_scale);
    cfg.mask_prob = j.value("mask_prob", cfg.mask_prob);
    cfg.replace_prob = j.value("replace_prob", cfg.replace_prob);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.dropout_input = j.value("dropout_input", cfg.dropout_input);
    cfg.dropout_hidden = j.value("dropout_hidden", cfg.dropout_hidden);
    cfg.dropout_output = j.value("dropout_output", cfg.dropout_output);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.gamma_start = j.value("gamma_start", cfg.gamma_start);
    cfg.detach_memory = j.value("detach_memory", cfg.detach_memory);
    cfg.drop_self_column = j.value("drop_self_column", cfg.drop_self_column);
    cfg.train_frac = j.value("train_frac", cfg.train_frac);
    cfg.val_frac = j.value("val_frac", cfg.val_frac);
    cfg.test_frac = j.value("test_frac", cfg.test_frac);
    return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
    nlohmann::json j{{"blocks", cfg.blocks},
                     {"heads", cfg.heads},
                     {"embed_dim", cfg.embed_dim},
                     {"beta_scale", cfg.beta_scale},
                     {"mask_prob", cfg.mask_prob},
                     {"replace_prob", cfg.replace_prob},
                     {"weight_decay", cfg.weight_decay},
                     {"dropout_input", cfg.dropout_input},
                     {"dropout_hidden", cfg.dropout_hidden},
                     {"dropout_output", cfg.dropout_output},
                     {"learning_rate", cfg.learning_rate},
                     {"epochs", cfg.epochs},
                     {"patience", cfg.patience},
                     {"gamma_start", cfg.gamma_start},
                     {"detach_memory", cfg.detach_memory},
                     {"drop_self_column", cfg.drop_self_column},
                     {"train_frac", cfg.train_frac},
                     {"val_frac", cfg.val_frac},
                     {"test_frac", cfg.test_frac}};
    return j.dump();
}

HyperParams hyperparams_of(const RunConfig& cfg) {
    HyperParams hp;
    hp.blocks = cfg.blocks;
    hp.heads = cfg.heads;
    hp.embed_dim = cfg.embed_dim;
    hp.beta_scale = cfg.beta_scale;
    hp.dropout_input = cfg.dropout_input;
    hp.dropout_hidden = cfg.dropout_hidden;
    hp.dropout_output = cfg.dropout_output;
    hp.detach_memory = cfg.detach_memory;
    hp.drop_self_column = cfg.drop_self_column;
    return hp;
}

TrainConfig train_config_of(const RunConfig& cfg, uint64_t seed) {
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.patience = cfg.patience;
    tc.mask_probs = {cfg.mask_prob, cfg.replace_prob};
    tc.gamma_start = cfg.gamma_start;
    tc.opt.learning_rate = cfg.learning_rate;
    tc.opt.weight_decay = cfg.weight_decay;
    tc.seed = seed;
    return tc;
}

// Relative paths fall back to $HOPULAR_DATA_DIR when not found locally.
std::string resolve_data_path(const std::string& path) {
    namespace fs = std::filesystem;
    if (path.empty() || fs::exists(path)) return path;
    const char* base = std::getenv("HOPULAR_DATA_DIR");
    if (base != nullptr) {
        const fs::path candidate = fs::path(base) / path;
        if (fs::exists(candidate)) return candidate.string();
    }
    return path;
}

Tensor parse_number_list(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        values.push_back(std::strtod(item.c_str(), nullptr));
    }
    if (values.empty()) throw ConfigError("expected a comma-separated list of numbers");
    return Tensor::vector(std::move(values));
}

// For subcommands without data files, the manifest records the flags alone.
void write_flags_manifest(const std::string& path, const nlohmann::json& flags, uint64_t seed) {
    write_manifest(path, flags.dump(), seed, {});
}

int cmd_capacity_check(double beta, double K, int64_t d, double p,
                       const std::string& manifest_path) {
    write_flags_manifest(manifest_path,
                         {{"subcommand", "capacity-check"},
                          {"beta", beta},
                          {"K", K},
                          {"d", d},
                          {"p", p}},
                         0);
    const CapacityParams params = CapacityParams::make(beta, K, d, p);
    std::cout << "a = " << params.a << "\n"
              << "b = " << params.b << "\n"
              << "a + ln b = " << params.a + std::log(params.b) << "\n"
              << "c = " << params.c << "\n";
    try {
        const double n_min = storage_capacity_bound(params);
        std::cout << "N_min = " << n_min << "\n";
    } catch (const CapacityConditionError& e) {
        std::cout << "capacity condition violated: c = " << e.c << " < threshold "
                  << e.threshold << "\n";
        return 1;
    }
    return 0;
}

int cmd_retrieve(const std::string& patterns_path, const std::string& query_text, double beta,
                 double tol, int max_iter, const std::string& manifest_path) {
    const std::string resolved = resolve_data_path(patterns_path);
    std::ifstream in(resolved);
    if (!in) throw ConfigError("cannot open pattern file: " + patterns_path);
    const std::vector<std::pair<std::string, std::string>> fps = {
        {resolved, hex64(fnv1a64_file(resolved))}};
    write_manifest(manifest_path,
                   nlohmann::json{{"subcommand", "retrieve"},
                                  {"patterns", resolved},
                                  {"query", query_text},
                                  {"beta", beta},
                                  {"tol", tol},
                                  {"max_iter", max_iter}}
                       .dump(),
                   0, fps);
    std::vector<Tensor> patterns;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        patterns.push_back(parse_number_list(line));
    }
    const PatternMemory mem = PatternMemory::from_pattern_list(patterns, beta);
    const Tensor query = parse_number_list(query_text);
    const RetrievalResult res = retrieve(mem, query, tol, max_iter);

    nlohmann::json j;
    j["converged"] = res.converged;
    j["iterations"] = res.iterations;
    j["final_delta"] = res.final_delta;
    j["energies"] = res.energies;
    std::vector<double> fixed_point(res.xi_star.data(), res.xi_star.data() + res.xi_star.size());
    j["fixed_point"] = fixed_point;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_gradcheck(double eps, double gamma, const std::string& manifest_path) {
    write_flags_manifest(manifest_path,
                         {{"subcommand", "gradcheck"}, {"eps", eps}, {"gamma", gamma}}, 0);
    const Dataset ds = make_toy_dataset();
    HyperParams hp;
    hp.blocks = 1;
    hp.heads = 2;
    hp.embed_dim = 4;
    hp.beta_scale = 1.0;
    hp.dropout_input = hp.dropout_hidden = hp.dropout_output = 0.0;
    Rng rng(11);
    HopularModel model = make_model(ds.schema, hp, rng);
    const double err = model_gradient_check(model, ds, gamma, eps);
    std::cout << "max relative gradient error = " << err << "\n";
    return err < 1e-4 ? 0 : 1;
}

int cmd_oracle_nw(int cases, uint64_t seed, double beta, const std::string& manifest_path) {
    write_flags_manifest(
        manifest_path,
        {{"subcommand", "oracle-nw"}, {"cases", cases}, {"beta", beta}}, seed);
    double worst = 0.0;
    for (int k = 0; k < cases; ++k) {
        HsEquivalenceCase c;
        c.seed = seed + static_cast<uint64_t>(k);
        c.beta = beta;
        worst = std::max(worst, equivalence_nw_vs_hs(c));
    }
    std::cout << "max deviation over " << cases << " cases = " << worst << "\n";
    return worst < 1e-10 ? 0 : 1;
}

int cmd_oracle_adaboost(int cases, uint64_t seed, const std::string& manifest_path) {
    write_flags_manifest(manifest_path,
                         {{"subcommand", "oracle-adaboost"}, {"cases", cases}}, seed);
    double worst = 0.0;
    for (int k = 0; k < cases; ++k) {
        Rng rng(seed + static_cast<uint64_t>(k));
        const int64_t dim = 3, n = 8;
        Tensor inputs = Tensor::matrix(dim, n);
        for (int64_t i = 0; i < inputs.size(); ++i) inputs[i] = rng.uniform(-1.0, 1.0);
        std::vector<int> labels(static_cast<size_t>(n));
        for (auto& l : labels) l = rng.uniform01() < 0.5 ? -1 : 1;
        Tensor xi = Tensor::zeros({dim});
        for (int64_t i = 0; i < dim; ++i) xi[i] = rng.uniform(-1.0, 1.0);
        const double beta = rng.uniform(0.5, 2.0);

        const Tensor analytic = adaboost_gradient(inputs, labels, xi, beta);
        const double eps = 1e-5;
        for (int64_t i = 0; i < dim; ++i) {
            Tensor xp = xi, xm = xi;
            xp[i] += eps;
            xm[i] -= eps;
            const double central = (adaboost_objective(inputs, labels, xp, beta) -
                                    adaboost_objective(inputs, labels, xm, beta)) /
                                   (2.0 * eps);
            const double rel = std::abs(analytic[i] - central) /
                               (std::abs(analytic[i]) + std::abs(central) + 1e-12);
            worst = std::max(worst, rel);
        }
    }
    std::cout << "max relative deviation over " << cases << " cases = " << worst << "\n";
    return worst < 1e-6 ? 0 : 1;
}

int cmd_train(const std::string& data_path, const std::string& schema_path,
              const std::string& config_path, uint64_t seed, const std::string& out_path,
              const std::string& history_path, const std::string& metrics_path,
              const std::string& split_file, int replicates, const std::string& manifest_path) {
    const std::string data = resolve_data_path(data_path);
    const std::string schema = resolve_data_path(schema_path);
    const RunConfig cfg = load_run_config(resolve_data_path(config_path));

    Dataset ds = load(data, schema);
    SplitSpec spec;
    if (!split_file.empty())
        spec.index_file = resolve_data_path(split_file);
    else
        spec.fractions = {{cfg.train_frac, cfg.val_frac, cfg.test_frac}};
    split(ds, spec, seed);
    for (const std::string& w : ds.warnings) std::cerr << "warning: " << w << "\n";

    const std::string data_fp = hex64(fnv1a64_file(data));
    const std::string schema_fp = hex64(fnv1a64(ds.schema.to_text()));

    std::ofstream metrics(metrics_path);
    std::vector<double> replicate_metrics;
    std::string metric_name;
    CheckpointBundle bundle;

    for (int r = 0; r < replicates; ++r) {
        const uint64_t replicate_seed = seed + static_cast<uint64_t>(r);
        Rng model_rng(replicate_seed);
        HopularModel model = make_model(ds.schema, hyperparams_of(cfg), model_rng);

        std::string hist = history_path;
        if (r > 0) hist += ".r" + std::to_string(r);
        std::ofstream history(hist);
        const FitResult res =
            fit(model, ds, train_config_of(cfg, replicate_seed), &history);

        const EvalMetric metric = evaluate_model(model, ds, kTest);
        metric_name = metric.name;
        replicate_metrics.push_back(metric.value);
        metrics << "{\"replicate\":" << r << ",\"seed\":" << replicate_seed
                << ",\"metric\":\"" << metric.name << "\",\"value\":" << metric.value
                << ",\"best_epoch\":" << res.best_epoch << ",\"best_val_loss\":"
                << res.best_val_metric << ",\"epochs_run\":" << res.epochs_run << "}\n";

        if (r == 0) {
            bundle.model = model;
            bundle.mean = ds.mean;
            bundle.stddev = ds.stddev;
            bundle.category_tokens = ds.category_tokens;
            bundle.split_of_row = ds.split_of_row;
            bundle.schema_fingerprint = schema_fp;
            bundle.data_fingerprint = data_fp;
            bundle.run_config_json = config_to_json(cfg);
        }
    }

    const MetricsReport report =
        summarize_replicates(ds.schema.task, metric_name, replicate_metrics);
    metrics << "{\"summary\":true,\"metric\":\"" << report.metric_name
            << "\",\"mean\":" << report.value << ",\"std_error\":" << report.std_error
            << ",\"replicates\":" << report.replicates << "}\n";

    std::cout << "metric        mean        std_error   replicates\n"
              << report.metric_name << "  " << report.value << "  " << report.std_error << "  "
              << report.replicates << "\n";

    save_checkpoint(out_path, bundle);
    const std::vector<std::pair<std::string, std::string>> fps = {{data, data_fp},
                                                                  {schema, schema_fp}};
    write_manifest(manifest_path, config_to_json(cfg), seed, fps);
    return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& data_path,
                 const std::string& schema_path, const std::string& split_name,
                 const std::string& manifest_path) {
    const std::string data = resolve_data_path(data_path);
    const std::string schema = resolve_data_path(schema_path);
    const CheckpointBundle bundle = load_checkpoint(resolve_data_path(checkpoint_path));
    Dataset ds = load(data, schema);
    apply_checkpoint_dataset_state(bundle, ds, hex64(fnv1a64_file(data)));

    int split_id = kTest;
    if (split_name == "train") split_id = kTrain;
    else if (split_name == "val") split_id = kVal;
    else if (split_name != "test") throw ConfigError("unknown split: " + split_name);

    const EvalMetric metric = evaluate_model(bundle.model, ds, split_id);
    std::cout << "split   metric      value\n"
              << split_name << "  " << metric.name << "  " << metric.value << "\n";

    const std::vector<std::pair<std::string, std::string>> fps = {
        {data, bundle.data_fingerprint}};
    write_manifest(manifest_path, bundle.run_config_json, 0, fps);
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Continuous modern Hopfield networks and the Hopular tabular learner"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model on a CSV table");
    std::string data_path, schema_path, config_path, split_file;
    std::string out_path = "model.ckpt", history_path = "history.jsonl";
    std::string metrics_path = "metrics.jsonl", manifest_path = "run.manifest.json";
    uint64_t seed = 1;
    int replicates = 1;
    train_cmd->add_option("--data", data_path, "CSV table")->required();
    train_cmd->add_option("--schema", schema_path, "schema file")->required();
    train_cmd->add_option("--config", config_path, "JSON run configuration");
    train_cmd->add_option("--seed", seed, "master seed");
    train_cmd->add_option("--out", out_path, "checkpoint output path");
    train_cmd->add_option("--history", history_path, "training history output path");
    train_cmd->add_option("--metrics", metrics_path, "metrics output path");
    train_cmd->add_option("--split-file", split_file, "explicit split index file");
    train_cmd->add_option("--replicates", replicates, "number of replicate runs")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--manifest", manifest_path, "manifest output path");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a split");
    std::string checkpoint_path, eval_data, eval_schema, split_name = "test";
    std::string eval_manifest = "evaluate.manifest.json";
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", eval_data, "CSV table")->required();
    eval_cmd->add_option("--schema", eval_schema, "schema file")->required();
    eval_cmd->add_option("--split", split_name, "train, val or test");
    eval_cmd->add_option("--manifest", eval_manifest, "manifest output path");

    // capacity-check
    auto* cap_cmd = app.add_subcommand("capacity-check", "Storage-capacity constants");
    double cap_beta = 1.0, cap_k = 1.0, cap_p = 0.001;
    int64_t cap_d = 64;
    cap_cmd->add_option("--beta", cap_beta, "inverse temperature")->required();
    cap_cmd->add_option("--K", cap_k, "sphere radius factor")->required();
    cap_cmd->add_option("--d", cap_d, "pattern dimension")->required();
    cap_cmd->add_option("--p", cap_p, "failure probability")->required();
    std::string cap_manifest = "capacity-check.manifest.json";
    cap_cmd->add_option("--manifest", cap_manifest, "manifest output path");

    // retrieve
    auto* ret_cmd = app.add_subcommand("retrieve", "Iterate the update rule to a fixed point");
    std::string patterns_path, query_text;
    double ret_beta = 1.0, ret_tol = 1e-8;
    int ret_max_iter = 100;
    ret_cmd->add_option("--patterns", patterns_path, "CSV of patterns, one per row")->required();
    ret_cmd->add_option("--query", query_text, "comma-separated query vector")->required();
    ret_cmd->add_option("--beta", ret_beta, "inverse temperature");
    ret_cmd->add_option("--tol", ret_tol, "convergence tolerance");
    ret_cmd->add_option("--max-iter", ret_max_iter, "iteration cap");
    std::string ret_manifest = "retrieve.manifest.json";
    ret_cmd->add_option("--manifest", ret_manifest, "manifest output path");

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "Full-model finite-difference check");
    double grad_eps = 1e-4, grad_gamma = 0.6;
    grad_cmd->add_option("--eps", grad_eps, "central-difference step");
    grad_cmd->add_option("--gamma", grad_gamma, "loss mixture weight");
    std::string grad_manifest = "gradcheck.manifest.json";
    grad_cmd->add_option("--manifest", grad_manifest, "manifest output path");

    // oracle-nw
    auto* nw_cmd = app.add_subcommand("oracle-nw", "Kernel-regression equivalence suite");
    int nw_cases = 50;
    uint64_t nw_seed = 100;
    double nw_beta = 1.0;
    nw_cmd->add_option("--cases", nw_cases, "number of random cases");
    nw_cmd->add_option("--seed", nw_seed, "base seed");
    nw_cmd->add_option("--beta", nw_beta, "inverse temperature");
    std::string nw_manifest = "oracle-nw.manifest.json";
    nw_cmd->add_option("--manifest", nw_manifest, "manifest output path");

    // oracle-adaboost
    auto* ada_cmd = app.add_subcommand("oracle-adaboost", "Exponential-loss gradient suite");
    int ada_cases = 50;
    uint64_t ada_seed = 200;
    ada_cmd->add_option("--cases", ada_cases, "number of random cases");
    ada_cmd->add_option("--seed", ada_seed, "base seed");
    std::string ada_manifest = "oracle-adaboost.manifest.json";
    ada_cmd->add_option("--manifest", ada_manifest, "manifest output path");

    // make-dataset
    auto* make_cmd = app.add_subcommand("make-dataset", "Write a bundled demo dataset");
    std::string make_kind = "neighbors", make_csv = "table.csv", make_schema = "schema.txt";
    int64_t make_samples = 200;
    double make_noise = 0.1;
    uint64_t make_seed = 1;
    make_cmd->add_option("--kind", make_kind, "neighbors or led");
    make_cmd->add_option("--out", make_csv, "CSV output path");
    make_cmd->add_option("--schema-out", make_schema, "schema output path");
    make_cmd->add_option("--samples", make_samples, "number of rows");
    make_cmd->add_option("--noise", make_noise, "noise level");
    make_cmd->add_option("--seed", make_seed, "generator seed");
    std::string make_manifest = "make-dataset.manifest.json";
    make_cmd->add_option("--manifest", make_manifest, "manifest output path");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (train_cmd->parsed())
            return cmd_train(data_path, schema_path, config_path, seed, out_path, history_path,
                             metrics_path, split_file, replicates, manifest_path);
        if (eval_cmd->parsed())
            return cmd_evaluate(checkpoint_path, eval_data, eval_schema, split_name,
                                eval_manifest);
        if (cap_cmd->parsed())
            return cmd_capacity_check(cap_beta, cap_k, cap_d, cap_p, cap_manifest);
        if (ret_cmd->parsed())
            return cmd_retrieve(patterns_path, query_text, ret_beta, ret_tol, ret_max_iter,
                                ret_manifest);
        if (grad_cmd->parsed()) return cmd_gradcheck(grad_eps, grad_gamma, grad_manifest);
        if (nw_cmd->parsed()) return cmd_oracle_nw(nw_cases, nw_seed, nw_beta, nw_manifest);
        if (ada_cmd->parsed())
            return cmd_oracle_adaboost(ada_cases, ada_seed, ada_manifest);
        if (make_cmd->parsed()) {
            write_flags_manifest(make_manifest,
                                 {{"subcommand", "make-dataset"},
                                  {"kind", make_kind},
                                  {"samples", make_samples},
                                  {"noise", make_noise}},
                                 make_seed);
            if (make_kind == "led") {
                write_led_display_dataset(make_csv, make_schema, make_samples, make_noise,
                                          make_seed);
            } else if (make_kind == "neighbors") {
                write_planted_neighbors_dataset(make_csv, make_schema, make_samples, 6, 2, 4,
                                                make_noise, make_seed);
            } else {
                throw ConfigError("unknown dataset kind: " + make_kind);
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace hopular
