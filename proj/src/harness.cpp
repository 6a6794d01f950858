#include "hopular/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "hopular/autodiff.hpp"
#include "hopular/errors.hpp"
#include "hopular/rng.hpp"

namespace hopular {

Tensor nw_regress(const Tensor& inputs, const Tensor& labels, const Tensor& query, double beta,
                  bool require_unit_norm) {
    if (inputs.rank() != 2 || labels.rank() != 2 || inputs.cols() != labels.cols())
        throw DimensionError("nw_regress: inputs " + inputs.shape_string() + " vs labels " +
                             labels.shape_string());
    if (query.size() != inputs.rows())
        throw DimensionError("nw_regress: query dimension mismatch");
    if (query.norm() == 0.0) throw DomainError("nw_regress: zero-norm query");
    for (int64_t j = 0; j < inputs.cols(); ++j) {
        const double norm = inputs.col_vector(j).norm();
        if (norm == 0.0) throw DomainError("nw_regress: zero-norm input " + std::to_string(j));
        if (require_unit_norm && std::abs(norm - 1.0) > 1e-8)
            throw DomainError("nw_regress: input " + std::to_string(j) +
                              " is not unit-norm (norm " + std::to_string(norm) + ")");
    }
    const Tensor scores = matvec_transposed(inputs, query);
    const Tensor weights = softmax_scaled(scores, beta);
    return matvec(labels, weights);
}

double equivalence_nw_vs_hs(const HsEquivalenceCase& c) {
    Rng rng(c.seed);
    auto random_matrix = [&rng](int64_t r, int64_t cc) {
        Tensor t = Tensor::matrix(r, cc);
        for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
        return t;
    };
    const Tensor w_query = random_matrix(c.hopfield_dim, c.feature_dim);
    const Tensor w_memory = random_matrix(c.hopfield_dim, c.feature_dim);
    const Tensor w_out = random_matrix(c.feature_dim, c.hopfield_dim);
    const Tensor memory_x = random_matrix(c.feature_dim, c.memory_count);
    Tensor xi = Tensor::zeros({c.feature_dim});
    for (int64_t i = 0; i < xi.size(); ++i) xi[i] = rng.uniform(-1.0, 1.0);

    Tape tape;
    ForwardContext ctx{&tape, nullptr, false};
    BoundHsHead head{tape.constant(w_query), tape.constant(w_memory), tape.constant(w_out)};
    const Tensor hs_value =
        tape.value(hs_head_forward(ctx, head, tape.constant(xi), tape.constant(memory_x), c.beta));

    // Kernel-regression construction: Z = W_X X, z = W_xi xi, Y = W_S W_X X.
    const Tensor z_inputs = matmul(w_memory, memory_x);
    const Tensor z_query = matvec(w_query, xi);
    const Tensor y_labels = matmul(w_out, z_inputs);
    const Tensor estimate = nw_regress(z_inputs, y_labels, z_query, c.beta, false);

    double max_dev = 0.0;
    for (int64_t i = 0; i < hs_value.size(); ++i)
        max_dev = std::max(max_dev, std::abs(hs_value[i] - estimate[i]));
    return max_dev;
}

namespace {

Tensor signed_scores(const Tensor& inputs, const std::vector<int>& labels, const Tensor& xi) {
    if (static_cast<int64_t>(labels.size()) != inputs.cols())
        throw DimensionError("label count does not match input columns");
    if (xi.size() != inputs.rows()) throw DimensionError("xi dimension mismatch");
    Tensor v = Tensor::zeros({inputs.cols()});
    for (int64_t i = 0; i < inputs.cols(); ++i) {
        if (labels[static_cast<size_t>(i)] != 1 && labels[static_cast<size_t>(i)] != -1)
            throw DomainError("labels must be +1 or -1");
        v[i] = -static_cast<double>(labels[static_cast<size_t>(i)]) *
               dot(inputs.col_vector(i), xi);
    }
    return v;
}

}  // namespace

double adaboost_objective(const Tensor& inputs, const std::vector<int>& labels, const Tensor& xi,
                          double beta) {
    return logsumexp(signed_scores(inputs, labels, xi), beta);
}

Tensor adaboost_gradient(const Tensor& inputs, const std::vector<int>& labels, const Tensor& xi,
                         double beta) {
    const Tensor weights = softmax_scaled(signed_scores(inputs, labels, xi), beta);
    Tensor grad = Tensor::zeros({inputs.rows()});
    for (int64_t i = 0; i < inputs.cols(); ++i) {
        const double coef =
            -static_cast<double>(labels[static_cast<size_t>(i)]) * weights[i];
        for (int64_t r = 0; r < inputs.rows(); ++r) grad[r] += coef * inputs.at(r, i);
    }
    return grad;
}

namespace {

// One-hot categorical dims plus raw z-scores; target excluded.
std::vector<double> knn_features(const Dataset& ds, const EncodedSample& enc) {
    std::vector<double> out;
    for (int64_t j = 0; j < ds.schema.attribute_count(); ++j) {
        const Attribute& attr = ds.schema.attrs[static_cast<size_t>(j)];
        if (attr.is_target) continue;
        if (attr.kind == AttrKind::categorical) {
            for (int64_t c = 0; c <= attr.cardinality; ++c)
                out.push_back(enc.categories[static_cast<size_t>(j)] == c ? 1.0 : 0.0);
        } else {
            out.push_back(enc.values[static_cast<size_t>(j)]);
        }
    }
    return out;
}

}  // namespace

KnnPrediction knn_baseline(const Dataset& ds, std::span<const int64_t> train_rows, int64_t k,
                           const EncodedSample& query) {
    const int64_t n = static_cast<int64_t>(train_rows.size());
    if (k < 1) throw ContractError("knn_baseline: k must be >= 1");
    if (k > n) throw ContractError("knn_baseline: k exceeds training-set size");
    const std::vector<double> q = knn_features(ds, query);

    struct Neighbor {
        double dist;
        int64_t row;
    };
    std::vector<Neighbor> neighbors;
    neighbors.reserve(static_cast<size_t>(n));
    for (int64_t r : train_rows) {
        const std::vector<double> f = knn_features(ds, encode(ds, r));
        double d2 = 0.0;
        for (size_t i = 0; i < q.size(); ++i) d2 += (q[i] - f[i]) * (q[i] - f[i]);
        neighbors.push_back({d2, r});
    }
    std::sort(neighbors.begin(), neighbors.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.dist != b.dist ? a.dist < b.dist : a.row < b.row;
    });
    neighbors.resize(static_cast<size_t>(k));

    KnnPrediction pred;
    const int64_t target = ds.schema.target_index;
    if (ds.schema.task == Task::classification) {
        std::map<int64_t, int64_t> votes;
        std::map<int64_t, int64_t> first_row;  // smallest row index voting for the class
        for (const Neighbor& nb : neighbors) {
            const int64_t cls = ds.target_class(nb.row);
            ++votes[cls];
            if (!first_row.count(cls) || nb.row < first_row[cls]) first_row[cls] = nb.row;
        }
        int64_t best_class = -1, best_votes = -1, best_row = -1;
        for (const auto& [cls, v] : votes) {
            if (v > best_votes || (v == best_votes && first_row[cls] < best_row)) {
                best_class = cls;
                best_votes = v;
                best_row = first_row[cls];
            }
        }
        pred.category = best_class;
    } else {
        double s = 0.0;
        for (const Neighbor& nb : neighbors)
            s += ds.rows[static_cast<size_t>(nb.row)][static_cast<size_t>(target)].number;
        pred.value = s / static_cast<double>(k);
    }
    return pred;
}

double knn_accuracy(const Dataset& ds, int64_t k, int eval_split) {
    const std::vector<int64_t> train_rows = ds.rows_of_split(kTrain);
    const std::vector<int64_t> eval_rows = ds.rows_of_split(eval_split);
    int64_t correct = 0;
    for (int64_t r : eval_rows) {
        const KnnPrediction p = knn_baseline(ds, train_rows, k, encode(ds, r));
        if (p.category == ds.target_class(r)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(eval_rows.size());
}

double majority_class_accuracy(const Dataset& ds, int eval_split) {
    std::map<int64_t, int64_t> counts;
    for (int64_t r : ds.rows_of_split(kTrain)) ++counts[ds.target_class(r)];
    int64_t majority = -1, best = -1;
    for (const auto& [cls, c] : counts) {
        if (c > best) {
            best = c;
            majority = cls;
        }
    }
    const std::vector<int64_t> eval_rows = ds.rows_of_split(eval_split);
    int64_t correct = 0;
    for (int64_t r : eval_rows)
        if (ds.target_class(r) == majority) ++correct;
    return static_cast<double>(correct) / static_cast<double>(eval_rows.size());
}

MetricsReport summarize_replicates(Task task, const std::string& metric_name,
                                   std::span<const double> values) {
    if (values.empty()) throw ContractError("summarize_replicates: no values");
    MetricsReport report;
    report.task = task;
    report.metric_name = metric_name;
    report.replicates = static_cast<int64_t>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    report.value = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - report.value) * (v - report.value);
        const double sample_var = ss / static_cast<double>(values.size() - 1);
        report.std_error = std::sqrt(sample_var / static_cast<double>(values.size()));
    }
    return report;
}

void write_led_display_dataset(const std::string& csv_path, const std::string& schema_path,
                               int64_t samples, double noise, uint64_t seed) {
    // Segment order: top, top-left, top-right, middle, bottom-left,
    // bottom-right, bottom.
    static const int digit_segments[10][7] = {
        {1, 1, 1, 0, 1, 1, 1}, {0, 0, 1, 0, 0, 1, 0}, {1, 0, 1, 1, 1, 0, 1},
        {1, 0, 1, 1, 0, 1, 1}, {0, 1, 1, 1, 0, 1, 0}, {1, 1, 0, 1, 0, 1, 1},
        {1, 1, 0, 1, 1, 1, 1}, {1, 0, 1, 0, 0, 1, 0}, {1, 1, 1, 1, 1, 1, 1},
        {1, 1, 1, 1, 0, 1, 1}};

    std::ofstream schema(schema_path);
    for (int s = 0; s < 7; ++s) schema << "segment" << s << ",categorical,2,0\n";
    schema << "digit,categorical,10,1\n";
    schema.close();

    Rng rng(seed);
    std::ofstream csv(csv_path);
    for (int s = 0; s < 7; ++s) csv << "segment" << s << ",";
    csv << "digit\n";
    for (int64_t i = 0; i < samples; ++i) {
        const int digit = static_cast<int>(rng.uniform_index(10));
        for (int s = 0; s < 7; ++s) {
            int bit = digit_segments[digit][s];
            if (rng.uniform01() < noise) bit = 1 - bit;
            csv << bit << ",";
        }
        csv << digit << "\n";
    }
}

void write_planted_neighbors_dataset(const std::string& csv_path, const std::string& schema_path,
                                     int64_t samples, int64_t features, int64_t classes,
                                     int64_t prototypes_per_class, double noise, uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> prototypes;
    std::vector<int64_t> prototype_class;
    for (int64_t c = 0; c < classes; ++c) {
        for (int64_t p = 0; p < prototypes_per_class; ++p) {
            std::vector<double> center(static_cast<size_t>(features));
            for (double& x : center) x = 2.0 * rng.normal();
            prototypes.push_back(std::move(center));
            prototype_class.push_back(c);
        }
    }

    std::ofstream schema(schema_path);
    for (int64_t f = 0; f < features; ++f) schema << "f" << f << ",continuous,0\n";
    schema << "label,categorical," << classes << ",1\n";
    schema.close();

    std::ofstream csv(csv_path);
    for (int64_t f = 0; f < features; ++f) csv << "f" << f << ",";
    csv << "label\n";
    char buf[40];
    for (int64_t i = 0; i < samples; ++i) {
        const size_t pick = static_cast<size_t>(rng.uniform_index(prototypes.size()));
        for (int64_t f = 0; f < features; ++f) {
            const double v = prototypes[pick][static_cast<size_t>(f)] + noise * rng.normal();
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            csv << buf << ",";
        }
        csv << prototype_class[pick] << "\n";
    }
}

Dataset make_toy_dataset() {
    Dataset ds;
    ds.schema = TableSchema::parse_text(
        "f0,continuous,0\n"
        "f1,categorical,3,0\n"
        "label,categorical,2,1\n");
    ds.category_tokens = {{}, {"a", "b", "c"}, {"0", "1"}};
    auto row = [](double f0, int64_t f1, int64_t label) {
        return std::vector<RawValue>{{false, f0, -1}, {false, 0.0, f1}, {false, 0.0, label}};
    };
    ds.rows.push_back(row(0.1, 0, 0));
    ds.rows.push_back(row(-1.2, 1, 1));
    ds.rows.push_back(row(0.7, 2, 1));
    ds.rows.push_back(row(2.0, 0, 0));
    assign_split(ds, {kTrain, kTrain, kTrain, kTrain});
    return ds;
}

void write_manifest(const std::string& path, const std::string& config_json, uint64_t seed,
                    std::span<const std::pair<std::string, std::string>> data_fingerprints) {
    nlohmann::json manifest;
    manifest["code_version"] = kVersion;
    manifest["seed"] = seed;
    manifest["config"] =
        nlohmann::json::parse(config_json, nullptr, /*allow_exceptions=*/false);
    if (manifest["config"].is_discarded()) manifest["config"] = config_json;
    nlohmann::json fp = nlohmann::json::object();
    for (const auto& [name, hash] : data_fingerprints) fp[name] = hash;
    manifest["data_fingerprints"] = fp;
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write manifest: " + path);
    out << manifest.dump(2) << "\n";
}

}  // namespace hopular
