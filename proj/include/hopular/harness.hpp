#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hopular/data.hpp"
#include "hopular/model.hpp"
#include "hopular/tensor.hpp"

namespace hopular {

inline constexpr const char* kVersion = "0.1.0";

// Nadaraya-Watson estimate with the RBF kernel in its softmax form:
// g(z) = Y softmax(beta Z^T z). The softmax identity equals the kernel ratio
// only for unit-norm inputs, which is checked when require_unit_norm is set.
// Zero-norm inputs are always rejected.
Tensor nw_regress(const Tensor& inputs /* dim x n, columns z_i */,
                  const Tensor& labels /* ydim x n, columns y_i */, const Tensor& query,
                  double beta, bool require_unit_norm = true);

// Random H_s head against the Nadaraya-Watson construction
// Z^T = X^T W_X^T, z = W_xi xi, Y = W_S W_X X; returns the max absolute
// deviation between the two evaluations.
struct HsEquivalenceCase {
    int64_t feature_dim = 12;
    int64_t hopfield_dim = 6;
    int64_t memory_count = 10;
    double beta = 1.0;
    uint64_t seed = 0;
};
double equivalence_nw_vs_hs(const HsEquivalenceCase& c);

// Closed-form gradient of L = lse(beta, -Y Z^T xi) for the exponential-loss
// linear model with targets y in {-1, +1} (Y diagonal):
// dL/dxi = -Z Y softmax(-beta Y Z^T xi).
Tensor adaboost_gradient(const Tensor& inputs /* dim x n */, const std::vector<int>& labels,
                         const Tensor& xi, double beta);
double adaboost_objective(const Tensor& inputs, const std::vector<int>& labels, const Tensor& xi,
                          double beta);

struct KnnPrediction {
    int64_t category = -1;  // classification
    double value = 0.0;     // regression (raw target space)
};

// k-nearest-neighbour baseline in the one-hot/z-scored encoded feature space.
// Distance ties and vote ties resolve toward the smallest row index.
KnnPrediction knn_baseline(const Dataset& ds, std::span<const int64_t> train_rows, int64_t k,
                           const EncodedSample& query);

double knn_accuracy(const Dataset& ds, int64_t k, int eval_split);
double majority_class_accuracy(const Dataset& ds, int eval_split);

struct MetricsReport {
    Task task = Task::classification;
    std::string metric_name;
    double value = 0.0;
    double std_error = 0.0;
    int64_t replicates = 1;
};

MetricsReport summarize_replicates(Task task, const std::string& metric_name,
                                   std::span<const double> values);

// Seeded generators for the bundled demonstration workloads. Both write a CSV
// table plus a schema file in the loader's format.
//
// LED display domain: ten digits rendered on seven binary segments, each
// segment flipped independently with `noise` probability; digit is the class.
void write_led_display_dataset(const std::string& csv_path, const std::string& schema_path,
                               int64_t samples, double noise, uint64_t seed);

// Planted nearest-neighbour structure: per-class Gaussian prototypes with
// small isotropic noise, so 1-NN in feature space is near-perfect.
void write_planted_neighbors_dataset(const std::string& csv_path, const std::string& schema_path,
                                     int64_t samples, int64_t features, int64_t classes,
                                     int64_t prototypes_per_class, double noise, uint64_t seed);

// Reproducibility manifest written by every CLI run.
void write_manifest(const std::string& path, const std::string& config_json, uint64_t seed,
                    std::span<const std::pair<std::string, std::string>> data_fingerprints);

// Fixed in-memory 4-sample table (continuous + categorical feature, binary
// target), all rows in the training split. Fixture for gradient checks.
Dataset make_toy_dataset();

}  // namespace hopular
