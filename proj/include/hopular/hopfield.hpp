#pragma once

#include <vector>

#include "hopular/rng.hpp"
#include "hopular/tensor.hpp"

namespace hopular {

// Continuous modern Hopfield network memory: stored patterns are the columns
// of X (dim x count). Immutable after construction; all operations are pure.
struct PatternMemory {
    Tensor patterns;   // dim x count, column i = stored pattern x_i
    double beta = 1.0;
    double max_norm = 0.0;  // max_i ||x_i||

    static PatternMemory from_columns(Tensor x, double beta);
    static PatternMemory from_pattern_list(const std::vector<Tensor>& xs, double beta);

    int64_t dim() const { return patterns.rows(); }
    int64_t count() const { return patterns.cols(); }
    Tensor pattern(int64_t i) const { return patterns.col_vector(i); }
};

struct RetrievalResult {
    Tensor xi_star;
    int iterations = 0;
    bool converged = false;
    double final_delta = 0.0;
    std::vector<double> energies;  // energy at the start state and after each update
};

// E = -lse(beta, X^T xi) + beta^{-1} log N + xi^T xi / 2 + M^2 / 2
double energy(const PatternMemory& mem, const Tensor& xi);

// One update step: X softmax(beta X^T xi). Output lies in the convex hull of
// the stored patterns.
Tensor update(const PatternMemory& mem, const Tensor& xi);

// Iterates the update rule until the step norm drops below tol or max_iter is
// reached. Energy is non-increasing along the trajectory.
RetrievalResult retrieve(const PatternMemory& mem, Tensor xi, double tol, int max_iter);

// Separation of pattern i: min_{j != i} (x_i^T x_i - x_i^T x_j). Requires at
// least two stored patterns.
double separation(const PatternMemory& mem, int64_t i);

// Retrieval-error bound for pattern i at query xi:
//   2 (N-1) exp(-beta (Delta_i - 2 max{||xi - x_i||, ||x_i* - x_i||} M)) M
// where x_i* is approximated by retrieve(tol=1e-10, max_iter=100).
double retrieval_error_bound(const PatternMemory& mem, const Tensor& xi, int64_t i);

// Exponent argument Delta_i - 2 max{...} M of the bound above; the bound is
// informative only where this is positive.
double retrieval_bound_exponent_arg(const PatternMemory& mem, const Tensor& xi, int64_t i);

// Upper branch of the Lambert W function, solved by Halley iteration from a
// log-based initial guess. Requires z >= -1/e.
double lambert_w0(double z);

// Constants of the storage-capacity bound for patterns on the sphere of
// radius K sqrt(d-1).
struct CapacityParams {
    double p = 0.0;    // failure probability in (0, 1]
    double K = 0.0;    // sphere radius factor
    int64_t d = 0;     // pattern dimension
    double beta = 0.0;
    double a = 0.0;    // 2/(d-1) (1 + ln(2 beta K^2 p (d-1)))
    double b = 0.0;    // 2 K^2 beta / 5
    double c = 0.0;    // b / W0(exp(a + ln b))

    static CapacityParams make(double beta, double K, int64_t d, double p);
};

// N_min = sqrt(p) * c^((d-1)/4). Throws CapacityConditionError (carrying c and
// the threshold) when c < (2/sqrt(p))^(4/(d-1)).
double storage_capacity_bound(const CapacityParams& params);

// Definition-1 storedness probe: a sphere of radius sqrt(separation)/2 is
// placed around pattern i; `probes` random queries inside it must all converge
// to one common fixed point inside the sphere, and the sphere must not
// intersect any other pattern's sphere.
bool pattern_stored(const PatternMemory& mem, int64_t i, int probes, Rng& rng);

}  // namespace hopular
