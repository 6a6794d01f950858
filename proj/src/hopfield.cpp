#include "hopular/hopfield.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hopular/errors.hpp"

namespace hopular {

PatternMemory PatternMemory::from_columns(Tensor x, double beta) {
    if (x.rank() != 2 || x.cols() < 1)
        throw ContractError("pattern memory needs at least one stored pattern");
    if (!x.all_finite()) throw DomainError("pattern memory with non-finite patterns");
    if (!(beta > 0.0)) throw DomainError("pattern memory requires beta > 0");
    PatternMemory mem;
    mem.beta = beta;
    mem.max_norm = 0.0;
    for (int64_t j = 0; j < x.cols(); ++j)
        mem.max_norm = std::max(mem.max_norm, x.col_vector(j).norm());
    mem.patterns = std::move(x);
    return mem;
}

PatternMemory PatternMemory::from_pattern_list(const std::vector<Tensor>& xs, double beta) {
    if (xs.empty()) throw ContractError("pattern memory needs at least one stored pattern");
    const int64_t d = xs[0].size();
    Tensor x = Tensor::matrix(d, static_cast<int64_t>(xs.size()));
    for (size_t j = 0; j < xs.size(); ++j) {
        if (xs[j].size() != d) throw DimensionError("stored patterns differ in dimension");
        for (int64_t i = 0; i < d; ++i) x.at(i, static_cast<int64_t>(j)) = xs[j][i];
    }
    return from_columns(std::move(x), beta);
}

namespace {

void check_query_dim(const PatternMemory& mem, const Tensor& xi, const char* op) {
    if (xi.size() != mem.dim())
        throw DimensionError(std::string(op) + ": query of size " + std::to_string(xi.size()) +
                             " against patterns of dimension " + std::to_string(mem.dim()));
}

}  // namespace

double energy(const PatternMemory& mem, const Tensor& xi) {
    check_query_dim(mem, xi, "energy");
    const Tensor scores = matvec_transposed(mem.patterns, xi);
    const double lse = logsumexp(scores, mem.beta);
    const double n_term = std::log(static_cast<double>(mem.count())) / mem.beta;
    return -lse + n_term + 0.5 * dot(xi, xi) + 0.5 * mem.max_norm * mem.max_norm;
}

Tensor update(const PatternMemory& mem, const Tensor& xi) {
    check_query_dim(mem, xi, "update");
    const Tensor scores = matvec_transposed(mem.patterns, xi);
    const Tensor weights = softmax_scaled(scores, mem.beta);
    return matvec(mem.patterns, weights);
}

RetrievalResult retrieve(const PatternMemory& mem, Tensor xi, double tol, int max_iter) {
    check_query_dim(mem, xi, "retrieve");
    if (!(tol > 0.0)) throw ContractError("retrieve requires tol > 0");
    if (max_iter < 1) throw ContractError("retrieve requires max_iter >= 1");

    RetrievalResult result;
    result.energies.push_back(energy(mem, xi));
    result.final_delta = 1.0 / 0.0;
    for (int it = 0; it < max_iter; ++it) {
        const Tensor next = update(mem, xi);
        result.final_delta = sub(next, xi).norm();
        xi = next;
        result.iterations = it + 1;
        result.energies.push_back(energy(mem, xi));
        if (result.final_delta <= tol) {
            result.converged = true;
            break;
        }
    }
    result.xi_star = std::move(xi);
    return result;
}

double separation(const PatternMemory& mem, int64_t i) {
    if (mem.count() < 2)
        throw ContractError("separation undefined for a single stored pattern");
    if (i < 0 || i >= mem.count()) throw ContractError("separation: pattern index out of range");
    const Tensor xi = mem.pattern(i);
    const double self = dot(xi, xi);
    double min_delta = 1.0 / 0.0;
    for (int64_t j = 0; j < mem.count(); ++j) {
        if (j == i) continue;
        min_delta = std::min(min_delta, self - dot(xi, mem.pattern(j)));
    }
    return min_delta;
}

double retrieval_bound_exponent_arg(const PatternMemory& mem, const Tensor& xi, int64_t i) {
    const double delta = separation(mem, i);
    const Tensor x_i = mem.pattern(i);
    const Tensor x_star = retrieve(mem, xi, 1e-10, 100).xi_star;
    const double reach = std::max(sub(xi, x_i).norm(), sub(x_star, x_i).norm());
    return delta - 2.0 * reach * mem.max_norm;
}

double retrieval_error_bound(const PatternMemory& mem, const Tensor& xi, int64_t i) {
    check_query_dim(mem, xi, "retrieval_error_bound");
    const double exponent_arg = retrieval_bound_exponent_arg(mem, xi, i);
    const double n = static_cast<double>(mem.count());
    return 2.0 * (n - 1.0) * std::exp(-mem.beta * exponent_arg) * mem.max_norm;
}

double lambert_w0(double z) {
    constexpr double inv_e = 0.36787944117144232159552377016146;
    if (z < -inv_e) throw DomainError("lambert_w0 defined only for z >= -1/e");
    if (z == 0.0) return 0.0;

    // Initial guess: w ~ ln(z) - ln(ln(z)) for large z, series near the branch
    // point, and z itself near zero.
    double w;
    if (z > 3.0) {
        const double lz = std::log(z);
        w = lz - std::log(lz);
    } else if (z > -0.25) {
        w = z > 0.0 ? std::log1p(z) : z;
    } else {
        // Near -1/e: w = -1 + sqrt(2(1 + e z)) from the branch-point expansion.
        w = -1.0 + std::sqrt(2.0 * (1.0 + std::exp(1.0) * z));
    }

    for (int it = 0; it < 50; ++it) {
        const double ew = std::exp(w);
        const double f = w * ew - z;
        const double denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0);
        if (denom == 0.0) break;
        const double step = f / denom;
        w -= step;
        if (std::abs(step) <= 1e-14 * (1.0 + std::abs(w))) break;
    }
    return w;
}

CapacityParams CapacityParams::make(double beta, double K, int64_t d, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("capacity: p must lie in (0, 1]");
    if (d < 2) throw DomainError("capacity: dimension must be at least 2");
    if (!(beta > 0.0) || !(K > 0.0)) throw DomainError("capacity: beta and K must be positive");
    CapacityParams cp;
    cp.p = p;
    cp.K = K;
    cp.d = d;
    cp.beta = beta;
    const double dm1 = static_cast<double>(d - 1);
    cp.a = 2.0 / dm1 * (1.0 + std::log(2.0 * beta * K * K * p * dm1));
    cp.b = 2.0 * K * K * beta / 5.0;
    cp.c = cp.b / lambert_w0(std::exp(cp.a + std::log(cp.b)));
    return cp;
}

double storage_capacity_bound(const CapacityParams& params) {
    const double dm1 = static_cast<double>(params.d - 1);
    const double threshold = std::pow(2.0 / std::sqrt(params.p), 4.0 / dm1);
    if (params.c < threshold)
        throw CapacityConditionError(
            "capacity condition violated: c = " + std::to_string(params.c) +
                " < threshold " + std::to_string(threshold),
            params.c, threshold);
    return std::sqrt(params.p) * std::pow(params.c, dm1 / 4.0);
}

bool pattern_stored(const PatternMemory& mem, int64_t i, int probes, Rng& rng) {
    const double radius = 0.5 * std::sqrt(std::max(separation(mem, i), 0.0));
    if (radius <= 0.0) return false;
    const Tensor x_i = mem.pattern(i);

    // Sphere disjointness against every other pattern's sphere.
    for (int64_t j = 0; j < mem.count(); ++j) {
        if (j == i) continue;
        const double radius_j = 0.5 * std::sqrt(std::max(separation(mem, j), 0.0));
        if (sub(x_i, mem.pattern(j)).norm() <= radius + radius_j) return false;
    }

    Tensor common_fixed_point;
    for (int probe = 0; probe < probes; ++probe) {
        // Uniform direction, radius scaled by u^(1/d) for uniformity in the ball.
        Tensor direction = Tensor::zeros({mem.dim()});
        for (int64_t k = 0; k < mem.dim(); ++k) direction[k] = rng.normal();
        const double len = direction.norm();
        if (len == 0.0) continue;
        const double r = radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(mem.dim()));
        Tensor query = add(x_i, scale(direction, r / len));

        const RetrievalResult res = retrieve(mem, std::move(query), 1e-10, 200);
        if (!res.converged) return false;
        if (sub(res.xi_star, x_i).norm() > radius) return false;
        if (common_fixed_point.size() == 0) {
            common_fixed_point = res.xi_star;
        } else if (sub(res.xi_star, common_fixed_point).norm() > 1e-6) {
            return false;
        }
    }
    return true;
}

}  // namespace hopular
