#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hopular/errors.hpp"

namespace hopular {

// Dense row-major 64-bit floating-point tensor with value semantics.
// Rank 0 (scalar), 1 (vector) and 2 (matrix) cover everything in the model;
// higher ranks are representable but unused.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor full(std::vector<int64_t> shape, double value);
    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(int64_t rows, int64_t cols);
    static Tensor matrix(int64_t rows, int64_t cols, std::vector<double> values);
    static Tensor identity(int64_t n);

    const std::vector<int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool is_scalar() const { return size() == 1; }

    int64_t rows() const;
    int64_t cols() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }

    double at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * cols_ + j)]; }
    double& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * cols_ + j)]; }

    // Scalar extraction; throws ContractError if size() != 1.
    double item() const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_string() const;

    // Element-order-preserving reshape; total size must match.
    Tensor reshaped(std::vector<int64_t> shape) const;
    Tensor transposed() const;
    Tensor row_vector(int64_t i) const;  // copy of row i (rank 2 only)
    Tensor col_vector(int64_t j) const;  // copy of column j (rank 2 only)

    bool all_finite() const;
    double norm() const;      // Euclidean norm over all elements
    double max_abs() const;

    void fill(double value);

private:
    std::vector<int64_t> shape_;
    std::vector<double> data_;
    int64_t cols_ = 1;  // stride of the leading dimension for rank-2 access
};

// Plain (non-differentiated) kernels. These are the single implementation of
// each primitive; the autodiff layer wraps them and adds backward rules.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matvec(const Tensor& a, const Tensor& v);
Tensor matvec_transposed(const Tensor& a, const Tensor& v);  // a^T v
Tensor softmax_scaled(const Tensor& v, double beta);
Tensor softmax_columns(const Tensor& m, double beta);
double logsumexp(const Tensor& v, double beta);
double dot(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

}  // namespace hopular
