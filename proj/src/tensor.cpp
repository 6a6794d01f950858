#include "hopular/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hopular {

namespace {

int64_t shape_product(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw DimensionError("negative dimension in shape");
        n *= d;
    }
    return n;
}

}  // namespace

Tensor Tensor::zeros(std::vector<int64_t> shape) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.assign(static_cast<size_t>(shape_product(t.shape_)), 0.0);
    t.cols_ = t.shape_.size() == 2 ? t.shape_[1] : 1;
    return t;
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
    Tensor t = zeros(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::scalar(double value) {
    Tensor t;
    t.shape_ = {};
    t.data_ = {value};
    t.cols_ = 1;
    return t;
}

Tensor Tensor::vector(std::vector<double> values) {
    Tensor t;
    t.shape_ = {static_cast<int64_t>(values.size())};
    t.data_ = std::move(values);
    t.cols_ = 1;
    return t;
}

Tensor Tensor::matrix(int64_t rows, int64_t cols) { return zeros({rows, cols}); }

Tensor Tensor::matrix(int64_t rows, int64_t cols, std::vector<double> values) {
    if (static_cast<int64_t>(values.size()) != rows * cols)
        throw DimensionError("matrix data length does not match " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    Tensor t;
    t.shape_ = {rows, cols};
    t.data_ = std::move(values);
    t.cols_ = cols;
    return t;
}

Tensor Tensor::identity(int64_t n) {
    Tensor t = matrix(n, n);
    for (int64_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

int64_t Tensor::rows() const {
    if (rank() != 2) throw DimensionError("rows() on tensor of shape " + shape_string());
    return shape_[0];
}

int64_t Tensor::cols() const {
    if (rank() != 2) throw DimensionError("cols() on tensor of shape " + shape_string());
    return shape_[1];
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() requires a scalar, got shape " + shape_string());
    return data_[0];
}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ", ";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
    if (shape_product(shape) != size())
        throw DimensionError("reshape from " + shape_string() + " changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    t.cols_ = t.shape_.size() == 2 ? t.shape_[1] : 1;
    return t;
}

Tensor Tensor::transposed() const {
    const int64_t r = rows(), c = cols();
    Tensor t = matrix(c, r);
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) t.at(j, i) = at(i, j);
    return t;
}

Tensor Tensor::row_vector(int64_t i) const {
    const int64_t c = cols();
    if (i < 0 || i >= rows()) throw ContractError("row index out of range");
    std::vector<double> v(data_.begin() + static_cast<size_t>(i * c),
                          data_.begin() + static_cast<size_t>((i + 1) * c));
    return vector(std::move(v));
}

Tensor Tensor::col_vector(int64_t j) const {
    const int64_t r = rows(), c = cols();
    if (j < 0 || j >= c) throw ContractError("column index out of range");
    std::vector<double> v(static_cast<size_t>(r));
    for (int64_t i = 0; i < r; ++i) v[static_cast<size_t>(i)] = at(i, j);
    return vector(std::move(v));
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double Tensor::norm() const {
    double s = 0.0;
    for (double x : data_) s += x * x;
    return std::sqrt(s);
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::abs(x));
    return m;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw DimensionError("matmul shape mismatch: " + a.shape_string() + " x " +
                             b.shape_string());
    const int64_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c = Tensor::matrix(m, n);
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * k;
        double* crow = c.data() + i * n;
        for (int64_t l = 0; l < k; ++l) {
            const double av = arow[l];
            if (av == 0.0) continue;
            const double* brow = b.data() + l * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor matvec(const Tensor& a, const Tensor& v) {
    if (a.rank() != 2 || v.rank() != 1 || a.cols() != v.size())
        throw DimensionError("matvec shape mismatch: " + a.shape_string() + " x " +
                             v.shape_string());
    const int64_t m = a.rows(), k = a.cols();
    Tensor out = Tensor::zeros({m});
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * k;
        double s = 0.0;
        for (int64_t l = 0; l < k; ++l) s += arow[l] * v[l];
        out[i] = s;
    }
    return out;
}

Tensor matvec_transposed(const Tensor& a, const Tensor& v) {
    if (a.rank() != 2 || v.rank() != 1 || a.rows() != v.size())
        throw DimensionError("matvec_transposed shape mismatch: " + a.shape_string() + " x " +
                             v.shape_string());
    const int64_t m = a.rows(), k = a.cols();
    Tensor out = Tensor::zeros({k});
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a.data() + i * k;
        const double vi = v[i];
        if (vi == 0.0) continue;
        for (int64_t l = 0; l < k; ++l) out[l] += arow[l] * vi;
    }
    return out;
}

Tensor softmax_scaled(const Tensor& v, double beta) {
    if (!(beta > 0.0)) throw DomainError("softmax_scaled requires beta > 0");
    if (v.size() == 0) throw DomainError("softmax_scaled on empty input");
    if (!v.all_finite()) throw DomainError("softmax_scaled on non-finite input");
    double m = v[0];
    for (int64_t i = 1; i < v.size(); ++i) m = std::max(m, v[i]);
    Tensor out = Tensor::zeros(v.shape());
    double z = 0.0;
    for (int64_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(beta * (v[i] - m));
        z += out[i];
    }
    for (int64_t i = 0; i < v.size(); ++i) out[i] /= z;
    return out;
}

Tensor softmax_columns(const Tensor& m, double beta) {
    if (!(beta > 0.0)) throw DomainError("softmax_columns requires beta > 0");
    if (!m.all_finite()) throw DomainError("softmax_columns on non-finite input");
    const int64_t r = m.rows(), c = m.cols();
    if (r == 0) throw DomainError("softmax_columns on empty input");
    Tensor out = Tensor::matrix(r, c);
    for (int64_t j = 0; j < c; ++j) {
        double mx = m.at(0, j);
        for (int64_t i = 1; i < r; ++i) mx = std::max(mx, m.at(i, j));
        double z = 0.0;
        for (int64_t i = 0; i < r; ++i) {
            out.at(i, j) = std::exp(beta * (m.at(i, j) - mx));
            z += out.at(i, j);
        }
        for (int64_t i = 0; i < r; ++i) out.at(i, j) /= z;
    }
    return out;
}

double logsumexp(const Tensor& v, double beta) {
    if (v.size() == 0) throw DomainError("logsumexp on empty input");
    if (!(beta > 0.0)) throw DomainError("logsumexp requires beta > 0");
    if (!v.all_finite()) throw DomainError("logsumexp on non-finite input");
    double m = v[0];
    for (int64_t i = 1; i < v.size(); ++i) m = std::max(m, v[i]);
    double s = 0.0;
    for (int64_t i = 0; i < v.size(); ++i) s += std::exp(beta * (v[i] - m));
    return m + std::log(s) / beta;
}

double dot(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size())
        throw DimensionError("dot shape mismatch: " + a.shape_string() + " vs " +
                             b.shape_string());
    double s = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw DimensionError("add shape mismatch: " + a.shape_string() + " vs " +
                             b.shape_string());
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw DimensionError("sub shape mismatch: " + a.shape_string() + " vs " +
                             b.shape_string());
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw DimensionError("mul shape mismatch: " + a.shape_string() + " vs " +
                             b.shape_string());
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= c;
    return out;
}

}  // namespace hopular
