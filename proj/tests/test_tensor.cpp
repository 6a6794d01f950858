#include <doctest.h>

#include <cmath>
#include <limits>

#include "hopular/rng.hpp"
#include "hopular/tensor.hpp"

using namespace hopular;

TEST_CASE("matmul identity and zero cases") {
    const Tensor eye = Tensor::identity(2);
    const Tensor v = Tensor::matrix(2, 1, {1.0, 2.0});
    const Tensor out = matmul(eye, v);
    CHECK(out.at(0, 0) == 1.0);
    CHECK(out.at(1, 0) == 2.0);

    const Tensor a = Tensor::matrix(2, 2, {1.0, 2.0, 3.0, 4.0});
    const Tensor z = Tensor::matrix(2, 1, {0.0, 0.0});
    const Tensor out2 = matmul(a, z);
    CHECK(out2.at(0, 0) == 0.0);
    CHECK(out2.at(1, 0) == 0.0);
}

TEST_CASE("matmul matches index-loop reference on random input") {
    Rng rng(5);
    Tensor a = Tensor::matrix(3, 4);
    Tensor b = Tensor::matrix(4, 2);
    for (int64_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(-2.0, 2.0);
    for (int64_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-2.0, 2.0);
    const Tensor c = matmul(a, b);
    for (int64_t i = 0; i < 3; ++i) {
        for (int64_t j = 0; j < 2; ++j) {
            double expected = 0.0;
            for (int64_t l = 0; l < 4; ++l) expected += a.at(i, l) * b.at(l, j);
            CHECK(c.at(i, j) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
    const Tensor a = Tensor::matrix(2, 3);
    const Tensor b = Tensor::matrix(2, 2);
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2, 3]") != std::string::npos);
        CHECK(msg.find("[2, 2]") != std::string::npos);
    }
}

TEST_CASE("softmax_scaled on a constant vector is uniform") {
    const Tensor v = Tensor::full({5}, 3.7);
    for (double beta : {0.5, 1.0, 250.0}) {
        const Tensor p = softmax_scaled(v, beta);
        for (int64_t i = 0; i < 5; ++i) CHECK(p[i] == doctest::Approx(0.2).epsilon(1e-14));
    }
}

TEST_CASE("softmax_scaled matches the closed two-way form") {
    const Tensor p = softmax_scaled(Tensor::vector({3.6, 0.4}), 1.0);
    const double expected0 = 1.0 / (1.0 + std::exp(-3.2));
    CHECK(p[0] == doctest::Approx(expected0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 - expected0).epsilon(1e-12));
    CHECK(p[0] == doctest::Approx(0.9608).epsilon(1e-4));
}

TEST_CASE("softmax_scaled approaches argmax for large beta") {
    const Tensor p = softmax_scaled(Tensor::vector({1.0, 0.0}), 1000.0);
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(p[1]) < 1e-9);
}

TEST_CASE("softmax_scaled rejects non-finite input") {
    Tensor v = Tensor::vector({1.0, 0.0});
    v[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(softmax_scaled(v, 1.0), DomainError);
    v[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(softmax_scaled(v, 1.0), DomainError);
}

TEST_CASE("softmax invariants: nonnegative, sums to one") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor v = Tensor::zeros({7});
        for (int64_t i = 0; i < v.size(); ++i) v[i] = rng.uniform(-5.0, 5.0);
        const double beta = rng.uniform(0.1, 50.0);
        const Tensor p = softmax_scaled(v, beta);
        double total = 0.0;
        for (int64_t i = 0; i < p.size(); ++i) {
            CHECK(p[i] >= 0.0);
            total += p[i];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("logsumexp closed forms") {
    CHECK(logsumexp(Tensor::vector({0.0}), 1.0) == doctest::Approx(0.0).epsilon(1e-15));
    const double a = 1.73;
    CHECK(logsumexp(Tensor::vector({a, a}), 1.0) ==
          doctest::Approx(a + std::log(2.0)).epsilon(1e-14));
    CHECK_THROWS_AS(logsumexp(Tensor::vector({}), 1.0), DomainError);
}

TEST_CASE("logsumexp bounds: max(v) <= lse <= max(v) + ln(n)/beta") {
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const int64_t n = 1 + static_cast<int64_t>(rng.uniform_index(8));
        Tensor v = Tensor::zeros({n});
        double max_v = -1e300;
        for (int64_t i = 0; i < n; ++i) {
            v[i] = rng.uniform(-10.0, 10.0);
            max_v = std::max(max_v, v[i]);
        }
        const double beta = rng.uniform(0.2, 20.0);
        const double lse = logsumexp(v, beta);
        CHECK(lse >= max_v - 1e-12);
        CHECK(lse <= max_v + std::log(static_cast<double>(n)) / beta + 1e-12);
    }
}

TEST_CASE("transpose twice and reshape round-trip are identities") {
    Rng rng(31);
    Tensor m = Tensor::matrix(3, 5);
    for (int64_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-2.0, 2.0);
    const Tensor round = m.transposed().transposed();
    for (int64_t i = 0; i < m.size(); ++i) CHECK(round[i] == m[i]);

    const Tensor reshaped = m.reshaped({5, 3}).reshaped({3, 5});
    for (int64_t i = 0; i < m.size(); ++i) CHECK(reshaped[i] == m[i]);

    CHECK_THROWS_AS(m.reshaped({4, 4}), DimensionError);
}

TEST_CASE("scalar extraction contract") {
    CHECK(Tensor::scalar(4.5).item() == 4.5);
    CHECK_THROWS_AS(Tensor::vector({1.0, 2.0}).item(), ContractError);
}
