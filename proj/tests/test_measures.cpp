#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lot/measures.hpp"
#include "oracles.hpp"

#include <cmath>
#include <limits>

using namespace lot;

TEST_CASE("build_measure defaults to uniform weights") {
    PointCloud c(Matrix::Random(2, 4));
    DiscreteMeasure m = build_measure(c);
    CHECK(m.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(m.weights(i) == doctest::Approx(0.25));
    CHECK(m.normalized);
}

TEST_CASE("build_measure with one point gives weight one") {
    DiscreteMeasure m = build_measure(PointCloud(Matrix::Zero(3, 1)));
    CHECK(m.weights(0) == 1.0);
}

TEST_CASE("build_measure passes unnormalized weights through") {
    Vector w(2);
    w << 2.0, 2.0;
    DiscreteMeasure m = build_measure(PointCloud(Matrix::Zero(1, 2)), w);
    CHECK(m.mass() == 4.0);
    CHECK_FALSE(m.normalized);
}

TEST_CASE("build_measure rejects bad weights") {
    PointCloud c(Matrix::Zero(1, 2));
    Vector neg(2), zero = Vector::Zero(2), short_w(1);
    neg << 1.0, -0.5;
    short_w << 1.0;
    CHECK_THROWS_AS(build_measure(c, neg), std::invalid_argument);
    CHECK_THROWS_AS(build_measure(c, zero), std::invalid_argument);
    CHECK_THROWS_AS(build_measure(c, short_w), std::invalid_argument);
}

TEST_CASE("point clouds reject invalid data") {
    Matrix bad = Matrix::Zero(2, 2);
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(PointCloud{bad}, std::invalid_argument);
    CHECK_THROWS_AS(PointCloud(Matrix::Zero(2, 2), Labels{1}), std::invalid_argument);
    CHECK_THROWS_AS(PointCloud(Matrix(2, 0)), std::invalid_argument);
}

TEST_CASE("mahalanobis cost examples") {
    Matrix o = Matrix::Zero(2, 1), a(2, 1);
    a << 1.0, 0.0;
    CHECK(mahalanobis_cost(o, o, MetricSpec::identity()).values(0, 0) == 0.0);
    CHECK(mahalanobis_cost(a, o, MetricSpec::identity()).values(0, 0) == doctest::Approx(1.0));
    MetricSpec m{Matrix(Eigen::Vector2d(4.0, 1.0).asDiagonal()), 0.5};
    CHECK(mahalanobis_cost(a, o, m).values(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("mahalanobis cost with identity matches a double loop") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        Matrix A = oracle::gaussian(3, 5, rng), B = oracle::gaussian(3, 5, rng);
        Matrix c = mahalanobis_cost(A, B, MetricSpec::identity()).values;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += (A(k, i) - B(k, j)) * (A(k, i) - B(k, j));
                CHECK(std::abs(c(i, j) - s) < 1e-10);
            }
    }
}

TEST_CASE("mahalanobis cost rejects mismatched or invalid metrics") {
    CHECK_THROWS_AS(mahalanobis_cost(Matrix::Zero(2, 1), Matrix::Zero(3, 1), MetricSpec::identity()),
                    std::invalid_argument);
    Matrix asym(2, 2);
    asym << 1.0, 0.5, 0.0, 1.0;
    CHECK_THROWS_AS(mahalanobis_cost(Matrix::Zero(2, 1), Matrix::Zero(2, 1), MetricSpec{asym, 1.0}),
                    std::invalid_argument);
    Matrix neg = -Matrix::Identity(2, 2);
    CHECK_THROWS_AS(mahalanobis_cost(Matrix::Zero(2, 1), Matrix::Zero(2, 1), MetricSpec{neg, 1.0}),
                    std::invalid_argument);
}

TEST_CASE("gibbs kernel examples") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(gibbs_kernel(CostMatrix{Matrix::Zero(1, 1)}, 1.0).values(0, 0) == 1.0);
    const double eps = 0.7;
    CHECK(gibbs_kernel(CostMatrix{Matrix::Constant(1, 1, eps * std::log(2.0))}, eps).values(0, 0) ==
          doctest::Approx(0.5));
    CHECK(gibbs_kernel(CostMatrix{Matrix::Constant(1, 1, inf)}, 1.0).values(0, 0) == 0.0);
    CHECK_THROWS_AS(gibbs_kernel(CostMatrix{Matrix::Zero(1, 1)}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(gibbs_kernel(CostMatrix{Matrix::Zero(1, 1)}, -1.0), std::invalid_argument);
}

TEST_CASE("gibbs kernel is monotone decreasing in cost") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        Matrix c1 = oracle::random_positive(4, 4, rng, 0.0, 3.0);
        Matrix c2 = c1 + oracle::random_positive(4, 4, rng, 0.0, 1.0);
        Matrix k1 = gibbs_kernel(CostMatrix{c1}, 0.5).values, k2 = gibbs_kernel(CostMatrix{c2}, 0.5).values;
        CHECK((k1.array() >= k2.array()).all());
    }
}

TEST_CASE("shifted kernels rescale rows and columns") {
    std::mt19937_64 rng(3);
    Matrix c = oracle::random_positive(3, 4, rng, 1.0, 5.0);
    GibbsKernel k = shifted_gibbs_kernel(CostMatrix{c}, 0.5, KernelShift::Rows);
    for (int i = 0; i < 3; ++i) CHECK(k.values.row(i).maxCoeff() == doctest::Approx(1.0));
    GibbsKernel kc = shifted_gibbs_kernel(CostMatrix{c}, 0.5, KernelShift::Cols);
    for (int j = 0; j < 4; ++j) CHECK(kc.values.col(j).maxCoeff() == doctest::Approx(1.0));
    GibbsKernel kg = shifted_gibbs_kernel(CostMatrix{c}, 0.5, KernelShift::Global);
    CHECK(kg.values.maxCoeff() == doctest::Approx(1.0));
}

TEST_CASE("wasserstein anchor cost on identical single points") {
    PointCloud X(Matrix::Constant(2, 1, 0.3)), Y(Matrix::Constant(2, 1, 0.3));
    TransportPlan one{Matrix::Ones(1, 1), Vector::Ones(1), Vector::Ones(1)};
    AnchorCostResult r = wasserstein_anchor_cost(one, one, X, Y, one, 0.5, 1.0, SolverConfig{});
    CHECK(r.cost.values(0, 0) == doctest::Approx(0.0));
    REQUIRE(r.inner.plans.count({0, 0}) == 1);
    CHECK(r.inner.plans.at({0, 0}).values(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("wasserstein anchor cost threshold selects only dominant pairs") {
    std::mt19937_64 rng(9);
    PointCloud X(oracle::gaussian(2, 6, rng)), Y(oracle::gaussian(2, 6, rng));
    Matrix px = oracle::random_positive(6, 2, rng), py = oracle::random_positive(2, 6, rng);
    px = px / px.sum();
    py = py / py.sum();
    Matrix pz(2, 2);
    pz << 0.5, 0.01, 0.01, 0.48;
    TransportPlan Px{px, px.rowwise().sum(), px.colwise().sum().transpose()};
    TransportPlan Py{py, py.rowwise().sum(), py.colwise().sum().transpose()};
    TransportPlan Pz{pz, pz.rowwise().sum(), pz.colwise().sum().transpose()};
    AnchorCostResult r = wasserstein_anchor_cost(Px, Py, X, Y, Pz, 0.5, std::nullopt, SolverConfig{});
    CHECK(r.inner.plans.size() == 2);
    CHECK(r.inner.plans.count({0, 0}) == 1);
    CHECK(r.inner.plans.count({1, 1}) == 1);
    CHECK(std::isinf(r.cost.values(0, 1)));
    CHECK(std::isinf(r.cost.values(1, 0)));
    CHECK(std::isfinite(r.cost.values(0, 0)));
    CHECK_THROWS_AS(wasserstein_anchor_cost(Px, Py, X, Y, Pz, 1.5, std::nullopt, SolverConfig{}),
                    std::invalid_argument);
}

TEST_CASE("wasserstein anchor cost of identical conditionals is within entropic bias") {
    std::mt19937_64 rng(21);
    const int n = 8;
    Matrix pts = oracle::gaussian(2, n, rng);
    PointCloud X(pts), Y(pts);
    Matrix px = Matrix::Constant(n, 1, 1.0 / n), py = Matrix::Constant(1, n, 1.0 / n), pz = Matrix::Ones(1, 1);
    TransportPlan Px{px, px.rowwise().sum(), px.colwise().sum().transpose()};
    TransportPlan Py{py, py.rowwise().sum(), py.colwise().sum().transpose()};
    TransportPlan Pz{pz, Vector::Ones(1), Vector::Ones(1)};
    SolverConfig sc;
    sc.tol = 1e-10;
    const double eps_in = 0.01;
    AnchorCostResult r = wasserstein_anchor_cost(Px, Py, X, Y, Pz, 0.5, eps_in, sc);
    CHECK(r.cost.values(0, 0) >= 0.0);
    CHECK(r.cost.values(0, 0) <= 10.0 * eps_in * std::log(static_cast<double>(n)));
}
