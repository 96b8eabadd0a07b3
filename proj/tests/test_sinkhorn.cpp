#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lot/measures.hpp"
#include "lot/sinkhorn.hpp"
#include "oracles.hpp"

#include <limits>

using namespace lot;

namespace {

DiscreteMeasure measure(const Vector& w) { return DiscreteMeasure{w, true}; }

SolverConfig tight(double eps) {
    SolverConfig c;
    c.epsilon = eps;
    c.tol = 1e-12;
    c.max_iter = 100000;
    return c;
}

}  // namespace

TEST_CASE("single point plan") {
    GibbsKernel k{Matrix::Ones(1, 1), 1.0, Matrix::Zero(1, 1)};
    SinkhornResult r = sinkhorn(uniform_measure(1), uniform_measure(1), k, SolverConfig{});
    CHECK(r.info.converged);
    CHECK(r.plan.values(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("constant kernel gives the product plan") {
    GibbsKernel k = gibbs_kernel(CostMatrix{Matrix::Constant(2, 2, 3.0)}, 1.0);
    SinkhornResult r = sinkhorn(uniform_measure(2), uniform_measure(2), k, SolverConfig{});
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(r.plan.values(i, j) == doctest::Approx(0.25));
}

TEST_CASE("2x2 instance matches the golden-section oracle") {
    Vector mu(2), nu(2);
    mu << 0.7, 0.3;
    nu << 0.4, 0.6;
    Matrix K(2, 2);
    K << 1.0, 0.5, 0.5, 1.0;
    Matrix C = -K.array().log();
    GibbsKernel k = gibbs_kernel(CostMatrix{C}, 1.0);
    SinkhornResult r = sinkhorn(measure(mu), measure(nu), k, tight(1.0));
    Matrix ref = oracle::sinkhorn_2x2(mu, nu, K, 1.0);
    CHECK((r.plan.values - ref).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("100 random 2x2 instances match the golden-section oracle") {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> U(0.05, 3.0);
    for (int t = 0; t < 100; ++t) {
        Vector mu = oracle::random_simplex(2, rng, 0.05), nu = oracle::random_simplex(2, rng, 0.05);
        Matrix C = oracle::random_positive(2, 2, rng, 0.0, 2.0);
        const double eps = U(rng);
        GibbsKernel k = gibbs_kernel(CostMatrix{C}, eps);
        SinkhornResult r = sinkhorn(measure(mu), measure(nu), k, tight(eps));
        Matrix ref = oracle::sinkhorn_2x2(mu, nu, k.values, eps);
        CHECK((r.plan.values - ref).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("converged plans meet the marginal tolerance") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 20; ++t) {
        Vector mu = oracle::random_simplex(12, rng), nu = oracle::random_simplex(9, rng);
        GibbsKernel k = gibbs_kernel(CostMatrix{oracle::random_positive(12, 9, rng, 0.0, 4.0)}, 0.5);
        SolverConfig c;
        SinkhornResult r = sinkhorn(measure(mu), measure(nu), k, c);
        REQUIRE(r.info.converged);
        CHECK((r.plan.values.rowwise().sum() - mu).lpNorm<1>() < c.tol);
        CHECK((r.plan.values.colwise().sum().transpose() - nu).lpNorm<1>() < c.tol);
    }
}

TEST_CASE("dual trace is non-decreasing and meets the primal value") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 20; ++t) {
        Vector mu = oracle::random_simplex(10, rng), nu = oracle::random_simplex(8, rng);
        const double eps = 0.3;
        GibbsKernel k = gibbs_kernel(CostMatrix{oracle::random_positive(10, 8, rng, 0.0, 3.0)}, eps);
        SolverConfig c = tight(eps);
        c.record_trace = true;
        SinkhornResult r = sinkhorn(measure(mu), measure(nu), k, c);
        REQUIRE(r.info.converged);
        const auto& tr = r.info.dual_trace;
        REQUIRE(tr.size() >= 2);
        for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i] >= tr[i - 1] - 1e-12);
        CHECK(tr.back() == doctest::Approx(eps * generalized_kl(r.plan.values, k.values)).epsilon(1e-8));
    }
}

TEST_CASE("sinkhorn errors and non-convergence") {
    GibbsKernel zero_row{Matrix::Zero(2, 2), 1.0, Matrix::Zero(2, 2)};
    zero_row.values(1, 0) = zero_row.values(1, 1) = 1.0;
    try {
        sinkhorn(uniform_measure(2), uniform_measure(2), zero_row, SolverConfig{});
        FAIL("zero kernel row accepted");
    } catch (const NumericalError& e) {
        CHECK(e.index() == 0);
    }

    Vector heavy(2);
    heavy << 1.0, 1.0;
    GibbsKernel ones{Matrix::Ones(2, 2), 1.0, Matrix::Zero(2, 2)};
    CHECK_THROWS_AS(sinkhorn(DiscreteMeasure{heavy, false}, uniform_measure(2), ones, SolverConfig{}),
                    std::invalid_argument);

    std::mt19937_64 rng(2);
    Vector mu = oracle::random_simplex(20, rng), nu = oracle::random_simplex(20, rng);
    GibbsKernel k = gibbs_kernel(CostMatrix{oracle::random_positive(20, 20, rng, 0.0, 5.0)}, 0.05);
    SolverConfig c;
    c.max_iter = 1;
    c.tol = 1e-14;
    SinkhornResult r = sinkhorn(measure(mu), measure(nu), k, c);
    CHECK_FALSE(r.info.converged);
    CHECK(r.info.iterations == 1);
}

TEST_CASE("ot_cost examples") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(ot_cost(Matrix::Ones(1, 1), Matrix::Constant(1, 1, 3.0)) == 3.0);
    Matrix P(2, 2), C(2, 2);
    P << 0.5, 0.0, 0.0, 0.5;
    C << 1.0, inf, inf, 1.0;
    CHECK(ot_cost(P, C) == doctest::Approx(1.0));
    P << 0.25, 0.25, 0.25, 0.25;
    C << 0.0, 1.0, 1.0, 0.0;
    CHECK(ot_cost(P, C) == doctest::Approx(0.5));
    C << 0.0, inf, 1.0, 0.0;
    CHECK(std::isinf(ot_cost(P, C)));
    CHECK_THROWS_AS(ot_cost(Matrix::Ones(1, 2), Matrix::Ones(2, 1)), std::invalid_argument);
}

TEST_CASE("entropy and divergence conventions") {
    Vector v(3);
    v << 0.5, 0.5, 0.0;
    CHECK(entropy(v) == doctest::Approx(std::log(2.0)));
    Matrix p(1, 2), k(1, 2);
    p << 1.0, 0.0;
    k << 0.0, 1.0;
    CHECK(std::isinf(kl_divergence(p, k)));
    k << 1.0, 0.0;
    CHECK(kl_divergence(p, k) == doctest::Approx(0.0));
    CHECK(generalized_kl(p, k) == doctest::Approx(0.0));
}
