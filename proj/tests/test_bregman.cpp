#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lot/bregman.hpp"
#include "lot/measures.hpp"
#include "lot/sinkhorn.hpp"
#include "oracles.hpp"

using namespace lot;

namespace {

DiscreteMeasure measure(const Vector& w) { return DiscreteMeasure{w, true}; }

struct Instance {
    GibbsKernel kx, kz, ky;
    Vector mu, nu;
};

Instance random_instance(int n, int kx, int ky, int m, double eps, std::mt19937_64& rng) {
    Instance s;
    s.kx = gibbs_kernel(CostMatrix{oracle::random_positive(n, kx, rng, 0.0, 2.0)}, eps);
    s.kz = gibbs_kernel(CostMatrix{oracle::random_positive(kx, ky, rng, 0.0, 2.0)}, eps);
    s.ky = gibbs_kernel(CostMatrix{oracle::random_positive(ky, m, rng, 0.0, 2.0)}, eps);
    s.mu = oracle::random_simplex(n, rng);
    s.nu = oracle::random_simplex(m, rng);
    return s;
}

SolverConfig tight() {
    SolverConfig c;
    c.tol = 1e-12;
    c.max_iter = 200000;
    return c;
}

}  // namespace

TEST_CASE("single anchors are forced by the constraints") {
    std::mt19937_64 rng(1);
    Instance s = random_instance(5, 1, 1, 4, 1.0, rng);
    PlanUpdateResult r = update_plan(s.kx, s.kz, s.ky, measure(s.mu), measure(s.nu), tight());
    REQUIRE(r.info.converged);
    CHECK((r.plans.px.values.col(0) - s.mu).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((r.plans.py.values.row(0).transpose() - s.nu).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(r.plans.pz.values(0, 0) == doctest::Approx(1.0));
    CHECK(r.plans.u_z(0) == doctest::Approx(1.0));
    CHECK(r.plans.v_z(0) == doctest::Approx(1.0));
}

TEST_CASE("2x2x2x2 instances match the KKT Newton oracle") {
    std::mt19937_64 rng(42);
    for (int t = 0; t < 25; ++t) {
        Instance s = random_instance(2, 2, 2, 2, 1.0, rng);
        PlanUpdateResult r = update_plan(s.kx, s.kz, s.ky, measure(s.mu), measure(s.nu), tight());
        REQUIRE(r.info.converged);
        oracle::TripleOracle o = oracle::bregman_kkt(s.kx.values, s.kz.values, s.ky.values, s.mu, s.nu);
        CHECK((r.plans.px.values - o.px).cwiseAbs().maxCoeff() < 1e-5);
        CHECK((r.plans.pz.values - o.pz).cwiseAbs().maxCoeff() < 1e-5);
        CHECK((r.plans.py.values - o.py).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("larger instances match the KKT Newton oracle") {
    std::mt19937_64 rng(43);
    for (int t = 0; t < 5; ++t) {
        Instance s = random_instance(5, 3, 2, 4, 0.7, rng);
        PlanUpdateResult r = update_plan(s.kx, s.kz, s.ky, measure(s.mu), measure(s.nu), tight());
        REQUIRE(r.info.converged);
        oracle::TripleOracle o = oracle::bregman_kkt(s.kx.values, s.kz.values, s.ky.values, s.mu, s.nu);
        CHECK((r.plans.px.values - o.px).cwiseAbs().maxCoeff() < 1e-5);
        CHECK((r.plans.pz.values - o.pz).cwiseAbs().maxCoeff() < 1e-5);
        CHECK((r.plans.py.values - o.py).cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("constant kernels give product plans") {
    GibbsKernel kx{Matrix::Ones(4, 2), 1.0, Matrix::Zero(4, 2)};
    GibbsKernel kz{Matrix::Ones(2, 3), 1.0, Matrix::Zero(2, 3)};
    GibbsKernel ky{Matrix::Ones(3, 5), 1.0, Matrix::Zero(3, 5)};
    PlanUpdateResult r = update_plan(kx, kz, ky, uniform_measure(4), uniform_measure(5), tight());
    CHECK((r.plans.px.values.array() - 1.0 / 8.0).abs().maxCoeff() < 1e-9);
    CHECK((r.plans.pz.values.array() - 1.0 / 6.0).abs().maxCoeff() < 1e-9);
    CHECK((r.plans.py.values.array() - 1.0 / 15.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("all six marginal constraints hold at convergence") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> N(2, 50), K(1, 8);
    for (int t = 0; t < 30; ++t) {
        Instance s = random_instance(N(rng), K(rng), K(rng), N(rng), 0.5, rng);
        SolverConfig c;
        PlanUpdateResult r = update_plan(s.kx, s.kz, s.ky, measure(s.mu), measure(s.nu), c);
        REQUIRE(r.info.converged);
        CHECK(max_marginal_violation(r.plans, s.mu, s.nu) < c.tol);
    }
}

TEST_CASE("dual trace over sweeps is non-decreasing and meets the primal value") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 10; ++t) {
        const double eps = 0.4;
        Instance s = random_instance(12, 3, 4, 10, eps, rng);
        SolverConfig c = tight();
        c.epsilon = eps;
        c.record_trace = true;
        PlanUpdateResult r = update_plan(s.kx, s.kz, s.ky, measure(s.mu), measure(s.nu), c);
        REQUIRE(r.info.converged);
        const auto& tr = r.info.dual_trace;
        REQUIRE(tr.size() >= 2);
        for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i] >= tr[i - 1] - 1e-12);
        const double primal = eps * (generalized_kl(r.plans.px.values, s.kx.values) +
                                     generalized_kl(r.plans.pz.values, s.kz.values) +
                                     generalized_kl(r.plans.py.values, s.ky.values));
        CHECK(tr.back() == doctest::Approx(primal).epsilon(1e-8));
    }
}

TEST_CASE("scaling costs and epsilon together leaves plans unchanged") {
    std::mt19937_64 rng(9);
    Matrix cx = oracle::random_positive(6, 2, rng, 0.0, 2.0), cz = oracle::random_positive(2, 3, rng, 0.0, 2.0),
           cy = oracle::random_positive(3, 5, rng, 0.0, 2.0);
    Vector mu = oracle::random_simplex(6, rng), nu = oracle::random_simplex(5, rng);
    const double eps = 0.5, c = 7.0;
    PlanUpdateResult a = update_plan(gibbs_kernel(CostMatrix{cx}, eps), gibbs_kernel(CostMatrix{cz}, eps),
                                     gibbs_kernel(CostMatrix{cy}, eps), measure(mu), measure(nu), tight());
    PlanUpdateResult b =
        update_plan(gibbs_kernel(CostMatrix{c * cx}, c * eps), gibbs_kernel(CostMatrix{c * cz}, c * eps),
                    gibbs_kernel(CostMatrix{c * cy}, c * eps), measure(mu), measure(nu), tight());
    CHECK((a.plans.px.values - b.plans.px.values).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((a.plans.pz.values - b.plans.pz.values).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((a.plans.py.values - b.plans.py.values).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("warm start reaches the same plans") {
    std::mt19937_64 rng(10);
    Instance s = random_instance(8, 3, 3, 7, 0.5, rng);
    PlanUpdateResult cold = update_plan(s.kx, s.kz, s.ky, measure(s.mu), measure(s.nu), tight());
    Instance s2 = s;
    s2.kz = gibbs_kernel(CostMatrix{oracle::random_positive(3, 3, rng, 0.0, 2.0)}, 0.5);
    PlanUpdateResult other = update_plan(s2.kx, s2.kz, s2.ky, measure(s.mu), measure(s.nu), tight());
    PlanUpdateResult warm = update_plan(s.kx, s.kz, s.ky, measure(s.mu), measure(s.nu), tight(), &other.state);
    CHECK((cold.plans.px.values - warm.plans.px.values).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((cold.plans.pz.values - warm.plans.pz.values).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((cold.plans.py.values - warm.plans.py.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("unreachable anchors and bad inputs are reported") {
    Matrix kxv = Matrix::Ones(3, 2);
    kxv.col(1).setZero();
    GibbsKernel kx{kxv, 1.0, Matrix::Zero(3, 2)};
    GibbsKernel kz{Matrix::Ones(2, 2), 1.0, Matrix::Zero(2, 2)};
    GibbsKernel ky{Matrix::Ones(2, 3), 1.0, Matrix::Zero(2, 3)};
    CHECK_THROWS_AS(update_plan(kx, kz, ky, uniform_measure(3), uniform_measure(3), SolverConfig{}), NumericalError);
    GibbsKernel bad_kz{Matrix::Ones(3, 2), 1.0, Matrix::Zero(3, 2)};
    GibbsKernel ok_kx{Matrix::Ones(3, 2), 1.0, Matrix::Zero(3, 2)};
    CHECK_THROWS_AS(update_plan(ok_kx, bad_kz, ky, uniform_measure(3), uniform_measure(3), SolverConfig{}),
                    std::invalid_argument);
}

TEST_CASE("unbalanced single point fixed point") {
    GibbsKernel one{Matrix::Ones(1, 1), 1.0, Matrix::Zero(1, 1)};
    UnbalancedResult r =
        update_plan_unbalanced(one, one, one, uniform_measure(1), uniform_measure(1), 1.0, 1.0, 1.0, SolverConfig{});
    CHECK(r.plans.px.values(0, 0) == doctest::Approx(1.0));
    CHECK(r.plans.pz.values(0, 0) == doctest::Approx(1.0));
    CHECK(r.plans.py.values(0, 0) == doctest::Approx(1.0));
    CHECK(r.z1(0) == doctest::Approx(1.0));
    CHECK(r.z2(0) == doctest::Approx(1.0));
}

TEST_CASE("unbalanced balanced limit and monotone relaxation") {
    std::mt19937_64 rng(12);
    const double eps = 0.5;
    for (int t = 0; t < 5; ++t) {
        Instance s = random_instance(4, 2, 2, 4, eps, rng);
        PlanUpdateResult bal = update_plan(s.kx, s.kz, s.ky, measure(s.mu), measure(s.nu), tight());
        double prev = 1e300;
        for (double f : {1.0, 10.0, 100.0, 1e4}) {
            SolverConfig c = tight();
            c.tol = 1e-10;
            UnbalancedResult u = update_plan_unbalanced(s.kx, s.kz, s.ky, measure(s.mu), measure(s.nu), f * eps,
                                                        f * eps, eps, c);
            INFO("tau factor " << f << " iterations " << u.info.iterations << " residual " << u.info.violation);
            REQUIRE(u.info.converged);
            const double d = (u.z1 - s.mu).lpNorm<1>();
            CHECK(d <= prev + 1e-12);
            prev = d;
            CHECK((u.z1 - u.plans.px.values.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-12);
            CHECK((u.z2 - u.plans.py.values.colwise().sum().transpose()).cwiseAbs().maxCoeff() < 1e-12);
            if (f == 1e4) {
                CHECK((u.z1 - s.mu).lpNorm<1>() < 1e-3);
                CHECK((u.z2 - s.nu).lpNorm<1>() < 1e-3);
                CHECK((u.plans.px.values - bal.plans.px.values).lpNorm<1>() < 1e-3);
            }
        }
    }
}

TEST_CASE("unbalanced with small tau follows the kernel mass") {
    std::mt19937_64 rng(13);
    Instance s = random_instance(2, 1, 1, 2, 1.0, rng);
    UnbalancedResult u =
        update_plan_unbalanced(s.kx, s.kz, s.ky, measure(s.mu), measure(s.nu), 1e-8, 1e-8, 1.0, tight());
    // With the marginal penalty vanishing, the outer scalings barely move from one,
    // so the relaxed marginal is the kernel mass itself.
    Vector kmass = s.kx.values * u.state.beta_x;
    CHECK((u.z1 - u.state.alpha_x.cwiseProduct(kmass)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((u.state.alpha_x.array() - 1.0).abs().maxCoeff() < 1e-6);
}
