#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lot/synth.hpp"

#include <cmath>
#include <set>

using namespace lot;

namespace {

std::set<int> label_set(const PointCloud& c) { return std::set<int>(c.labels->begin(), c.labels->end()); }

}  // namespace

TEST_CASE("default gmm sizes") {
    GmmSpec spec;
    CHECK(spec.signal_dim == 5);
    CHECK(spec.points_per_component == 100);
    spec.seed = 3;
    GmmSample s = gen_gmm(spec);
    CHECK(s.source.size() == 400);
    CHECK(s.target.size() == 400);
    CHECK(s.source.dim() == 30);
    CHECK(label_set(s.source) == std::set<int>{0, 1, 2, 3});
    CHECK(label_set(s.target) == std::set<int>{0, 1, 2, 3});
    CHECK(s.means.rows() == 30);
    CHECK(s.means.cols() == 4);
}

TEST_CASE("single component gives single-label clouds") {
    GmmSpec spec;
    spec.components = 1;
    GmmSample s = gen_gmm(spec);
    CHECK(label_set(s.source) == std::set<int>{0});
    CHECK(label_set(s.target) == std::set<int>{0});
}

TEST_CASE("gmm is deterministic and source differs from target") {
    GmmSpec spec;
    spec.seed = 42;
    GmmSample a = gen_gmm(spec), b = gen_gmm(spec);
    CHECK(a.source.points == b.source.points);
    CHECK(a.target.points == b.target.points);
    CHECK(*a.source.labels == *b.source.labels);
    CHECK(a.source.points != a.target.points);
    spec.seed = 43;
    CHECK(gen_gmm(spec).source.points != a.source.points);
}

TEST_CASE("gmm validates its parameters") {
    GmmSpec spec;
    spec.signal_dim = 31;
    CHECK_THROWS_AS(gen_gmm(spec), std::invalid_argument);
    spec = GmmSpec{};
    spec.components = 0;
    CHECK_THROWS_AS(gen_gmm(spec), std::invalid_argument);
    spec = GmmSpec{};
    spec.equal_spacing = true;
    spec.components = 6;
    CHECK_THROWS_AS(gen_gmm(spec), std::invalid_argument);
}

TEST_CASE("equal spacing puts the means at equal distances") {
    GmmSpec spec;
    spec.equal_spacing = true;
    spec.components = 5;
    GmmSample s = gen_gmm(spec);
    const double d01 = (s.means.col(0) - s.means.col(1)).norm();
    for (int a = 0; a < 5; ++a)
        for (int b = a + 1; b < 5; ++b) CHECK((s.means.col(a) - s.means.col(b)).norm() == doctest::Approx(d01));
}

TEST_CASE("zero rotation is the identity") {
    GmmSample s = gen_gmm(GmmSpec{});
    Perturbed p = perturb(s.source, PerturbationSpec::rotation(0.0), 5);
    CHECK((p.cloud.points - s.source.points).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rotation preserves norms and moves points") {
    GmmSample s = gen_gmm(GmmSpec{});
    Perturbed p = perturb(s.source, PerturbationSpec::rotation(60.0), 5);
    CHECK((p.cloud.points.colwise().norm() - s.source.points.colwise().norm()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((p.cloud.points - s.source.points).norm() > 1.0);
    CHECK(*p.cloud.labels == *s.source.labels);
    CHECK_THROWS_AS(perturb(s.source, PerturbationSpec::rotation(360.0), 5), std::invalid_argument);
}

TEST_CASE("zero outlier rate leaves the cloud unchanged") {
    GmmSample s = gen_gmm(GmmSpec{});
    Perturbed p = perturb(s.source, PerturbationSpec::outliers(0.0), 5);
    CHECK(p.cloud.points == s.source.points);
    CHECK(p.replaced.empty());
}

TEST_CASE("outliers leave the other points bit-identical") {
    GmmSample s = gen_gmm(GmmSpec{});
    const int n = static_cast<int>(s.source.size());
    for (double r : {0.1, 0.25, 0.333}) {
        Perturbed p = perturb(s.source, PerturbationSpec::outliers(r), 9);
        const int expected = static_cast<int>(std::ceil(r * n));
        CHECK(static_cast<int>(p.replaced.size()) == expected);
        int identical = 0;
        for (int i = 0; i < n; ++i) identical += p.cloud.points.col(i) == s.source.points.col(i);
        CHECK(identical == n - expected);
    }
    CHECK_THROWS_AS(perturb(s.source, PerturbationSpec::outliers(1.5), 5), std::invalid_argument);
}

TEST_CASE("dimension padding appends coordinates") {
    GmmSample s = gen_gmm(GmmSpec{});
    Perturbed p = perturb(s.source, PerturbationSpec::dim_pad(45), 2);
    CHECK(p.cloud.dim() == 45);
    CHECK(p.cloud.points.topRows(30) == s.source.points);
    CHECK_THROWS_AS(perturb(s.source, PerturbationSpec::dim_pad(20), 2), std::invalid_argument);
}

TEST_CASE("mismatch drops the listed labels") {
    GmmSpec spec;
    spec.components = 10;
    spec.points_per_component = 20;
    GmmSample s = gen_gmm(spec);
    Perturbed p = perturb(s.source, PerturbationSpec::mismatch({2, 4, 8}), 0);
    CHECK(label_set(p.cloud) == std::set<int>{0, 1, 3, 5, 6, 7, 9});
    CHECK(p.cloud.size() == 140);
    CHECK(p.kept.size() == 140);
    for (std::size_t a = 0; a < p.kept.size(); ++a)
        CHECK(p.cloud.points.col(static_cast<Eigen::Index>(a)) == s.source.points.col(p.kept[a]));
}

TEST_CASE("perturbations are deterministic") {
    GmmSample s = gen_gmm(GmmSpec{});
    CHECK(perturb(s.source, PerturbationSpec::outliers(0.2), 4).cloud.points ==
          perturb(s.source, PerturbationSpec::outliers(0.2), 4).cloud.points);
    CHECK(perturb(s.source, PerturbationSpec::rotation(30.0), 4).cloud.points ==
          perturb(s.source, PerturbationSpec::rotation(30.0), 4).cloud.points);
}

TEST_CASE("hypercube map follows the sign rule") {
    Vector x(4);
    x << 0.3, 0.5, -0.2, 0.9;
    Vector y = hypercube_map(x);
    Vector expect(4);
    expect << 2.3, 2.5, -0.2, 0.9;
    CHECK((y - expect).norm() < 1e-15);
    x << -0.3, 0.5, 0.1, 0.1;
    CHECK(hypercube_map(x)(0) == doctest::Approx(-2.3));
    CHECK(hypercube_map(x)(1) == doctest::Approx(2.5));
}

TEST_CASE("hypercube benchmark") {
    auto [src, tgt] = gen_benchmark(BenchmarkKind::Hypercube, 30, 250, 7);
    CHECK(src.size() == 250);
    CHECK(tgt.size() == 250);
    CHECK(src.dim() == 30);
    CHECK(src.points.cwiseAbs().maxCoeff() <= 1.0);
    for (int i = 0; i < 250; ++i) {
        CHECK((*src.labels)[i] == hypercube_quadrant(src.points.col(i)));
        const double a = tgt.points(0, i), b = tgt.points(1, i);
        CHECK(std::abs(a) >= 2.0);
        CHECK(std::abs(a) <= 3.0);
        CHECK(std::abs(b) >= 2.0);
        CHECK((*tgt.labels)[i] == hypercube_quadrant(tgt.points.col(i)));
    }
    CHECK_THROWS_AS(gen_benchmark(BenchmarkKind::Hypercube, 1, 10, 0), std::invalid_argument);
}

TEST_CASE("annulus benchmark radii") {
    auto [src, tgt] = gen_benchmark(BenchmarkKind::Annulus, 30, 250, 11);
    for (int i = 0; i < 250; ++i) {
        const double rs = src.points.col(i).head(2).norm(), rt = tgt.points.col(i).head(2).norm();
        CHECK(rs <= 1.0);
        CHECK(rt >= 2.0);
        CHECK(rt <= 3.0);
        for (int k = 2; k < 30; ++k) {
            CHECK((src.points(k, i) == 0.0 || src.points(k, i) == 1.0));
            CHECK((tgt.points(k, i) == 0.0 || tgt.points(k, i) == 1.0));
        }
    }
    auto again = gen_benchmark(BenchmarkKind::Annulus, 30, 250, 11);
    CHECK(again.first.points == src.points);
}
