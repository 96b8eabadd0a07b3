#include "lot/anchors.hpp"

#include "lot/measures.hpp"
#include "lot/sinkhorn.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace lot {

namespace {

struct Proportional {
    bool ok = false;
    Matrix base;  // d x d positive definite
    double sx = 0.0, sz = 0.0, sy = 0.0;
};

Proportional detect_proportional(const MetricSpec& mx, const MetricSpec& mz, const MetricSpec& my, Eigen::Index d) {
    Proportional p;
    if (mx.is_identity() && mz.is_identity() && my.is_identity()) {
        p.ok = true;
        p.base = Matrix::Identity(d, d);
        p.sx = mx.scale;
        p.sz = mz.scale;
        p.sy = my.scale;
        return p;
    }
    Matrix Ex = mx.effective(d), Ez = mz.effective(d), Ey = my.effective(d);
    const Matrix* ref = &Ex;
    if (Ex.norm() == 0.0) ref = Ey.norm() > 0.0 ? &Ey : &Ez;
    const double rn = ref->squaredNorm();
    if (rn == 0.0) return p;
    auto coef = [&](const Matrix& E, double& s) {
        s = (E.array() * ref->array()).sum() / rn;
        return (E - s * *ref).norm() <= 1e-12 * std::max(1.0, E.norm());
    };
    if (!coef(Ex, p.sx) || !coef(Ez, p.sz) || !coef(Ey, p.sy)) return p;
    Eigen::LLT<Matrix> llt(*ref);
    if (llt.info() != Eigen::Success) return p;
    p.ok = true;
    p.base = *ref;
    return p;
}

void check_plans(const Matrix& X, const Matrix& Y, const PlanTriple& plans, Eigen::Index kx) {
    if (plans.px.values.rows() != X.cols() || plans.px.values.cols() != kx) throw std::invalid_argument("Px shape mismatch");
    if (plans.pz.values.rows() != kx || plans.pz.values.cols() != plans.py.values.rows())
        throw std::invalid_argument("Pz shape mismatch");
    if (plans.py.values.cols() != Y.cols()) throw std::invalid_argument("Py shape mismatch");
    if (X.rows() != Y.rows()) throw std::invalid_argument("source and target dimensions differ");
}

}  // namespace

std::vector<int> nearest_centroid(const Matrix& points, const Matrix& centroids) {
    CostMatrix c = squared_euclidean_cost(points, centroids);
    std::vector<int> out(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index i = 0; i < points.cols(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index m = 1; m < centroids.cols(); ++m)
            if (c.values(i, m) < c.values(i, best)) best = m;
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

AnchorSet kmeans_init(const PointCloud& cloud, int k, std::uint64_t seed, const Vector* weights) {
    const Matrix& x = cloud.points;
    const Eigen::Index n = x.cols();
    if (k < 1) throw std::invalid_argument("k must be positive");
    if (k > n) throw std::invalid_argument("k exceeds the number of points");
    Vector w = weights ? *weights : Vector::Constant(n, 1.0 / static_cast<double>(n));
    if (w.size() != n) throw std::invalid_argument("weight length mismatch");

    std::mt19937_64 rng(seed);
    // k-means++ seeding on weighted squared distances.
    Matrix c(x.rows(), k);
    std::vector<double> mind(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<double> prob(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) prob[static_cast<std::size_t>(i)] = w(i);
    for (int m = 0; m < k; ++m) {
        std::discrete_distribution<Eigen::Index> pick(prob.begin(), prob.end());
        Eigen::Index idx = pick(rng);
        c.col(m) = x.col(idx);
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double dd = (x.col(i) - c.col(m)).squaredNorm();
            auto& md = mind[static_cast<std::size_t>(i)];
            if (dd < md) md = dd;
            prob[static_cast<std::size_t>(i)] = w(i) * md;
            total += prob[static_cast<std::size_t>(i)];
        }
        if (m + 1 < k && !(total > 0.0)) throw std::invalid_argument("fewer distinct points than k");
    }

    std::vector<int> assign = nearest_centroid(x, c);
    for (int iter = 0; iter < 100; ++iter) {
        Matrix sum = Matrix::Zero(x.rows(), k);
        Vector mass = Vector::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            int a = assign[static_cast<std::size_t>(i)];
            sum.col(a) += w(i) * x.col(i);
            mass(a) += w(i);
        }
        for (int m = 0; m < k; ++m)
            if (mass(m) > 0.0) c.col(m) = sum.col(m) / mass(m);
        std::vector<int> next = nearest_centroid(x, c);
        if (next == assign) break;
        assign = std::move(next);
    }

    AnchorSet out;
    out.locations = c;
    out.masses = Vector::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) out.masses(assign[static_cast<std::size_t>(i)]) += w(i);
    out.masses /= w.sum();
    return out;
}

double anchor_objective(const Matrix& X, const Matrix& Y, const Matrix& zx, const Matrix& zy, const PlanTriple& plans,
                        const MetricSpec& mx, const MetricSpec& mz, const MetricSpec& my) {
    return ot_cost(plans.px.values, mahalanobis_cost(X, zx, mx).values) +
           ot_cost(plans.pz.values, mahalanobis_cost(zx, zy, mz).values) +
           ot_cost(plans.py.values, mahalanobis_cost(zy, Y, my).values);
}

SharedAnchors update_shared_anchors(const Matrix& X, const std::vector<TargetBlock>& targets, const MetricSpec& mx,
                                    const MetricSpec& mz, const MetricSpec& my) {
    if (targets.empty()) throw std::invalid_argument("at least one target is required");
    const Eigen::Index d = X.rows();
    mx.validate(d);
    mz.validate(d);
    my.validate(d);
    const Eigen::Index kx = targets.front().plans->px.values.cols();
    std::vector<Eigen::Index> offset;
    Eigen::Index K = kx;
    for (const auto& t : targets) {
        check_plans(X, *t.Y, *t.plans, kx);
        offset.push_back(K);
        K += t.plans->py.values.rows();
    }

    // Three K x K couplings, one per metric: sum_b M_b Z G_b = R.
    Matrix Gx = Matrix::Zero(K, K), Gz = Matrix::Zero(K, K), Gy = Matrix::Zero(K, K);
    Matrix Rx = Matrix::Zero(d, K), Ry = Matrix::Zero(d, K);
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const PlanTriple& p = *targets[t].plans;
        const Matrix& Y = *targets[t].Y;
        const Eigen::Index o = offset[t], ky = p.py.values.rows();
        Gx.topLeftCorner(kx, kx).diagonal() += p.px.values.colwise().sum().transpose();
        Gz.topLeftCorner(kx, kx).diagonal() += p.pz.values.rowwise().sum();
        Gz.block(o, o, ky, ky).diagonal() += p.pz.values.colwise().sum().transpose();
        Gz.block(0, o, kx, ky) -= p.pz.values;
        Gz.block(o, 0, ky, kx) -= p.pz.values.transpose();
        Gy.block(o, o, ky, ky).diagonal() += p.py.values.rowwise().sum();
        Rx.leftCols(kx) += X * p.px.values;
        Ry.middleCols(o, ky) = Y * p.py.values.transpose();
    }

    Matrix Z(d, K);
    Proportional prop = detect_proportional(mx, mz, my, d);
    if (prop.ok) {
        Matrix G = prop.sx * Gx + prop.sz * Gz + prop.sy * Gy;
        Matrix R = prop.sx * Rx + prop.sy * Ry;
        Vector diag = G.diagonal();
        const double tr = diag.sum();
        for (Eigen::Index a = 0; a < K; ++a)
            if (!(diag(a) > 1e-14 * tr / static_cast<double>(K)))
                throw NumericalError("anchor " + std::to_string(a) + " has zero mass in the anchor system",
                                     static_cast<int>(a));
        G.diagonal().array() += 1e-10 * tr;
        Eigen::LDLT<Matrix> ldlt(G);
        if (ldlt.info() != Eigen::Success) throw NumericalError("anchor system factorization failed");
        // Z G = R  <=>  G Z^T = R^T (G symmetric).
        Z = ldlt.solve(R.transpose()).transpose();
    } else {
        const Matrix Ex = mx.effective(d), Ez = mz.effective(d), Ey = my.effective(d);
        const Eigen::Index N = d * K;
        Matrix A = Matrix::Zero(N, N);
        // vec(M Z G) = (G^T kron M) vec(Z), column-major vec.
        for (Eigen::Index b = 0; b < K; ++b)
            for (Eigen::Index a = 0; a < K; ++a) {
                const double gx = Gx(a, b), gz = Gz(a, b), gy = Gy(a, b);
                if (gx == 0.0 && gz == 0.0 && gy == 0.0) continue;
                A.block(b * d, a * d, d, d) = gx * Ex + gz * Ez + gy * Ey;
            }
        Matrix R = Ex * Rx + Ey * Ry;
        const double tr = A.trace();
        for (Eigen::Index a = 0; a < K; ++a)
            if (!(A.block(a * d, a * d, d, d).trace() > 1e-14 * tr / static_cast<double>(K)))
                throw NumericalError("anchor " + std::to_string(a) + " has zero mass in the anchor system",
                                     static_cast<int>(a));
        A.diagonal().array() += 1e-10 * tr / static_cast<double>(d);
        Eigen::LDLT<Matrix> ldlt(A);
        if (ldlt.info() != Eigen::Success) throw NumericalError("anchor system factorization failed");
        Vector z = ldlt.solve(Eigen::Map<const Vector>(R.data(), N));
        Z = Eigen::Map<const Matrix>(z.data(), d, K);
    }
    if (!Z.allFinite()) throw NumericalError("anchor update produced non-finite locations");

    SharedAnchors out;
    out.zx.locations = Z.leftCols(kx);
    out.zx.masses = Vector::Zero(kx);
    for (const auto& t : targets) out.zx.masses += t.plans->px.values.colwise().sum().transpose();
    out.zx.masses /= static_cast<double>(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
        const Eigen::Index ky = targets[t].plans->py.values.rows();
        out.zy.push_back(AnchorSet{Z.middleCols(offset[t], ky), targets[t].plans->py.values.rowwise().sum()});
    }
    return out;
}

AnchorPair update_anchors(const PointCloud& X, const PointCloud& Y, const PlanTriple& plans, const MetricSpec& mx,
                          const MetricSpec& mz, const MetricSpec& my) {
    std::vector<TargetBlock> t{TargetBlock{&Y.points, &plans}};
    SharedAnchors s = update_shared_anchors(X.points, t, mx, mz, my);
    return AnchorPair{std::move(s.zx), std::move(s.zy.front())};
}

StiefelTransform procrustes_update(const Matrix& zx, const Matrix& zy, const Matrix& pz) {
    if (zx.rows() != zy.rows() || pz.rows() != zx.cols() || pz.cols() != zy.cols())
        throw std::invalid_argument("Procrustes shape mismatch");
    Matrix A = zy * pz.transpose() * zx.transpose();
    Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return StiefelTransform{svd.matrixU() * svd.matrixV().transpose()};
}

StiefelTransform procrustes_update(const AnchorSet& zx, const AnchorSet& zy, const TransportPlan& pz) {
    return procrustes_update(zx.locations, zy.locations, pz.values);
}

}  // namespace lot
