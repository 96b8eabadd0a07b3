#include "lot/measures.hpp"

#include "lot/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw std::invalid_argument(std::string(what) + " has non-finite entries");
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t h = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + h, v.end());
    double hi = v[h];
    if (v.size() % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), v.begin() + h);
    return 0.5 * (lo + hi);
}

}  // namespace

PointCloud::PointCloud(Matrix pts, std::optional<Labels> lab) : points(std::move(pts)), labels(std::move(lab)) {
    if (points.rows() < 1 || points.cols() < 1) throw std::invalid_argument("point cloud must have d >= 1 and n >= 1");
    require_finite(points, "point cloud");
    if (labels && static_cast<Eigen::Index>(labels->size()) != points.cols())
        throw std::invalid_argument("label count does not match point count");
}

Matrix MetricSpec::effective(Eigen::Index d) const {
    if (is_identity()) return scale * Matrix::Identity(d, d);
    return scale * matrix;
}

void MetricSpec::validate(Eigen::Index d) const {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("metric scale must be positive");
    if (is_identity()) return;
    if (matrix.rows() != d || matrix.cols() != d) throw std::invalid_argument("metric dimension mismatch");
    require_finite(matrix, "metric");
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw std::invalid_argument("metric not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(matrix, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12) throw std::invalid_argument("metric not positive semi-definite");
}

Matrix GibbsKernel::log_values() const {
    if (cost.size() == values.size() && cost.size() > 0) return -cost / epsilon;
    return values.array().log().matrix();
}

void SolverConfig::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (max_iter <= 0) throw std::invalid_argument("max_iter must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
}

DiscreteMeasure build_measure(const PointCloud& cloud, const std::optional<Vector>& weights) {
    const Eigen::Index n = cloud.size();
    if (n < 1) throw std::invalid_argument("empty point cloud");
    DiscreteMeasure m;
    if (!weights) {
        m.weights = Vector::Constant(n, 1.0 / static_cast<double>(n));
        m.normalized = true;
        return m;
    }
    if (weights->size() != n) throw std::invalid_argument("weight length does not match cloud size");
    if (!weights->allFinite() || (weights->array() < 0.0).any()) throw std::invalid_argument("negative weight");
    double s = weights->sum();
    if (!(s > 0.0)) throw std::invalid_argument("all-zero weights");
    m.weights = *weights;
    m.normalized = std::abs(s - 1.0) <= 1e-12;
    return m;
}

DiscreteMeasure uniform_measure(Eigen::Index n) {
    if (n < 1) throw std::invalid_argument("empty measure");
    return DiscreteMeasure{Vector::Constant(n, 1.0 / static_cast<double>(n)), true};
}

CostMatrix squared_euclidean_cost(const Matrix& A, const Matrix& B) {
    if (A.rows() != B.rows()) throw std::invalid_argument("dimension mismatch in cost");
    Vector an = A.colwise().squaredNorm().transpose();
    Vector bn = B.colwise().squaredNorm().transpose();
    Matrix c = -2.0 * (A.transpose() * B);
    c.colwise() += an;
    c.rowwise() += bn.transpose();
    return CostMatrix{c.cwiseMax(0.0)};
}

CostMatrix mahalanobis_cost(const Matrix& A, const Matrix& B, const MetricSpec& m) {
    if (A.rows() != B.rows()) throw std::invalid_argument("dimension mismatch in cost");
    const Eigen::Index d = A.rows();
    m.validate(d);
    if (m.is_identity()) {
        CostMatrix c = squared_euclidean_cost(A, B);
        c.values *= m.scale;
        return c;
    }
    Matrix M = m.effective(d);
    Matrix MA = M * A;
    Matrix MB = M * B;
    Vector an = (A.array() * MA.array()).colwise().sum().transpose();
    Vector bn = (B.array() * MB.array()).colwise().sum().transpose();
    Matrix c = -2.0 * (A.transpose() * MB);
    c.colwise() += an;
    c.rowwise() += bn.transpose();
    return CostMatrix{c.cwiseMax(0.0)};
}

CostMatrix mahalanobis_cost(const PointCloud& A, const PointCloud& B, const MetricSpec& m) {
    return mahalanobis_cost(A.points, B.points, m);
}

GibbsKernel gibbs_kernel(const CostMatrix& c, double epsilon) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be positive");
    if (c.values.hasNaN()) throw std::invalid_argument("cost has NaN entries");
    GibbsKernel k;
    k.epsilon = epsilon;
    k.cost = c.values;
    k.values = c.values.unaryExpr([epsilon](double v) { return v == kInf ? 0.0 : std::exp(-v / epsilon); });
    return k;
}

GibbsKernel shifted_gibbs_kernel(const CostMatrix& c, double epsilon, KernelShift shift) {
    CostMatrix s = c;
    Matrix& v = s.values;
    auto finite_min = [](const auto& vec) {
        double best = kInf;
        for (Eigen::Index i = 0; i < vec.size(); ++i)
            if (vec(i) < best) best = vec(i);
        return best == kInf ? 0.0 : best;
    };
    if (shift == KernelShift::Rows || shift == KernelShift::Both) {
        for (Eigen::Index i = 0; i < v.rows(); ++i) v.row(i).array() -= finite_min(v.row(i));
    }
    if (shift == KernelShift::Cols || shift == KernelShift::Both) {
        for (Eigen::Index j = 0; j < v.cols(); ++j) v.col(j).array() -= finite_min(v.col(j));
    }
    if (shift == KernelShift::Global) {
        double g = kInf;
        for (Eigen::Index j = 0; j < v.cols(); ++j) g = std::min(g, finite_min(v.col(j)));
        v.array() -= g;
    }
    return gibbs_kernel(s, epsilon);
}

AnchorCostResult wasserstein_anchor_cost(const TransportPlan& px, const TransportPlan& py, const PointCloud& X,
                                         const PointCloud& Y, const TransportPlan& pz_prev, double theta,
                                         std::optional<double> inner_epsilon, const SolverConfig& inner_cfg) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in [0, 1]");
    const Matrix& Px = px.values;
    const Matrix& Py = py.values;
    const Matrix& Pz = pz_prev.values;
    const Eigen::Index kx = Px.cols();
    const Eigen::Index ky = Py.rows();
    if (Px.rows() != X.size() || Py.cols() != Y.size()) throw std::invalid_argument("plan and cloud size mismatch");
    if (Pz.rows() != kx || Pz.cols() != ky) throw std::invalid_argument("anchor plan shape mismatch");

    // A pair is kept when it is dominant within its row or within its column,
    // so that no anchor is left without a finite cost.
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> sel(kx, ky);
    Vector rmax = Pz.rowwise().maxCoeff();
    Vector cmax = Pz.colwise().maxCoeff().transpose();
    for (Eigen::Index m = 0; m < kx; ++m)
        for (Eigen::Index n = 0; n < ky; ++n) {
            const double p = Pz(m, n);
            sel(m, n) = p > 0.0 && (p > theta * rmax(m) || p > theta * cmax(n));
        }
    for (Eigen::Index m = 0; m < kx; ++m)
        if (!sel.row(m).any()) throw NumericalError("source anchor " + std::to_string(m) + " has no admissible pair",
                                                   static_cast<int>(m));

    Vector colmass = Px.colwise().sum().transpose();
    Vector rowmass = Py.rowwise().sum();
    for (Eigen::Index m = 0; m < kx; ++m)
        if (sel.row(m).any() && !(colmass(m) > 0.0))
            throw NumericalError("source anchor " + std::to_string(m) + " has zero mass", static_cast<int>(m));
    for (Eigen::Index n = 0; n < ky; ++n)
        if (sel.col(n).any() && !(rowmass(n) > 0.0))
            throw NumericalError("target anchor " + std::to_string(n) + " has zero mass", static_cast<int>(n));

    CostMatrix ground = squared_euclidean_cost(X.points, Y.points);

    AnchorCostResult out;
    if (inner_epsilon) {
        if (!(*inner_epsilon > 0.0)) throw std::invalid_argument("inner epsilon must be positive");
        out.inner_epsilon = *inner_epsilon;
    } else {
        // 0.05 x median over selected pairs of the conditional-weighted mean squared distance.
        std::vector<double> pair_scale;
        for (Eigen::Index m = 0; m < kx; ++m)
            for (Eigen::Index n = 0; n < ky; ++n) {
                if (!sel(m, n)) continue;
                Vector a = Px.col(m) / colmass(m);
                Vector b = Py.row(n).transpose() / rowmass(n);
                pair_scale.push_back(a.dot(ground.values * b));
            }
        double med = median(pair_scale);
        if (!(med > 0.0)) med = 1.0;
        out.inner_epsilon = 0.05 * med;
    }

    out.cost.values = Matrix::Constant(kx, ky, kInf);
    SolverConfig cfg = inner_cfg;
    cfg.epsilon = out.inner_epsilon;
    GibbsKernel K = shifted_gibbs_kernel(ground, out.inner_epsilon, KernelShift::Both);
    for (Eigen::Index m = 0; m < kx; ++m)
        for (Eigen::Index n = 0; n < ky; ++n) {
            if (!sel(m, n)) continue;
            DiscreteMeasure a{Px.col(m) / colmass(m), true};
            DiscreteMeasure b{Py.row(n).transpose() / rowmass(n), true};
            SinkhornResult r = sinkhorn(a, b, K, cfg);
            if (!r.info.converged) ++out.failed_inner;
            out.cost.values(m, n) = ot_cost(r.plan.values, ground.values);
            out.inner.plans.emplace(std::make_pair(static_cast<int>(m), static_cast<int>(n)), std::move(r.plan));
        }
    return out;
}

}  // namespace lot
