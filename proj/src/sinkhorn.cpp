#include "lot/sinkhorn.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lot {

namespace {

constexpr double kFloor = 1e-300;
constexpr double kInf = std::numeric_limits<double>::infinity();

Vector safe_div(const Vector& num, const Vector& den) {
    Vector out(num.size());
    for (Eigen::Index i = 0; i < num.size(); ++i) out(i) = num(i) / std::max(den(i), kFloor);
    return out;
}

double weighted_log(const Vector& w, const Vector& s) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w(i) > 0.0) acc += w(i) * std::log(std::max(s(i), kFloor));
    return acc;
}

}  // namespace

SinkhornResult sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const GibbsKernel& k,
                        const SolverConfig& cfg) {
    cfg.validate();
    const Matrix& K = k.values;
    const Eigen::Index n = K.rows(), m = K.cols();
    if (mu.size() != n || nu.size() != m) throw std::invalid_argument("kernel shape does not match measures");
    const double ma = mu.mass(), mb = nu.mass();
    if (std::abs(ma - mb) > 1e-9 * std::max(1.0, std::max(ma, mb)))
        throw std::invalid_argument("source and target masses differ");
    Vector rs = K.rowwise().sum();
    Vector cs = K.colwise().sum().transpose();
    for (Eigen::Index i = 0; i < n; ++i)
        if (mu.weights(i) > 0.0 && !(rs(i) > 0.0))
            throw NumericalError("kernel row " + std::to_string(i) + " is zero", static_cast<int>(i));
    for (Eigen::Index j = 0; j < m; ++j)
        if (nu.weights(j) > 0.0 && !(cs(j) > 0.0))
            throw NumericalError("kernel column " + std::to_string(j) + " is zero", static_cast<int>(j));

    const double ksum = K.sum();
    SinkhornResult res;
    Vector alpha = Vector::Ones(n);
    Vector beta = Vector::Ones(m);
    SolveInfo& info = res.info;
    info.violation = kInf;
    for (int it = 0; it < cfg.max_iter; ++it) {
        Vector Kb = K * beta;
        if (it > 0) {
            info.violation = (alpha.cwiseProduct(Kb) - mu.weights).lpNorm<1>();
            if (info.violation < cfg.tol) {
                info.converged = true;
                break;
            }
        }
        alpha = safe_div(mu.weights, Kb);
        Vector Ka = K.transpose() * alpha;
        beta = safe_div(nu.weights, Ka);
        info.iterations = it + 1;
        if (cfg.record_trace) {
            const double total = alpha.dot(K * beta);
            info.dual_trace.push_back(k.epsilon *
                                      (weighted_log(mu.weights, alpha) + weighted_log(nu.weights, beta) - total + ksum));
        }
    }
    if (!info.converged) {
        Vector Kb = K * beta;
        info.violation = (alpha.cwiseProduct(Kb) - mu.weights).lpNorm<1>();
        info.converged = info.violation < cfg.tol;
    }
    res.plan.values = alpha.asDiagonal() * K * beta.asDiagonal();
    res.plan.row_marginal = mu.weights;
    res.plan.col_marginal = nu.weights;
    res.plan.tol = cfg.tol;
    res.alpha = std::move(alpha);
    res.beta = std::move(beta);
    return res;
}

double ot_cost(const Matrix& p, const Matrix& c) {
    if (p.rows() != c.rows() || p.cols() != c.cols()) throw std::invalid_argument("plan and cost shapes differ");
    double acc = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j)
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            const double w = p(i, j);
            if (w == 0.0) continue;
            acc += w * c(i, j);
        }
    return acc;
}

double ot_cost(const TransportPlan& p, const CostMatrix& c) { return ot_cost(p.values, c.values); }

double entropy(const Matrix& p) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j)
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            const double v = p(i, j);
            if (v > 0.0) acc -= v * std::log(v);
        }
    return acc;
}

double entropy(const Vector& p) { return entropy(Matrix(p)); }

double kl_divergence(const Matrix& p, const Matrix& k) {
    if (p.rows() != k.rows() || p.cols() != k.cols()) throw std::invalid_argument("shape mismatch in KL");
    double acc = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j)
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            const double v = p(i, j);
            if (v <= 0.0) continue;
            if (!(k(i, j) > 0.0)) return kInf;
            acc += v * std::log(v / k(i, j));
        }
    return acc;
}

double generalized_kl(const Matrix& p, const Matrix& k) {
    double kl = kl_divergence(p, k);
    return kl - p.sum() + k.sum();
}

}  // namespace lot
