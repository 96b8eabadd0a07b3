#include "lot/analysis.hpp"

#include "lot/measures.hpp"
#include "lot/sinkhorn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::atomic<long> g_rank_checks{0};
std::atomic<long> g_rank_violations{0};

void require_positive(const Vector& v, const char* what) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!(v(i) > 0.0)) throw NumericalError(std::string(what) + " " + std::to_string(i) + " has zero mass",
                                                static_cast<int>(i));
}

double kl_log(const Matrix& p, const Matrix& logk) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j)
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            const double v = p(i, j);
            if (v <= 0.0) continue;
            if (logk(i, j) == -kInf) return kInf;
            acc += v * (std::log(v) - logk(i, j));
        }
    return acc;
}

// out(i, j) = log sum_m exp(a(i, m) + b(m, j)).
Matrix log_matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (Eigen::Index j = 0; j < b.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            double mx = -kInf;
            for (Eigen::Index m = 0; m < a.cols(); ++m) mx = std::max(mx, a(i, m) + b(m, j));
            if (mx == -kInf) {
                out(i, j) = -kInf;
                continue;
            }
            double s = 0.0;
            for (Eigen::Index m = 0; m < a.cols(); ++m) s += std::exp(a(i, m) + b(m, j) - mx);
            out(i, j) = mx + std::log(s);
        }
    return out;
}

Matrix pnorm_cost(const Matrix& A, const Matrix& B, double p, double factor) {
    if (p == 2.0) return factor * squared_euclidean_cost(A, B).values;
    Matrix c(A.cols(), B.cols());
    for (Eigen::Index j = 0; j < B.cols(); ++j)
        for (Eigen::Index i = 0; i < A.cols(); ++i)
            c(i, j) = factor * (A.col(i) - B.col(j)).array().abs().pow(p).sum();
    return c;
}

}  // namespace

TransportPlan compose_plan(const PlanTriple& plans) {
    require_positive(plans.u_z, "source anchor");
    require_positive(plans.v_z, "target anchor");
    TransportPlan out;
    Matrix left = plans.px.values * plans.u_z.cwiseInverse().asDiagonal();
    Matrix mid = plans.pz.values * plans.v_z.cwiseInverse().asDiagonal();
    out.values = left * (mid * plans.py.values);
    out.row_marginal = out.values.rowwise().sum();
    out.col_marginal = out.values.colwise().sum().transpose();
    out.tol = 10.0 * std::max({plans.px.tol, plans.pz.tol, plans.py.tol});
    return out;
}

TransportPlan compose_plan(const LotSolution& sol) {
    TransportPlan p = compose_plan(sol.plans);
    p.row_marginal = sol.mu;
    p.col_marginal = sol.nu;
    return p;
}

int factored_rank(const PlanTriple& plans, double rel_tol) {
    require_positive(plans.u_z, "source anchor");
    require_positive(plans.v_z, "target anchor");
    Matrix A = plans.px.values * plans.u_z.cwiseInverse().asDiagonal();
    Matrix Ct = plans.py.values.transpose() * plans.v_z.cwiseInverse().asDiagonal();
    Eigen::HouseholderQR<Matrix> qa(A), qc(Ct);
    const Eigen::Index ra = std::min(A.rows(), A.cols()), rc = std::min(Ct.rows(), Ct.cols());
    Matrix Ra = qa.matrixQR().topRows(ra).triangularView<Eigen::Upper>();
    Matrix Rc = qc.matrixQR().topRows(rc).triangularView<Eigen::Upper>();
    Matrix core = Ra * plans.pz.values * Rc.transpose();
    return transport_rank(core, rel_tol);
}

RankAudit rank_audit() { return RankAudit{g_rank_checks.load(), g_rank_violations.load()}; }

void reset_rank_audit() {
    g_rank_checks = 0;
    g_rank_violations = 0;
}

bool audit_rank(const PlanTriple& plans) {
    const int bound = static_cast<int>(std::min(plans.px.values.cols(), plans.py.values.rows()));
    bool ok = false;
    try {
        ok = factored_rank(plans) <= bound;
    } catch (const NumericalError&) {
        // A zero-mass anchor drops out of the product, which can only lower the rank.
        ok = true;
    }
    ++g_rank_checks;
    if (!ok) ++g_rank_violations;
    return ok;
}

TransportMode parse_transport_mode(const std::string& s) {
    if (s == "displacement" || s == "lot_displacement") return TransportMode::LotDisplacement;
    if (s == "fc_displacement") return TransportMode::FcDisplacement;
    if (s == "barycentric" || s == "ot_barycentric") return TransportMode::OtBarycentric;
    throw std::invalid_argument("unknown transport mode: " + s);
}

PointCloud barycentric_projection(const Matrix& p, const PointCloud& X, const PointCloud& Y) {
    if (p.rows() != X.size() || p.cols() != Y.size()) throw std::invalid_argument("plan and cloud sizes differ");
    Vector rs = p.rowwise().sum();
    require_positive(rs, "source point");
    Matrix out = Y.points * p.transpose() * rs.cwiseInverse().asDiagonal();
    return PointCloud(out, X.labels);
}

PointCloud estimate_transport(const LotSolution& sol, const PointCloud& X, const PointCloud& Y, TransportMode mode) {
    const PlanTriple& pl = sol.plans;
    if (pl.px.values.rows() != X.size() || pl.py.values.cols() != Y.size())
        throw std::invalid_argument("solution and cloud sizes differ");
    if (mode == TransportMode::OtBarycentric) return barycentric_projection(compose_plan(sol).values, X, Y);

    require_positive(pl.u_z, "source anchor");
    require_positive(pl.v_z, "target anchor");
    Vector mu = pl.px.values.rowwise().sum();
    require_positive(mu, "source point");
    Matrix Qx = X.points * pl.px.values * pl.u_z.cwiseInverse().asDiagonal();
    Matrix Qy = Y.points * pl.py.values.transpose() * pl.v_z.cwiseInverse().asDiagonal();
    Matrix shift;
    if (mode == TransportMode::FcDisplacement) {
        if (Qx.cols() != Qy.cols()) throw std::invalid_argument("fc displacement requires kx = ky");
        shift = Qy - Qx;
    } else {
        shift = Qy * pl.pz.values.transpose() * pl.u_z.cwiseInverse().asDiagonal() - Qx;
    }
    Matrix out = X.points + shift * pl.px.values.transpose() * mu.cwiseInverse().asDiagonal();
    return PointCloud(out, X.labels);
}

WaEstimate estimate_transport_wa(const LotSolution& sol, const PointCloud& X, const PointCloud& Y) {
    if (!sol.inner_plans) throw std::invalid_argument("solution carries no inner plans");
    const Matrix& Px = sol.plans.px.values;
    const Matrix& Pz = sol.plans.pz.values;
    WaEstimate out;
    Matrix fallback;
    Matrix res(X.dim(), X.size());
    for (Eigen::Index i = 0; i < X.size(); ++i) {
        Eigen::Index m = 0, n = 0;
        for (Eigen::Index a = 1; a < Px.cols(); ++a)
            if (Px(i, a) > Px(i, m)) m = a;
        for (Eigen::Index b = 1; b < Pz.cols(); ++b)
            if (Pz(m, b) > Pz(m, n)) n = b;
        auto it = sol.inner_plans->plans.find({static_cast<int>(m), static_cast<int>(n)});
        double rs = it == sol.inner_plans->plans.end() ? 0.0 : it->second.values.row(i).sum();
        if (rs > 0.0) {
            res.col(i) = Y.points * it->second.values.row(i).transpose() / rs;
        } else {
            if (fallback.size() == 0) fallback = estimate_transport(sol, X, Y, TransportMode::LotDisplacement).points;
            res.col(i) = fallback.col(i);
            ++out.fallbacks;
        }
    }
    out.points = PointCloud(res, X.labels);
    return out;
}

double latent_discrepancy(const LotSolution& sol, const LotCosts& costs, double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("p must be at least 1");
    for (const Matrix* c : {&costs.cx.values, &costs.cz.values, &costs.cy.values})
        if ((c->array() < 0.0).any()) throw std::invalid_argument("negative cost entry");
    const double t = transport_objective(sol.plans, costs);
    return std::pow(std::max(t, 0.0), 1.0 / p);
}

TheoryCheckReport check_relaxation(const PlanTriple& plans, const RelaxationKernels& k, const GibbsKernel& full,
                                   double epsilon) {
    TheoryCheckReport r;
    Matrix lx = k.kx.log_values(), lz = k.kz.log_values(), ly = k.ky.log_values(), lk = full.log_values();
    Matrix chain = log_matmul(lx, log_matmul(lz, ly));
    if (chain.rows() != lk.rows() || chain.cols() != lk.cols()) throw std::invalid_argument("kernel shapes differ");
    double margin = -kInf;
    for (Eigen::Index j = 0; j < lk.cols(); ++j)
        for (Eigen::Index i = 0; i < lk.rows(); ++i) {
            if (chain(i, j) == -kInf) continue;
            margin = std::max(margin, lk(i, j) == -kInf ? kInf : chain(i, j) - lk(i, j));
        }
    r.premise_margin = margin;
    r.premise_satisfied = margin <= 1e-12;

    TransportPlan P = compose_plan(plans);
    r.kl_x = kl_log(plans.px.values, lx);
    r.kl_z = kl_log(plans.pz.values, lz);
    r.kl_y = kl_log(plans.py.values, ly);
    r.entropy_u = entropy(plans.u_z);
    r.entropy_v = entropy(plans.v_z);
    r.lhs = epsilon * kl_log(P.values, lk);
    const double rhs = epsilon * (r.kl_x + r.kl_z + r.kl_y + r.entropy_u + r.entropy_v);
    r.slack = r.lhs == kInf ? kInf : rhs - r.lhs;
    if (rhs == kInf) r.slack = kInf;
    return r;
}

TheoryCheckReport check_relaxation(const LotSolution& sol, const RelaxationKernels& k, const GibbsKernel& full,
                                   double epsilon) {
    return check_relaxation(sol.plans, k, full, epsilon);
}

Cor1Setup cor1_setup(const PointCloud& X, const PointCloud& Y, const Matrix& zx, const Matrix& zy, double epsilon,
                     double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("p must be at least 1");
    const double f = std::pow(3.0, p - 1.0);
    Cor1Setup s;
    s.latent.kx = gibbs_kernel(CostMatrix{pnorm_cost(X.points, zx, p, f)}, epsilon);
    s.latent.kz = gibbs_kernel(CostMatrix{pnorm_cost(zx, zy, p, f)}, epsilon);
    s.latent.ky = gibbs_kernel(CostMatrix{pnorm_cost(zy, Y.points, p, f)}, epsilon);
    s.full = gibbs_kernel(CostMatrix{pnorm_cost(X.points, Y.points, p, 1.0)}, epsilon);
    s.config.mx = s.config.mz = s.config.my = MetricSpec::identity(f);
    s.config.set_epsilon(epsilon);
    return s;
}

double latent_wasserstein(const PointCloud& a, const PointCloud& b, const LotConfig& cfg, double p) {
    LotSolution s = lot_solve(a, b, cfg);
    return latent_discrepancy(s, s.costs, p);
}

double quasi_triangle_constant(double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("p must be at least 1");
    return std::pow(4.0, 1.0 - 1.0 / p);
}

double quasi_triangle_slack(const PointCloud& mu, const PointCloud& nu, const PointCloud& zeta, const LotConfig& cfg,
                            double p) {
    if (cfg.kx != cfg.ky) throw std::invalid_argument("quasi-triangle check requires kx = ky");
    const double kappa = quasi_triangle_constant(p);
    const double w_mz = latent_wasserstein(mu, zeta, cfg, p);
    const double w_zn = latent_wasserstein(zeta, nu, cfg, p);
    const double w_mn = latent_wasserstein(mu, nu, cfg, p);
    return kappa * std::max(w_mz, w_zn) - w_mn;
}

double plan_deviation(const Matrix& p, const Matrix& p0) {
    if (p.rows() != p0.rows() || p.cols() != p0.cols()) throw std::invalid_argument("plan shapes differ");
    const double ref = p0.norm();
    if (!(ref > 0.0)) throw std::invalid_argument("zero reference plan");
    return (p - p0).norm() / ref;
}

double plan_deviation(const TransportPlan& p, const TransportPlan& p0) { return plan_deviation(p.values, p0.values); }

int transport_rank(const Matrix& p, double rel_tol) {
    if (p.size() == 0) return 0;
    Eigen::BDCSVD<Matrix> svd(p);
    const Vector& s = svd.singularValues();
    if (s.size() == 0 || !(s(0) > 0.0)) return 0;
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) >= rel_tol * s(0)) ++r;
    return r;
}

int transport_rank(const TransportPlan& p, double rel_tol) { return transport_rank(p.values, rel_tol); }

double knn_accuracy(const PointCloud& x_hat, const PointCloud& Y) {
    if (!x_hat.labels || !Y.labels) throw std::invalid_argument("knn accuracy requires labels on both clouds");
    if (x_hat.dim() != Y.dim()) throw std::invalid_argument("dimension mismatch");
    CostMatrix c = squared_euclidean_cost(x_hat.points, Y.points);
    long hits = 0;
    for (Eigen::Index i = 0; i < x_hat.size(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < Y.size(); ++j)
            if (c.values(i, j) < c.values(i, best)) best = j;
        if ((*x_hat.labels)[static_cast<std::size_t>(i)] == (*Y.labels)[static_cast<std::size_t>(best)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(x_hat.size());
}

}  // namespace lot
