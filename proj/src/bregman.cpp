#include "lot/bregman.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lot {

namespace {

constexpr double kFloor = 1e-300;

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

void check_kernel(const Matrix& K, const char* name, const Vector* row_w, const Vector* col_w) {
    Vector rs = K.rowwise().sum();
    Vector cs = K.colwise().sum().transpose();
    for (Eigen::Index i = 0; i < K.rows(); ++i)
        if ((!row_w || (*row_w)(i) > 0.0) && !(rs(i) > 0.0))
            throw NumericalError(std::string("kernel ") + name + " row " + std::to_string(i) + " is zero",
                                 static_cast<int>(i));
    for (Eigen::Index j = 0; j < K.cols(); ++j)
        if ((!col_w || (*col_w)(j) > 0.0) && !(cs(j) > 0.0))
            throw NumericalError(std::string("kernel ") + name + " column " + std::to_string(j) + " is zero",
                                 static_cast<int>(j));
}

struct Kernels {
    const Matrix& x;
    const Matrix& z;
    const Matrix& y;
};

void validate_shapes(const Kernels& K, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (K.x.rows() != mu.size() || K.y.cols() != nu.size()) throw std::invalid_argument("kernel and measure sizes differ");
    if (K.x.cols() != K.z.rows() || K.z.cols() != K.y.rows()) throw std::invalid_argument("kernel chain shapes differ");
    if (K.x.cols() < 1 || K.y.rows() < 1) throw std::invalid_argument("anchor count must be positive");
    check_kernel(K.x, "Kx", &mu.weights, nullptr);
    check_kernel(K.z, "Kz", nullptr, nullptr);
    check_kernel(K.y, "Ky", nullptr, &nu.weights);
}

ScalingState initial_state(const Kernels& K, const SolverConfig& cfg, const ScalingState* warm) {
    const Eigen::Index n = K.x.rows(), kx = K.x.cols(), ky = K.y.rows(), m = K.y.cols();
    if (warm && !cfg.cold_start && warm->matches(n, kx, ky, m)) return *warm;
    return ScalingState::ones(n, kx, ky, m);
}

PlanTriple build_plans(const Kernels& K, const ScalingState& s, const Vector& u, const Vector& v, const Vector& mu,
                       const Vector& nu, double tol) {
    PlanTriple p;
    p.px.values = s.alpha_x.asDiagonal() * K.x * s.beta_x.asDiagonal();
    p.pz.values = s.alpha_z.asDiagonal() * K.z * s.beta_z.asDiagonal();
    p.py.values = s.alpha_y.asDiagonal() * K.y * s.beta_y.asDiagonal();
    p.px.row_marginal = mu;
    p.px.col_marginal = u;
    p.pz.row_marginal = u;
    p.pz.col_marginal = v;
    p.py.row_marginal = v;
    p.py.col_marginal = nu;
    p.px.tol = p.pz.tol = p.py.tol = tol;
    p.u_z = u;
    p.v_z = v;
    return p;
}

// Inner projections shared by the balanced and unbalanced sweeps.
void inner_steps(const Kernels& K, ScalingState& s, Vector& u, Vector& v, double u_floor, double v_floor) {
    Vector kxa = K.x.transpose() * s.alpha_x;
    Vector kzb = K.z * s.beta_z;
    u = (s.alpha_z.cwiseProduct(kzb).cwiseProduct(s.beta_x.cwiseProduct(kxa))).cwiseSqrt().cwiseMax(u_floor);
    s.beta_x = safe_div(u, kxa);
    s.alpha_z = safe_div(u, kzb);

    Vector kza = K.z.transpose() * s.alpha_z;
    Vector kyb = K.y * s.beta_y;
    v = (s.alpha_y.cwiseProduct(kyb).cwiseProduct(s.beta_z.cwiseProduct(kza))).cwiseSqrt().cwiseMax(v_floor);
    s.beta_z = safe_div(v, kza);
    s.alpha_y = safe_div(v, kyb);
}

struct InnerViolation {
    double xu, zu, zv, yv;
};

InnerViolation inner_violation(const Kernels& K, const ScalingState& s, const Vector& u, const Vector& v) {
    InnerViolation r;
    r.xu = (s.beta_x.cwiseProduct(K.x.transpose() * s.alpha_x) - u).lpNorm<1>();
    r.zu = (s.alpha_z.cwiseProduct(K.z * s.beta_z) - u).lpNorm<1>();
    r.zv = (s.beta_z.cwiseProduct(K.z.transpose() * s.alpha_z) - v).lpNorm<1>();
    r.yv = (s.alpha_y.cwiseProduct(K.y * s.beta_y) - v).lpNorm<1>();
    return r;
}

double plan_mass(const Kernels& K, const ScalingState& s) {
    return s.alpha_x.dot(K.x * s.beta_x) + s.alpha_z.dot(K.z * s.beta_z) + s.alpha_y.dot(K.y * s.beta_y);
}

}  // namespace

bool ScalingState::matches(Eigen::Index n, Eigen::Index kx, Eigen::Index ky, Eigen::Index m) const {
    return alpha_x.size() == n && beta_x.size() == kx && alpha_z.size() == kx && beta_z.size() == ky &&
           alpha_y.size() == ky && beta_y.size() == m && alpha_x.allFinite() && beta_x.allFinite() &&
           alpha_z.allFinite() && beta_z.allFinite() && alpha_y.allFinite() && beta_y.allFinite();
}

ScalingState ScalingState::ones(Eigen::Index n, Eigen::Index kx, Eigen::Index ky, Eigen::Index m) {
    return ScalingState{Vector::Ones(n), Vector::Ones(kx), Vector::Ones(kx),
                        Vector::Ones(ky), Vector::Ones(ky), Vector::Ones(m)};
}

double max_marginal_violation(const PlanTriple& p, const Vector& mu, const Vector& nu) {
    double v = 0.0;
    v = std::max(v, (p.px.values.rowwise().sum() - mu).lpNorm<1>());
    v = std::max(v, (p.px.values.colwise().sum().transpose() - p.u_z).lpNorm<1>());
    v = std::max(v, (p.pz.values.rowwise().sum() - p.u_z).lpNorm<1>());
    v = std::max(v, (p.pz.values.colwise().sum().transpose() - p.v_z).lpNorm<1>());
    v = std::max(v, (p.py.values.rowwise().sum() - p.v_z).lpNorm<1>());
    v = std::max(v, (p.py.values.colwise().sum().transpose() - nu).lpNorm<1>());
    return v;
}

PlanUpdateResult update_plan(const GibbsKernel& kx, const GibbsKernel& kz, const GibbsKernel& ky,
                             const DiscreteMeasure& mu, const DiscreteMeasure& nu, const SolverConfig& cfg,
                             const ScalingState* warm) {
    cfg.validate();
    Kernels K{kx.values, kz.values, ky.values};
    validate_shapes(K, mu, nu);
    const double mass = mu.mass();
    if (std::abs(mass - nu.mass()) > 1e-9 * std::max(1.0, mass)) throw std::invalid_argument("source and target masses differ");
    const Eigen::Index nkx = K.x.cols(), nky = K.y.rows();
    const double u_floor = 1e-12 * mass / static_cast<double>(nkx);
    const double v_floor = 1e-12 * mass / static_cast<double>(nky);
    const double ksum = K.x.sum() + K.z.sum() + K.y.sum();
    const double scale = kx.epsilon;

    PlanUpdateResult res;
    ScalingState s = initial_state(K, cfg, warm);
    Vector u = s.beta_x.cwiseProduct(K.x.transpose() * s.alpha_x);
    Vector v = s.beta_z.cwiseProduct(K.z.transpose() * s.alpha_z);
    SolveInfo& info = res.info;
    info.violation = std::numeric_limits<double>::infinity();

    for (int it = 0; it < cfg.max_iter; ++it) {
        s.alpha_x = safe_div(mu.weights, K.x * s.beta_x);
        s.beta_y = safe_div(nu.weights, K.y.transpose() * s.alpha_y);
        inner_steps(K, s, u, v, u_floor, v_floor);
        info.iterations = it + 1;

        InnerViolation iv = inner_violation(K, s, u, v);
        double vx = (s.alpha_x.cwiseProduct(K.x * s.beta_x) - mu.weights).lpNorm<1>();
        double vy = (s.beta_y.cwiseProduct(K.y.transpose() * s.alpha_y) - nu.weights).lpNorm<1>();
        info.violation = std::max({vx, vy, iv.xu, iv.zu, iv.zv, iv.yv});
        if (cfg.record_trace) {
            double d = weighted_log(mu.weights, s.alpha_x) + weighted_log(nu.weights, s.beta_y) - plan_mass(K, s) + ksum;
            info.dual_trace.push_back(scale * d);
        }
        if (!std::isfinite(info.violation)) throw NumericalError("non-finite scaling in plan update");
        if (info.violation < cfg.tol) {
            info.converged = true;
            break;
        }
    }
    res.plans = build_plans(K, s, u, v, mu.weights, nu.weights, cfg.tol);
    res.state = std::move(s);
    return res;
}

UnbalancedResult update_plan_unbalanced(const GibbsKernel& kx, const GibbsKernel& kz, const GibbsKernel& ky,
                                        const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tau1,
                                        double tau2, double epsilon, const SolverConfig& cfg,
                                        const ScalingState* warm) {
    cfg.validate();
    if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw std::invalid_argument("tau must be positive");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    Kernels K{kx.values, kz.values, ky.values};
    validate_shapes(K, mu, nu);
    const Eigen::Index nkx = K.x.cols(), nky = K.y.rows();
    const double mass = 0.5 * (mu.mass() + nu.mass());
    const double u_floor = 1e-12 * mass / static_cast<double>(nkx);
    const double v_floor = 1e-12 * mass / static_cast<double>(nky);
    const double e1 = tau1 / (tau1 + epsilon);
    const double e2 = tau2 / (tau2 + epsilon);

    auto damped = [](const Vector& target, const Vector& den, double e) {
        Vector out(target.size());
        for (Eigen::Index i = 0; i < target.size(); ++i) {
            const double r = target(i) / std::max(den(i), kFloor);
            out(i) = r > 0.0 ? std::pow(r, e) : 0.0;
        }
        return out;
    };

    UnbalancedResult res;
    ScalingState s = initial_state(K, cfg, warm);
    Vector u = s.beta_x.cwiseProduct(K.x.transpose() * s.alpha_x);
    Vector v = s.beta_z.cwiseProduct(K.z.transpose() * s.alpha_z);
    SolveInfo& info = res.info;
    info.violation = std::numeric_limits<double>::infinity();

    for (int it = 0; it < cfg.max_iter; ++it) {
        s.alpha_x = damped(mu.weights, K.x * s.beta_x, e1);
        s.beta_y = damped(nu.weights, K.y.transpose() * s.alpha_y, e2);
        inner_steps(K, s, u, v, u_floor, v_floor);
        info.iterations = it + 1;

        // Fixed-point residuals of the outer scalings, in mass units.
        Vector kxb = K.x * s.beta_x;
        Vector kya = K.y.transpose() * s.alpha_y;
        double rx = ((damped(mu.weights, kxb, e1) - s.alpha_x).cwiseProduct(kxb)).lpNorm<1>();
        double ry = ((damped(nu.weights, kya, e2) - s.beta_y).cwiseProduct(kya)).lpNorm<1>();
        InnerViolation iv = inner_violation(K, s, u, v);
        info.violation = std::max({rx, ry, iv.xu, iv.zu, iv.zv, iv.yv});
        if (!std::isfinite(info.violation)) throw NumericalError("non-finite scaling in unbalanced plan update");
        if (info.violation < cfg.tol) {
            info.converged = true;
            break;
        }
    }
    res.z1 = s.alpha_x.cwiseProduct(K.x * s.beta_x);
    res.z2 = s.beta_y.cwiseProduct(K.y.transpose() * s.alpha_y);
    res.plans = build_plans(K, s, u, v, res.z1, res.z2, cfg.tol);
    res.state = std::move(s);
    return res;
}

}  // namespace lot
