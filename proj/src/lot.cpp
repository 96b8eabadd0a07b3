#include "lot/lot.hpp"

#include "lot/analysis.hpp"
#include "lot/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lot {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::L2: return "l2";
        case Variant::WA: return "wa";
        case Variant::Unbalanced: return "unbalanced";
        case Variant::Transform: return "transform";
        case Variant::FcLimit: return "fc";
    }
    return "l2";
}

Variant parse_variant(const std::string& s) {
    if (s == "l2") return Variant::L2;
    if (s == "wa") return Variant::WA;
    if (s == "unbalanced") return Variant::Unbalanced;
    if (s == "transform") return Variant::Transform;
    if (s == "fc") return Variant::FcLimit;
    throw std::invalid_argument("unknown variant: " + s);
}

void LotConfig::validate() const {
    if (kx < 1 || ky < 1) throw std::invalid_argument("anchor counts must be positive");
    if (!(eps_x > 0.0) || !(eps_z > 0.0) || !(eps_y > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (outer_max_iter < 1) throw std::invalid_argument("outer_max_iter must be positive");
    if (!(outer_tol > 0.0)) throw std::invalid_argument("outer_tol must be positive");
    if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in [0, 1]");
    if (variant == Variant::Unbalanced && (!(tau1 > 0.0) || !(tau2 > 0.0)))
        throw std::invalid_argument("tau must be positive");
    if (variant == Variant::FcLimit && kx != ky) throw std::invalid_argument("FC limit requires kx = ky");
    if (variant == Variant::FcLimit && !(fc_lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    solver.validate();
}

double transport_objective(const PlanTriple& p, const LotCosts& c) {
    return ot_cost(p.px.values, c.cx.values) + ot_cost(p.pz.values, c.cz.values) + ot_cost(p.py.values, c.cy.values);
}

double entropic_objective(const PlanTriple& p, const LotCosts& c, double ex, double ez, double ey) {
    double f = ot_cost(p.px.values, c.cx.values) / ex - entropy(p.px.values) +
               ot_cost(p.pz.values, c.cz.values) / ez - entropy(p.pz.values) +
               ot_cost(p.py.values, c.cy.values) / ey - entropy(p.py.values);
    return ex * f;
}

namespace {

constexpr double kReseedFraction = 1e-10;

MetricSpec scaled(const MetricSpec& m, double factor) {
    MetricSpec out = m;
    out.scale *= factor;
    return out;
}

bool relative_change_below(double prev, double cur, double tol) {
    const double denom = std::max(std::abs(prev), 1e-300);
    return std::abs(prev - cur) <= tol * denom;
}

DiscreteMeasure measure_for(const PointCloud& c, const std::optional<Vector>& w) { return build_measure(c, w); }

// Location of the point carrying the largest transport cost per unit mass.
Eigen::Index worst_point(const Matrix& plan, const Matrix& cost, bool points_are_rows) {
    Vector per;
    if (points_are_rows) {
        Vector mass = plan.rowwise().sum();
        per = plan.cwiseProduct(cost).rowwise().sum().cwiseQuotient(mass.cwiseMax(1e-300));
    } else {
        Vector mass = plan.colwise().sum().transpose();
        per = plan.cwiseProduct(cost).colwise().sum().transpose().cwiseQuotient(mass.cwiseMax(1e-300));
    }
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < per.size(); ++i)
        if (per(i) > per(best)) best = i;
    return best;
}

AnchorSet init_anchors(const PointCloud& c, int k, const LotConfig& cfg, const DiscreteMeasure& m) {
    return kmeans_init(c, k, cfg.solver.seed, &m.weights);
}

AnchorSet shared_init(const PointCloud& X, const PointCloud& Y, int k, const LotConfig& cfg,
                      const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    Matrix all(X.dim(), X.size() + Y.size());
    all << X.points, Y.points;
    Vector w(all.cols());
    w << mu.weights / mu.mass(), nu.weights / nu.mass();
    w *= 0.5;
    return kmeans_init(PointCloud(all), k, cfg.solver.seed, &w);
}

// Balanced alternating solver over one or more targets sharing source anchors.
class Engine {
public:
    Engine(const PointCloud& X, std::vector<const PointCloud*> Ys, LotConfig cfg)
        : X_(X), Ys_(std::move(Ys)), cfg_(std::move(cfg)) {
        mu_ = measure_for(X_, cfg_.source_weights);
        for (const PointCloud* Y : Ys_) {
            if (Y->dim() != X_.dim()) throw std::invalid_argument("source and target dimensions differ");
            nus_.push_back(measure_for(*Y, Ys_.size() == 1 ? cfg_.target_weights : std::nullopt));
        }
        if (cfg_.kx > X_.size()) throw std::invalid_argument("kx exceeds the number of source points");
        for (const PointCloud* Y : Ys_)
            if (cfg_.ky > Y->size()) throw std::invalid_argument("ky exceeds the number of target points");
        const std::size_t T = Ys_.size();
        zy_.resize(T);
        plans_.resize(T);
        states_.resize(T);
        costs_.resize(T);
        infos_.resize(T);
        transform_ = cfg_.variant == Variant::Transform;
        if (transform_) {
            if (!cfg_.mz.is_identity()) throw std::invalid_argument("transform variant requires an isotropic Mz");
            M_ = Matrix::Identity(X_.dim(), X_.dim());
        }
    }

    void initialize() {
        if (cfg_.shared_init) {
            zx_ = shared_init(X_, *Ys_.front(), cfg_.kx, cfg_, mu_, nus_.front());
            for (std::size_t t = 0; t < Ys_.size(); ++t) {
                zy_[t] = zx_;
                zy_[t].locations = zx_.locations.leftCols(cfg_.ky);
            }
        } else {
            zx_ = init_anchors(X_, cfg_.kx, cfg_, mu_);
            for (std::size_t t = 0; t < Ys_.size(); ++t) zy_[t] = init_anchors(*Ys_[t], cfg_.ky, cfg_, nus_[t]);
        }
        for (std::size_t t = 0; t < Ys_.size(); ++t) {
            build_costs(t);
            plan_step(t, false);
        }
    }

    double objective() const {
        double j = 0.0;
        for (std::size_t t = 0; t < Ys_.size(); ++t)
            j += entropic_objective(plans_[t], costs_[t], cfg_.eps_x, cfg_.eps_z, cfg_.eps_y);
        return j;
    }

    double transport() const {
        double j = 0.0;
        for (std::size_t t = 0; t < Ys_.size(); ++t) j += transport_objective(plans_[t], costs_[t]);
        return j;
    }

    void anchor_step() {
        const MetricSpec mx = scaled(cfg_.mx, 1.0 / cfg_.eps_x);
        const MetricSpec mz = scaled(cfg_.mz, 1.0 / cfg_.eps_z);
        const MetricSpec my = scaled(cfg_.my, 1.0 / cfg_.eps_y);
        if (transform_) {
            // Rotated source coordinates: X' = M X, Mx' = M Mx M^T, Zx = M^T Zx'.
            PointCloud Xr(M_ * X_.points);
            MetricSpec mxr = mx;
            if (!mx.is_identity()) mxr.matrix = M_ * mx.matrix * M_.transpose();
            AnchorPair ap = update_anchors(Xr, *Ys_.front(), plans_.front(), mxr, mz, my);
            zx_ = ap.zx;
            zx_.locations = M_.transpose() * ap.zx.locations;
            zy_.front() = ap.zy;
            M_ = procrustes_update(zx_.locations, zy_.front().locations, plans_.front().pz.values).matrix;
            return;
        }
        std::vector<TargetBlock> blocks;
        for (std::size_t t = 0; t < Ys_.size(); ++t) blocks.push_back(TargetBlock{&Ys_[t]->points, &plans_[t]});
        SharedAnchors s = update_shared_anchors(X_.points, blocks, mx, mz, my);
        zx_ = std::move(s.zx);
        for (std::size_t t = 0; t < Ys_.size(); ++t) zy_[t] = std::move(s.zy[t]);
    }

    void build_costs(std::size_t t) {
        costs_[t].cx = mahalanobis_cost(X_.points, zx_.locations, cfg_.mx);
        Matrix zxm = transform_ ? Matrix(M_ * zx_.locations) : zx_.locations;
        costs_[t].cz = mahalanobis_cost(zxm, zy_[t].locations, cfg_.mz);
        costs_[t].cy = mahalanobis_cost(zy_[t].locations, Ys_[t]->points, cfg_.my);
    }

    void plan_step(std::size_t t, bool warm) {
        GibbsKernel kx = shifted_gibbs_kernel(costs_[t].cx, cfg_.eps_x, KernelShift::Rows);
        GibbsKernel kz = shifted_gibbs_kernel(costs_[t].cz, cfg_.eps_z, KernelShift::Global);
        GibbsKernel ky = shifted_gibbs_kernel(costs_[t].cy, cfg_.eps_y, KernelShift::Cols);
        PlanUpdateResult r = update_plan(kx, kz, ky, mu_, nus_[t], cfg_.solver, warm ? &states_[t] : nullptr);
        plans_[t] = std::move(r.plans);
        states_[t] = std::move(r.state);
        infos_[t] = r.info;
        plan_iterations_ += r.info.iterations;
    }

    // Moves near-empty anchors onto the worst-served data point.  Returns true
    // when anything moved.
    bool reseed() {
        bool moved = false;
        const double thr_x = kReseedFraction * mu_.mass() / cfg_.kx;
        Vector usum = Vector::Zero(cfg_.kx);
        for (const auto& p : plans_) usum += p.px.values.colwise().sum().transpose();
        for (Eigen::Index m = 0; m < cfg_.kx; ++m) {
            if (usum(m) >= thr_x * static_cast<double>(plans_.size())) continue;
            Matrix acc = Matrix::Zero(X_.size(), cfg_.kx);
            for (std::size_t t = 0; t < plans_.size(); ++t)
                acc += plans_[t].px.values.cwiseProduct(costs_[t].cx.values);
            Vector per = acc.rowwise().sum().cwiseQuotient(mu_.weights.cwiseMax(1e-300));
            Eigen::Index i = 0;
            per.maxCoeff(&i);
            zx_.locations.col(m) = X_.points.col(i);
            ++reseeded_;
            moved = true;
        }
        for (std::size_t t = 0; t < plans_.size(); ++t) {
            const double thr_y = kReseedFraction * nus_[t].mass() / cfg_.ky;
            Vector vsum = plans_[t].py.values.rowwise().sum();
            for (Eigen::Index n = 0; n < cfg_.ky; ++n) {
                if (vsum(n) >= thr_y) continue;
                Eigen::Index j = worst_point(plans_[t].py.values, costs_[t].cy.values, false);
                zy_[t].locations.col(n) = Ys_[t]->points.col(j);
                ++reseeded_;
                moved = true;
            }
        }
        if (moved)
            for (std::size_t t = 0; t < plans_.size(); ++t) {
                build_costs(t);
                plan_step(t, false);
            }
        return moved;
    }

    void run(std::vector<double>& trace, std::vector<double>& cost_trace, bool& converged, int& iterations) {
        initialize();
        reseed();
        trace.push_back(objective());
        cost_trace.push_back(transport());
        converged = false;
        iterations = 0;
        for (int it = 1; it <= cfg_.outer_max_iter; ++it) {
            anchor_step();
            for (std::size_t t = 0; t < Ys_.size(); ++t) {
                build_costs(t);
                plan_step(t, true);
            }
            reseed();
            const double j = objective();
            const double prev = trace.back();
            trace.push_back(j);
            cost_trace.push_back(transport());
            iterations = it;
            if (relative_change_below(prev, j, cfg_.outer_tol)) {
                converged = true;
                break;
            }
        }
        if (transform_) {
            M_ = procrustes_update(zx_.locations, zy_.front().locations, plans_.front().pz.values).matrix;
            build_costs(0);
        }
    }

    LotSolution solution(std::size_t t) const {
        LotSolution s;
        s.plans = plans_[t];
        s.anchors_x = zx_;
        s.anchors_x.masses = plans_[t].px.values.colwise().sum().transpose();
        s.anchors_y = zy_[t];
        s.anchors_y.masses = plans_[t].py.values.rowwise().sum();
        if (transform_) s.transform = StiefelTransform{M_};
        s.mu = mu_.weights;
        s.nu = nus_[t].weights;
        s.costs = costs_[t];
        s.eps_x = cfg_.eps_x;
        s.eps_z = cfg_.eps_z;
        s.eps_y = cfg_.eps_y;
        s.variant = cfg_.variant;
        s.diagnostics.plan_iterations = plan_iterations_;
        s.diagnostics.plans_converged = infos_[t].converged;
        s.diagnostics.max_violation = infos_[t].violation;
        s.diagnostics.reseeded_anchors = reseeded_;
        return s;
    }

    bool plans_converged() const {
        return std::all_of(infos_.begin(), infos_.end(), [](const SolveInfo& i) { return i.converged; });
    }

    const AnchorSet& shared() const { return zx_; }

private:
    const PointCloud& X_;
    std::vector<const PointCloud*> Ys_;
    LotConfig cfg_;
    DiscreteMeasure mu_;
    std::vector<DiscreteMeasure> nus_;
    bool transform_ = false;
    Matrix M_;
    AnchorSet zx_;
    std::vector<AnchorSet> zy_;
    std::vector<PlanTriple> plans_;
    std::vector<ScalingState> states_;
    std::vector<LotCosts> costs_;
    std::vector<SolveInfo> infos_;
    int plan_iterations_ = 0;
    int reseeded_ = 0;
};

LotConfig prepared(const LotConfig& in) {
    LotConfig cfg = in;
    if (cfg.variant == Variant::FcLimit) {
        if (cfg.kx != cfg.ky) throw std::invalid_argument("FC limit requires kx = ky");
        cfg.mz.scale = cfg.fc_lambda;
        cfg.shared_init = true;
    }
    cfg.validate();
    return cfg;
}

LotSolution finish(Engine& e, std::vector<double> trace, std::vector<double> cost_trace, bool converged, int iters) {
    LotSolution s = e.solution(0);
    s.objective_trace = std::move(trace);
    s.diagnostics.cost_trace = std::move(cost_trace);
    s.converged = converged && e.plans_converged();
    s.iterations = iters;
    audit_rank(s.plans);
    return s;
}

Matrix centroids(const Matrix& pts, const Matrix& plan, bool points_are_rows, const Matrix& previous) {
    // points_are_rows: plan is n x k (source side); otherwise k x m (target side).
    Matrix weighted = points_are_rows ? Matrix(pts * plan) : Matrix(pts * plan.transpose());
    Vector mass = points_are_rows ? Vector(plan.colwise().sum().transpose()) : Vector(plan.rowwise().sum());
    Matrix out = previous;
    for (Eigen::Index k = 0; k < mass.size(); ++k)
        if (mass(k) > 0.0) out.col(k) = weighted.col(k) / mass(k);
    return out;
}

}  // namespace

LotSolution lot_solve(const PointCloud& X, const PointCloud& Y, const LotConfig& in) {
    if (in.variant != Variant::L2 && in.variant != Variant::FcLimit)
        throw std::invalid_argument("lot_solve handles the l2 and fc variants");
    LotConfig cfg = prepared(in);
    Engine e(X, {&Y}, cfg);
    std::vector<double> trace, cost_trace;
    bool converged = false;
    int iters = 0;
    e.run(trace, cost_trace, converged, iters);
    return finish(e, std::move(trace), std::move(cost_trace), converged, iters);
}

LotSolution lot_transform_solve(const PointCloud& X, const PointCloud& Y, const LotConfig& in) {
    if (in.variant != Variant::Transform) throw std::invalid_argument("lot_transform_solve requires the transform variant");
    LotConfig cfg = prepared(in);
    Engine e(X, {&Y}, cfg);
    std::vector<double> trace, cost_trace;
    bool converged = false;
    int iters = 0;
    e.run(trace, cost_trace, converged, iters);
    return finish(e, std::move(trace), std::move(cost_trace), converged, iters);
}

HubResult hub_barycenter_solve(const PointCloud& X, const std::vector<PointCloud>& targets, const LotConfig& in) {
    if (targets.empty()) throw std::invalid_argument("at least one target is required");
    if (in.variant != Variant::L2 && in.variant != Variant::FcLimit)
        throw std::invalid_argument("hub barycenter supports the l2 and fc variants");
    LotConfig cfg = prepared(in);
    cfg.shared_init = false;
    std::vector<const PointCloud*> ptrs;
    for (const auto& t : targets) ptrs.push_back(&t);
    Engine e(X, ptrs, cfg);
    HubResult out;
    std::vector<double> cost_trace;
    e.run(out.objective_trace, cost_trace, out.converged, out.iterations);
    out.converged = out.converged && e.plans_converged();
    out.shared = e.shared();
    for (std::size_t t = 0; t < targets.size(); ++t) {
        LotSolution s = e.solution(t);
        s.converged = out.converged;
        s.iterations = out.iterations;
        s.objective_trace.push_back(entropic_objective(s.plans, s.costs, s.eps_x, s.eps_z, s.eps_y));
        audit_rank(s.plans);
        out.solutions.push_back(std::move(s));
    }
    return out;
}

LotSolution lot_wa_solve(const PointCloud& X, const PointCloud& Y, const LotConfig& in) {
    if (in.variant != Variant::WA) throw std::invalid_argument("lot_wa_solve requires the wa variant");
    LotConfig cfg = prepared(in);
    if (X.dim() != Y.dim()) throw std::invalid_argument("source and target dimensions differ");
    if (cfg.kx > X.size() || cfg.ky > Y.size()) throw std::invalid_argument("anchor count exceeds point count");
    DiscreteMeasure mu = build_measure(X, cfg.source_weights);
    DiscreteMeasure nu = build_measure(Y, cfg.target_weights);

    AnchorSet zx = kmeans_init(X, cfg.kx, cfg.solver.seed, &mu.weights);
    AnchorSet zy = kmeans_init(Y, cfg.ky, cfg.solver.seed, &nu.weights);
    LotCosts costs;
    costs.cx = mahalanobis_cost(X.points, zx.locations, cfg.mx);
    costs.cy = mahalanobis_cost(zy.locations, Y.points, cfg.my);
    costs.cz = mahalanobis_cost(zx.locations, zy.locations, cfg.mz);

    auto step = [&](const ScalingState* warm, PlanUpdateResult& r) {
        r = update_plan(shifted_gibbs_kernel(costs.cx, cfg.eps_x, KernelShift::Rows),
                        shifted_gibbs_kernel(costs.cz, cfg.eps_z, KernelShift::Global),
                        shifted_gibbs_kernel(costs.cy, cfg.eps_y, KernelShift::Cols), mu, nu, cfg.solver, warm);
    };
    PlanUpdateResult r;
    step(nullptr, r);
    int plan_iters = r.info.iterations;

    LotSolution sol;
    sol.objective_trace.push_back(entropic_objective(r.plans, costs, cfg.eps_x, cfg.eps_z, cfg.eps_y));
    sol.diagnostics.cost_trace.push_back(transport_objective(r.plans, costs));
    std::optional<double> inner_eps = cfg.inner_epsilon;
    InnerPlanTensor inner;
    bool converged = false;
    int iters = 0;
    for (int it = 1; it <= cfg.outer_max_iter; ++it) {
        zx.locations = centroids(X.points, r.plans.px.values, true, zx.locations);
        zy.locations = centroids(Y.points, r.plans.py.values, false, zy.locations);
        costs.cx = mahalanobis_cost(X.points, zx.locations, cfg.mx);
        costs.cy = mahalanobis_cost(zy.locations, Y.points, cfg.my);
        AnchorCostResult ac =
            wasserstein_anchor_cost(r.plans.px, r.plans.py, X, Y, r.plans.pz, cfg.theta, inner_eps, cfg.solver);
        inner_eps = ac.inner_epsilon;
        sol.diagnostics.inner_failures += ac.failed_inner;
        costs.cz = std::move(ac.cost);
        inner = std::move(ac.inner);
        ScalingState warm = r.state;
        step(&warm, r);
        plan_iters += r.info.iterations;
        const double j = entropic_objective(r.plans, costs, cfg.eps_x, cfg.eps_z, cfg.eps_y);
        const double prev = sol.objective_trace.back();
        sol.objective_trace.push_back(j);
        sol.diagnostics.cost_trace.push_back(transport_objective(r.plans, costs));
        iters = it;
        if (relative_change_below(prev, j, cfg.outer_tol)) {
            converged = true;
            break;
        }
    }
    sol.plans = std::move(r.plans);
    sol.anchors_x = zx;
    sol.anchors_x.masses = sol.plans.px.values.colwise().sum().transpose();
    sol.anchors_y = zy;
    sol.anchors_y.masses = sol.plans.py.values.rowwise().sum();
    sol.inner_plans = std::move(inner);
    sol.converged = converged && r.info.converged;
    sol.iterations = iters;
    sol.mu = mu.weights;
    sol.nu = nu.weights;
    sol.costs = std::move(costs);
    sol.eps_x = cfg.eps_x;
    sol.eps_z = cfg.eps_z;
    sol.eps_y = cfg.eps_y;
    sol.variant = Variant::WA;
    sol.diagnostics.plan_iterations = plan_iters;
    sol.diagnostics.plans_converged = r.info.converged;
    sol.diagnostics.max_violation = r.info.violation;
    audit_rank(sol.plans);
    return sol;
}

LotSolution lot_unbalanced_solve(const PointCloud& X, const PointCloud& Y, const LotConfig& in) {
    if (in.variant != Variant::Unbalanced) throw std::invalid_argument("lot_unbalanced_solve requires the unbalanced variant");
    LotConfig cfg = prepared(in);
    if (X.dim() != Y.dim()) throw std::invalid_argument("source and target dimensions differ");
    if (cfg.kx > X.size() || cfg.ky > Y.size()) throw std::invalid_argument("anchor count exceeds point count");
    DiscreteMeasure mu = build_measure(X, cfg.source_weights);
    DiscreteMeasure nu = build_measure(Y, cfg.target_weights);

    AnchorSet zx = kmeans_init(X, cfg.kx, cfg.solver.seed, &mu.weights);
    AnchorSet zy = kmeans_init(Y, cfg.ky, cfg.solver.seed, &nu.weights);
    LotCosts costs;
    auto rebuild = [&]() {
        costs.cx = mahalanobis_cost(X.points, zx.locations, cfg.mx);
        costs.cz = mahalanobis_cost(zx.locations, zy.locations, cfg.mz);
        costs.cy = mahalanobis_cost(zy.locations, Y.points, cfg.my);
    };
    auto objective = [&](const UnbalancedResult& u) {
        double j = entropic_objective(u.plans, costs, cfg.eps_x, cfg.eps_z, cfg.eps_y);
        j += cfg.tau1 * generalized_kl(u.z1, mu.weights) + cfg.tau2 * generalized_kl(u.z2, nu.weights);
        return j;
    };
    auto step = [&](const ScalingState* warm) {
        return update_plan_unbalanced(gibbs_kernel(costs.cx, cfg.eps_x), gibbs_kernel(costs.cz, cfg.eps_z),
                                      gibbs_kernel(costs.cy, cfg.eps_y), mu, nu, cfg.tau1, cfg.tau2, cfg.eps_x,
                                      cfg.solver, warm);
    };
    rebuild();
    UnbalancedResult r = step(nullptr);
    int plan_iters = r.info.iterations;
    LotSolution sol;
    sol.objective_trace.push_back(objective(r));
    sol.diagnostics.cost_trace.push_back(transport_objective(r.plans, costs));
    bool converged = false;
    int iters = 0;
    if (cfg.unbalanced_anchor_updates) {
        for (int it = 1; it <= cfg.outer_max_iter; ++it) {
            AnchorPair ap = update_anchors(X, Y, r.plans, scaled(cfg.mx, 1.0 / cfg.eps_x), scaled(cfg.mz, 1.0 / cfg.eps_z),
                                           scaled(cfg.my, 1.0 / cfg.eps_y));
            zx = ap.zx;
            zy = ap.zy;
            rebuild();
            ScalingState warm = r.state;
            r = step(&warm);
            plan_iters += r.info.iterations;
            const double j = objective(r);
            const double prev = sol.objective_trace.back();
            sol.objective_trace.push_back(j);
            sol.diagnostics.cost_trace.push_back(transport_objective(r.plans, costs));
            iters = it;
            if (relative_change_below(prev, j, cfg.outer_tol)) {
                converged = true;
                break;
            }
        }
    } else {
        converged = true;
    }
    sol.plans = std::move(r.plans);
    sol.anchors_x = zx;
    sol.anchors_x.masses = sol.plans.px.values.colwise().sum().transpose();
    sol.anchors_y = zy;
    sol.anchors_y.masses = sol.plans.py.values.rowwise().sum();
    sol.converged = converged && r.info.converged;
    sol.iterations = iters;
    sol.mu = mu.weights;
    sol.nu = nu.weights;
    sol.costs = std::move(costs);
    sol.eps_x = cfg.eps_x;
    sol.eps_z = cfg.eps_z;
    sol.eps_y = cfg.eps_y;
    sol.variant = Variant::Unbalanced;
    sol.diagnostics.plan_iterations = plan_iters;
    sol.diagnostics.plans_converged = r.info.converged;
    sol.diagnostics.max_violation = r.info.violation;
    sol.diagnostics.z1 = r.z1;
    sol.diagnostics.z2 = r.z2;
    audit_rank(sol.plans);
    return sol;
}

LotSolution solve(const PointCloud& X, const PointCloud& Y, const LotConfig& cfg) {
    switch (cfg.variant) {
        case Variant::L2:
        case Variant::FcLimit: return lot_solve(X, Y, cfg);
        case Variant::WA: return lot_wa_solve(X, Y, cfg);
        case Variant::Unbalanced: return lot_unbalanced_solve(X, Y, cfg);
        case Variant::Transform: return lot_transform_solve(X, Y, cfg);
    }
    throw std::invalid_argument("unknown variant");
}

}  // namespace lot
