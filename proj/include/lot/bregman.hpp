#pragma once

#include "lot/types.hpp"

namespace lot {

struct ScalingState {
    Vector alpha_x, beta_x;
    Vector alpha_z, beta_z;
    Vector alpha_y, beta_y;

    bool matches(Eigen::Index n, Eigen::Index kx, Eigen::Index ky, Eigen::Index m) const;
    static ScalingState ones(Eigen::Index n, Eigen::Index kx, Eigen::Index ky, Eigen::Index m);
};

struct PlanTriple {
    TransportPlan px;
    TransportPlan pz;
    TransportPlan py;
    Vector u_z;
    Vector v_z;
};

struct PlanUpdateResult {
    PlanTriple plans;
    ScalingState state;
    SolveInfo info;
};

struct UnbalancedResult {
    PlanTriple plans;
    ScalingState state;
    SolveInfo info;
    Vector z1;
    Vector z2;
};

// Largest L1 violation over the six marginal constraints of a plan triple.
double max_marginal_violation(const PlanTriple& plans, const Vector& mu, const Vector& nu);

PlanUpdateResult update_plan(const GibbsKernel& kx, const GibbsKernel& kz, const GibbsKernel& ky,
                             const DiscreteMeasure& mu, const DiscreteMeasure& nu, const SolverConfig& cfg,
                             const ScalingState* warm = nullptr);

// Outer marginals relaxed by tau * KL.  epsilon is the regularization used in
// the damping exponent tau / (tau + epsilon).
UnbalancedResult update_plan_unbalanced(const GibbsKernel& kx, const GibbsKernel& kz, const GibbsKernel& ky,
                                        const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tau1,
                                        double tau2, double epsilon, const SolverConfig& cfg,
                                        const ScalingState* warm = nullptr);

}  // namespace lot
