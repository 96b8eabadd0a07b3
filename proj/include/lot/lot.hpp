#pragma once

#include "lot/anchors.hpp"
#include "lot/bregman.hpp"
#include "lot/measures.hpp"
#include "lot/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lot {

enum class Variant { L2, WA, Unbalanced, Transform, FcLimit };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

// Default regularization for GMM-scale data and for classifier-feature data.
inline constexpr double kGmmEpsilon = 10.0;
inline constexpr double kDomainAdaptationEpsilon = 50.0;

struct LotConfig {
    int kx = 4;
    int ky = 4;
    MetricSpec mx = MetricSpec::identity();
    MetricSpec mz = MetricSpec::identity();
    MetricSpec my = MetricSpec::identity();
    double eps_x = kGmmEpsilon;
    double eps_z = kGmmEpsilon;
    double eps_y = kGmmEpsilon;
    Variant variant = Variant::L2;
    SolverConfig solver;

    double theta = 0.5;
    std::optional<double> inner_epsilon;

    double tau1 = 1.0;
    double tau2 = 1.0;
    bool unbalanced_anchor_updates = true;

    double fc_lambda = 1e4;

    int outer_max_iter = 200;
    double outer_tol = 1e-6;

    // Initialize both anchor sets from k-means on the union of X and Y.
    bool shared_init = false;

    std::optional<Vector> source_weights;
    std::optional<Vector> target_weights;

    void set_epsilon(double eps) { eps_x = eps_z = eps_y = eps; }
    void validate() const;
};

struct Diagnostics {
    int plan_iterations = 0;
    bool plans_converged = false;
    double max_violation = 0.0;
    int reseeded_anchors = 0;
    int inner_failures = 0;
    std::optional<Vector> z1;
    std::optional<Vector> z2;
    // Transport cost sum <C_i, P_i> after each outer iteration.
    std::vector<double> cost_trace;
};

struct LotCosts {
    CostMatrix cx;
    CostMatrix cz;
    CostMatrix cy;
};

struct LotSolution {
    PlanTriple plans;
    AnchorSet anchors_x;
    AnchorSet anchors_y;
    std::optional<StiefelTransform> transform;
    std::optional<InnerPlanTensor> inner_plans;
    // Entropic objective after each outer iteration (index 0 is the initial plan).
    std::vector<double> objective_trace;
    bool converged = false;
    int iterations = 0;

    Vector mu;
    Vector nu;
    LotCosts costs;
    double eps_x = 0.0, eps_z = 0.0, eps_y = 0.0;
    Variant variant = Variant::L2;
    Diagnostics diagnostics;
};

// eps_x * sum_i (<C_i, P_i> / eps_i - H(P_i)).
double entropic_objective(const PlanTriple& plans, const LotCosts& costs, double eps_x, double eps_z, double eps_y);
double transport_objective(const PlanTriple& plans, const LotCosts& costs);

LotSolution lot_solve(const PointCloud& X, const PointCloud& Y, const LotConfig& cfg);
LotSolution lot_wa_solve(const PointCloud& X, const PointCloud& Y, const LotConfig& cfg);
LotSolution lot_unbalanced_solve(const PointCloud& X, const PointCloud& Y, const LotConfig& cfg);
LotSolution lot_transform_solve(const PointCloud& X, const PointCloud& Y, const LotConfig& cfg);

// Dispatch on cfg.variant.
LotSolution solve(const PointCloud& X, const PointCloud& Y, const LotConfig& cfg);

struct HubResult {
    AnchorSet shared;
    std::vector<LotSolution> solutions;
    std::vector<double> objective_trace;
    bool converged = false;
    int iterations = 0;
};

HubResult hub_barycenter_solve(const PointCloud& X, const std::vector<PointCloud>& targets, const LotConfig& cfg);

}  // namespace lot
