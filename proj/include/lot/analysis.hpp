#pragma once

#include "lot/lot.hpp"
#include "lot/types.hpp"

#include <string>

namespace lot {

TransportPlan compose_plan(const PlanTriple& plans);
TransportPlan compose_plan(const LotSolution& sol);

// Rank of the composed plan from its factors, without forming the n x m matrix.
int factored_rank(const PlanTriple& plans, double rel_tol = 1e-8);

enum class TransportMode { LotDisplacement, FcDisplacement, OtBarycentric };

TransportMode parse_transport_mode(const std::string& s);

PointCloud estimate_transport(const LotSolution& sol, const PointCloud& X, const PointCloud& Y, TransportMode mode);

// Row-normalized barycentric image of X under plan p: diag(p 1)^-1 p Y^T.
PointCloud barycentric_projection(const Matrix& p, const PointCloud& X, const PointCloud& Y);

struct WaEstimate {
    PointCloud points;
    int fallbacks = 0;
};

WaEstimate estimate_transport_wa(const LotSolution& sol, const PointCloud& X, const PointCloud& Y);

double latent_discrepancy(const LotSolution& sol, const LotCosts& costs, double p);

struct TheoryCheckReport {
    double slack = 0.0;
    bool premise_satisfied = false;
    double lhs = 0.0;
    double kl_x = 0.0, kl_z = 0.0, kl_y = 0.0;
    double entropy_u = 0.0, entropy_v = 0.0;
    double premise_margin = 0.0;  // max over entries of log(KxKzKy) - log K
};

struct RelaxationKernels {
    GibbsKernel kx, kz, ky;
};

TheoryCheckReport check_relaxation(const PlanTriple& plans, const RelaxationKernels& kernels, const GibbsKernel& k,
                                   double epsilon);
TheoryCheckReport check_relaxation(const LotSolution& sol, const RelaxationKernels& kernels, const GibbsKernel& k,
                                   double epsilon);

struct Cor1Setup {
    RelaxationKernels latent;
    GibbsKernel full;
    LotConfig config;
};

// Costs 3^{p-1} |x - z|_p^p on each latent leg and |x - y|_p^p for the full kernel.
// Only p = 2 maps to a Mahalanobis metric; config is set up for that case.
Cor1Setup cor1_setup(const PointCloud& X, const PointCloud& Y, const Matrix& zx, const Matrix& zy, double epsilon,
                     double p);

// kappa = 4^(1 - 1/p).
double quasi_triangle_constant(double p);

double quasi_triangle_slack(const PointCloud& mu, const PointCloud& nu, const PointCloud& zeta, const LotConfig& cfg,
                            double p);
// W_p^L between two clouds: lot_solve then latent_discrepancy.
double latent_wasserstein(const PointCloud& a, const PointCloud& b, const LotConfig& cfg, double p);

double plan_deviation(const TransportPlan& p, const TransportPlan& p0);
double plan_deviation(const Matrix& p, const Matrix& p0);

int transport_rank(const TransportPlan& p, double rel_tol = 1e-8);
int transport_rank(const Matrix& p, double rel_tol = 1e-8);

double knn_accuracy(const PointCloud& x_hat, const PointCloud& Y);

struct Metrics {
    double plan_deviation = 0.0;
    double knn_accuracy = 0.0;
    int transport_rank = 0;
    double latent_discrepancy = 0.0;
};

// Rank bound audit.  Each solve records one check against min(kx, ky)
// and the counters are process-wide.
struct RankAudit {
    long checks = 0;
    long violations = 0;
};
RankAudit rank_audit();
void reset_rank_audit();
// Records one check; returns whether the bound held.
bool audit_rank(const PlanTriple& plans);

}  // namespace lot
