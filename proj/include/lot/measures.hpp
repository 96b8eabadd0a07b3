#pragma once

#include "lot/types.hpp"

#include <map>
#include <utility>

namespace lot {

DiscreteMeasure build_measure(const PointCloud& cloud, const std::optional<Vector>& weights = std::nullopt);
DiscreteMeasure uniform_measure(Eigen::Index n);

CostMatrix mahalanobis_cost(const Matrix& A, const Matrix& B, const MetricSpec& m);
CostMatrix mahalanobis_cost(const PointCloud& A, const PointCloud& B, const MetricSpec& m);
CostMatrix squared_euclidean_cost(const Matrix& A, const Matrix& B);

GibbsKernel gibbs_kernel(const CostMatrix& c, double epsilon);

// Kernel of a shifted cost.  Rows: subtract each row minimum; Cols: each column
// minimum; Both: rows then columns; Global: the overall minimum.
enum class KernelShift { None, Rows, Cols, Both, Global };
GibbsKernel shifted_gibbs_kernel(const CostMatrix& c, double epsilon, KernelShift shift);

struct InnerPlanTensor {
    std::map<std::pair<int, int>, TransportPlan> plans;
};

struct AnchorCostResult {
    CostMatrix cost;
    InnerPlanTensor inner;
    double inner_epsilon = 0.0;
    int failed_inner = 0;
};

AnchorCostResult wasserstein_anchor_cost(const TransportPlan& px, const TransportPlan& py, const PointCloud& X,
                                         const PointCloud& Y, const TransportPlan& pz_prev, double theta,
                                         std::optional<double> inner_epsilon, const SolverConfig& inner_cfg);

}  // namespace lot
