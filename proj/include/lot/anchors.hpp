#pragma once

#include "lot/bregman.hpp"
#include "lot/types.hpp"

#include <vector>

namespace lot {

struct AnchorSet {
    Matrix locations;  // d x k
    Vector masses;

    Eigen::Index size() const { return locations.cols(); }
};

struct StiefelTransform {
    Matrix matrix;
};

AnchorSet kmeans_init(const PointCloud& cloud, int k, std::uint64_t seed, const Vector* weights = nullptr);

// Per-point index of the nearest centroid (ties to the lowest index).
std::vector<int> nearest_centroid(const Matrix& points, const Matrix& centroids);

struct AnchorPair {
    AnchorSet zx;
    AnchorSet zy;
};

AnchorPair update_anchors(const PointCloud& X, const PointCloud& Y, const PlanTriple& plans, const MetricSpec& mx,
                          const MetricSpec& mz, const MetricSpec& my);

// sum <Cx,Px> + <Cz,Pz> + <Cy,Py> with Mahalanobis costs at the given anchors.
double anchor_objective(const Matrix& X, const Matrix& Y, const Matrix& zx, const Matrix& zy, const PlanTriple& plans,
                        const MetricSpec& mx, const MetricSpec& mz, const MetricSpec& my);

// One target block of the shared-source system.
struct TargetBlock {
    const Matrix* Y;
    const PlanTriple* plans;
};

struct SharedAnchors {
    AnchorSet zx;
    std::vector<AnchorSet> zy;
};

// Joint minimizer of the summed objective over shared Zx and per-target Zy.
SharedAnchors update_shared_anchors(const Matrix& X, const std::vector<TargetBlock>& targets, const MetricSpec& mx,
                                    const MetricSpec& mz, const MetricSpec& my);

StiefelTransform procrustes_update(const AnchorSet& zx, const AnchorSet& zy, const TransportPlan& pz);
StiefelTransform procrustes_update(const Matrix& zx, const Matrix& zy, const Matrix& pz);

}  // namespace lot
