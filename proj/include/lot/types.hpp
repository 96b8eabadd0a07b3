#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;

// Numerical failure inside a solver (unreachable anchor, singular system).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, int index = -1)
        : std::runtime_error(what), index_(index) {}
    int index() const { return index_; }

private:
    int index_;
};

// Points are columns: d x n.
struct PointCloud {
    Matrix points;
    std::optional<Labels> labels;

    PointCloud() = default;
    explicit PointCloud(Matrix pts, std::optional<Labels> lab = std::nullopt);

    Eigen::Index dim() const { return points.rows(); }
    Eigen::Index size() const { return points.cols(); }
    bool has_labels() const { return labels.has_value(); }
};

struct DiscreteMeasure {
    Vector weights;
    bool normalized = true;

    Eigen::Index size() const { return weights.size(); }
    double mass() const { return weights.sum(); }
};

// Cost is scale * (a - b)^T M (a - b).  An empty matrix means the identity.
struct MetricSpec {
    Matrix matrix;
    double scale = 1.0;

    static MetricSpec identity(double scale = 1.0) { return MetricSpec{Matrix(), scale}; }
    bool is_identity() const { return matrix.size() == 0; }
    Matrix effective(Eigen::Index d) const;
    void validate(Eigen::Index d) const;
};

struct CostMatrix {
    Matrix values;
};

struct GibbsKernel {
    Matrix values;
    double epsilon = 1.0;
    // Generating cost, so that log K = -cost / epsilon survives underflow.
    Matrix cost;

    Matrix log_values() const;
};

struct TransportPlan {
    Matrix values;
    Vector row_marginal;
    Vector col_marginal;
    double tol = 0.0;

    double mass() const { return values.sum(); }
};

struct SolverConfig {
    double epsilon = 10.0;
    int max_iter = 10000;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    bool cold_start = false;
    bool record_trace = false;

    void validate() const;
};

struct SolveInfo {
    bool converged = false;
    int iterations = 0;
    double violation = 0.0;
    // Dual objective after each sweep; only filled when record_trace is set.
    std::vector<double> dual_trace;
};

}  // namespace lot
