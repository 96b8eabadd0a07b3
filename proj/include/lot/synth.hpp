#pragma once

#include "lot/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace lot {

struct GmmSpec {
    int components = 4;
    int ambient_dim = 30;
    int signal_dim = 5;
    int points_per_component = 100;
    std::uint64_t seed = 0;
    // Means at sqrt(k) e_c, pairwise equidistant. Requires components <= signal_dim.
    bool equal_spacing = false;
};

struct GmmSample {
    PointCloud source;
    PointCloud target;
    // Component means in ambient coordinates (d x M).
    Matrix means;
};

GmmSample gen_gmm(const GmmSpec& spec);

struct PerturbationSpec {
    enum class Kind { Rotation, Outliers, DimPad, Mismatch };
    Kind kind = Kind::Rotation;
    double angle_degrees = 0.0;
    double rate = 0.0;
    int target_dim = 0;
    std::vector<int> drop_labels;

    static PerturbationSpec rotation(double degrees);
    static PerturbationSpec outliers(double rate);
    static PerturbationSpec dim_pad(int target_dim);
    static PerturbationSpec mismatch(std::vector<int> labels);
};

struct Perturbed {
    PointCloud cloud;
    // Indices into the input cloud of retained points, in order.
    std::vector<int> kept;
    // Indices of points replaced by outliers.
    std::vector<int> replaced;
};

Perturbed perturb(const PointCloud& cloud, const PerturbationSpec& spec, std::uint64_t seed);

enum class BenchmarkKind { Hypercube, Annulus };

std::pair<PointCloud, PointCloud> gen_benchmark(BenchmarkKind kind, int d, int n, std::uint64_t seed);

// T(x) = x + 2 sign(x) (e1 + e2).
Vector hypercube_map(const Vector& x);
int hypercube_quadrant(const Vector& x);

}  // namespace lot
