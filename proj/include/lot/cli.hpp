#pragma once

#include "lot/lot.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace lot::cli {

int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

struct DataSpec {
    int components = 4;
    int ambient_dim = 30;
    int signal_dim = 5;
    int points_per_component = 100;
    int benchmark_n = 250;
    int sampling_pool = 2000;
};

struct ExperimentConfig {
    std::string experiment = "gmm_sweep";
    std::string sweep = "outlier_rate";
    std::vector<double> values;
    int repetitions = 20;
    std::vector<std::string> methods{"OT", "LOT_L2"};
    LotConfig lot;
    std::string map = "displacement";
    std::uint64_t seed = 0;
    DataSpec data;
    std::string output;
    int jobs = 1;

    void validate() const;
};

ExperimentConfig experiment_from_json(const nlohmann::json& j);
nlohmann::json experiment_to_json(const ExperimentConfig& c);

struct ResultRecord {
    std::string method;
    double sweep_value = 0.0;
    std::uint64_t seed = 0;
    std::optional<double> plan_deviation;
    std::optional<double> knn_accuracy;
    std::optional<int> transport_rank;
    std::optional<double> latent_discrepancy;
    std::optional<double> purity;
    std::optional<double> extra;
    bool converged = false;
    int outer_iterations = 0;
    int plan_iterations = 0;
    double wall_seconds = 0.0;
};

struct ExperimentOutput {
    std::vector<ResultRecord> records;
    nlohmann::json summary;
};

ExperimentOutput run_experiment(const ExperimentConfig& cfg);

std::string records_csv(const std::vector<ResultRecord>& records, const std::string& sweep);
std::string timing_csv(const std::vector<ResultRecord>& records);

// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> v, double q);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace lot::cli
