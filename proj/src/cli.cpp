#include "lot/cli.hpp"

#include "lot/analysis.hpp"
#include "lot/io.hpp"
#include "lot/sinkhorn.hpp"
#include "lot/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace lot::cli {

using nlohmann::json;

namespace {

constexpr long kInlinePlanLimit = 1000000;

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

json vector_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

// Points as rows, matching the CSV convention.
json anchors_json(const Matrix& z) { return matrix_json(z.transpose()); }

std::string stem_of(const std::string& path) {
    const std::string ext = ".json";
    if (path.size() > ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0)
        return path.substr(0, path.size() - ext.size());
    return path;
}

std::string base_name(const std::string& path) {
    const auto p = path.find_last_of('/');
    return p == std::string::npos ? path : path.substr(p + 1);
}

json plan_json(const Matrix& m, const std::string& stem, const std::string& tag) {
    if (static_cast<long>(m.size()) <= kInlinePlanLimit) return matrix_json(m);
    const std::string file = stem + "." + tag + ".bin";
    write_matrix_binary(file, m);
    return json{{"binary", base_name(file)}, {"rows", m.rows()}, {"cols", m.cols()}};
}

std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

// ---------------------------------------------------------------- solve

struct SolveArgs {
    std::string source, target, out;
    int kx = 4, ky = 4;
    double epsilon = 10.0;
    std::optional<double> eps_z, eps_y;
    std::string variant = "l2";
    std::optional<double> lambda;
    double tau1 = 1.0, tau2 = 1.0, theta = 0.5;
    int max_iter = 10000;
    double tol = 1e-6;
    int outer_max_iter = 200;
    double outer_tol = 1e-6;
    std::uint64_t seed = 0;
    std::string map = "displacement";
    bool cold_start = false;
};

LotConfig config_from(const SolveArgs& a) {
    LotConfig c;
    c.kx = a.kx;
    c.ky = a.ky;
    c.variant = parse_variant(a.variant);
    c.set_epsilon(a.epsilon);
    if (a.eps_z) c.eps_z = *a.eps_z;
    if (a.eps_y) c.eps_y = *a.eps_y;
    if (a.lambda) {
        if (c.variant == Variant::FcLimit) c.fc_lambda = *a.lambda;
        else c.mz.scale = *a.lambda;
    }
    c.tau1 = a.tau1;
    c.tau2 = a.tau2;
    c.theta = a.theta;
    c.solver.epsilon = a.epsilon;
    c.solver.max_iter = a.max_iter;
    c.solver.tol = a.tol;
    c.solver.seed = a.seed;
    c.solver.cold_start = a.cold_start;
    c.outer_max_iter = a.outer_max_iter;
    c.outer_tol = a.outer_tol;
    return c;
}

int cmd_solve(const SolveArgs& a) {
    PointCloud X = read_csv(a.source);
    PointCloud Y = read_csv(a.target);
    if (X.dim() != Y.dim()) throw std::invalid_argument("source and target dimensions differ");
    LotConfig cfg = config_from(a);
    if (cfg.variant == Variant::FcLimit && cfg.kx != cfg.ky) throw std::invalid_argument("FC limit requires kx = ky");
    TransportMode mode = parse_transport_mode(a.map);
    LotSolution sol = solve(X, Y, cfg);

    const std::string stem = stem_of(a.out);
    json j;
    j["variant"] = to_string(sol.variant);
    j["converged"] = sol.converged;
    j["iterations"] = sol.iterations;
    j["config"] = {{"kx", cfg.kx},         {"ky", cfg.ky},         {"epsilon_x", cfg.eps_x}, {"epsilon_z", cfg.eps_z},
                   {"epsilon_y", cfg.eps_y}, {"mz_scale", cfg.mz.scale}, {"tol", cfg.solver.tol},
                   {"max_iter", cfg.solver.max_iter}, {"seed", cfg.solver.seed}};
    j["anchors_x"] = anchors_json(sol.anchors_x.locations);
    j["anchors_y"] = anchors_json(sol.anchors_y.locations);
    j["masses_x"] = vector_json(sol.anchors_x.masses);
    j["masses_y"] = vector_json(sol.anchors_y.masses);
    j["plans"] = {{"px", plan_json(sol.plans.px.values, stem, "px")},
                  {"pz", plan_json(sol.plans.pz.values, stem, "pz")},
                  {"py", plan_json(sol.plans.py.values, stem, "py")}};
    TransportPlan P = compose_plan(sol.plans);
    j["composed"] = {{"rows", P.values.rows()},
                     {"cols", P.values.cols()},
                     {"rank", factored_rank(sol.plans)},
                     {"row_violation", (P.values.rowwise().sum() - sol.mu).lpNorm<1>()},
                     {"col_violation", (P.values.colwise().sum().transpose() - sol.nu).lpNorm<1>()}};
    j["objective_trace"] = sol.objective_trace;
    j["cost_trace"] = sol.diagnostics.cost_trace;
    if (sol.transform) j["transform"] = matrix_json(sol.transform->matrix);
    if (sol.diagnostics.z1) j["relaxed_marginals"] = {{"z1", vector_json(*sol.diagnostics.z1)}, {"z2", vector_json(*sol.diagnostics.z2)}};
    j["diagnostics"] = {{"plan_iterations", sol.diagnostics.plan_iterations},
                        {"plans_converged", sol.diagnostics.plans_converged},
                        {"max_violation", sol.diagnostics.max_violation},
                        {"reseeded_anchors", sol.diagnostics.reseeded_anchors},
                        {"inner_failures", sol.diagnostics.inner_failures}};

    PointCloud xhat;
    if (sol.variant == Variant::WA && mode == TransportMode::LotDisplacement) {
        WaEstimate w = estimate_transport_wa(sol, X, Y);
        xhat = std::move(w.points);
        j["diagnostics"]["wa_fallbacks"] = w.fallbacks;
    } else {
        xhat = estimate_transport(sol, X, Y, mode);
    }
    const std::string xhat_path = stem + ".xhat.csv";
    write_csv(xhat_path, xhat);
    j["transport_estimate"] = base_name(xhat_path);

    std::ofstream out(a.out);
    if (!out) throw std::runtime_error("cannot write " + a.out);
    out << j.dump(2) << "\n";
    return sol.converged ? 0 : 2;
}

// ---------------------------------------------------------------- tune-epsilon

struct TuneArgs {
    std::string source, target;
    int kx = 4, ky = 4;
    double lo = 1e-3, hi = 1e3;
    int trials = 40;
    int max_iter = 10000;
    double tol = 1e-6;
    int outer_max_iter = 200;
    std::uint64_t seed = 0;
};

bool converges_at(const PointCloud& X, const PointCloud& Y, LotConfig cfg, double eps) {
    cfg.set_epsilon(eps);
    cfg.solver.epsilon = eps;
    try {
        return lot_solve(X, Y, cfg).converged;
    } catch (const NumericalError&) {
        return false;
    }
}

int cmd_tune(const TuneArgs& a) {
    if (!(a.lo > 0.0) || !(a.hi > a.lo)) throw std::invalid_argument("bracket must satisfy 0 < lo < hi");
    if (a.trials < 1) throw std::invalid_argument("trials must be positive");
    PointCloud X = read_csv(a.source);
    PointCloud Y = read_csv(a.target);
    LotConfig cfg;
    cfg.kx = a.kx;
    cfg.ky = a.ky;
    cfg.solver.max_iter = a.max_iter;
    cfg.solver.tol = a.tol;
    cfg.solver.seed = a.seed;
    cfg.outer_max_iter = a.outer_max_iter;
    cfg.validate();
    double lo = a.lo, hi = a.hi;
    if (!converges_at(X, Y, cfg, hi)) {
        std::cerr << "upper bracket epsilon " << format_double(hi) << " does not converge\n";
        return 2;
    }
    int trials = 1;
    if (converges_at(X, Y, cfg, lo)) {
        std::cout << format_double(lo) << "\n";
        return 0;
    }
    ++trials;
    while (hi / lo > 1.1 && trials < a.trials) {
        const double mid = std::sqrt(lo * hi);
        if (converges_at(X, Y, cfg, mid)) hi = mid;
        else lo = mid;
        ++trials;
    }
    std::cout << format_double(hi) << "\n";
    return 0;
}

// ---------------------------------------------------------------- experiments

struct MethodOutput {
    Matrix plan;
    PointCloud xhat;
    int rank = 0;
    double latent = 0.0;
    bool converged = false;
    int outer = 0;
    int plan_iterations = 0;
    std::optional<LotSolution> lot;
};

MethodOutput run_ot(const PointCloud& X, const PointCloud& Y, const LotConfig& cfg) {
    CostMatrix C = squared_euclidean_cost(X.points, Y.points);
    GibbsKernel K = shifted_gibbs_kernel(C, cfg.eps_x, KernelShift::Both);
    SolverConfig sc = cfg.solver;
    sc.epsilon = cfg.eps_x;
    SinkhornResult r = sinkhorn(uniform_measure(X.size()), uniform_measure(Y.size()), K, sc);
    MethodOutput o;
    o.plan = r.plan.values;
    o.xhat = barycentric_projection(o.plan, X, Y);
    o.rank = transport_rank(o.plan);
    o.latent = std::sqrt(std::max(0.0, ot_cost(o.plan, C.values)));
    o.converged = r.info.converged;
    o.plan_iterations = r.info.iterations;
    return o;
}

MethodOutput run_method(const std::string& method, const PointCloud& X, const PointCloud& Y, LotConfig cfg,
                        TransportMode mode) {
    if (method == "OT") return run_ot(X, Y, cfg);
    if (method == "LOT_L2") cfg.variant = Variant::L2;
    else if (method == "LOT_WA") cfg.variant = Variant::WA;
    else if (method == "FC_LIMIT") cfg.variant = Variant::FcLimit;
    else if (method == "UNBALANCED") cfg.variant = Variant::Unbalanced;
    else throw std::invalid_argument("unknown method: " + method);
    if (cfg.variant == Variant::FcLimit) cfg.ky = cfg.kx;
    LotSolution sol = solve(X, Y, cfg);
    MethodOutput o;
    o.plan = compose_plan(sol.plans).values;
    if (cfg.variant == Variant::WA && mode == TransportMode::LotDisplacement)
        o.xhat = estimate_transport_wa(sol, X, Y).points;
    else if (cfg.variant == Variant::FcLimit && mode == TransportMode::LotDisplacement)
        o.xhat = estimate_transport(sol, X, Y, TransportMode::FcDisplacement);
    else
        o.xhat = estimate_transport(sol, X, Y, mode);
    o.rank = factored_rank(sol.plans);
    o.latent = latent_discrepancy(sol, sol.costs, 2.0);
    o.converged = sol.converged;
    o.outer = sol.iterations;
    o.plan_iterations = sol.diagnostics.plan_iterations;
    o.lot = std::move(sol);
    return o;
}

ResultRecord record_from(const std::string& method, double value, std::uint64_t seed, const MethodOutput& o) {
    ResultRecord r;
    r.method = method;
    r.sweep_value = value;
    r.seed = seed;
    r.transport_rank = o.rank;
    r.latent_discrepancy = o.latent;
    r.converged = o.converged;
    r.outer_iterations = o.outer;
    r.plan_iterations = o.plan_iterations;
    return r;
}

PointCloud select_columns(const PointCloud& c, const std::vector<int>& idx) {
    Matrix pts(c.dim(), static_cast<Eigen::Index>(idx.size()));
    std::optional<Labels> labels;
    if (c.labels) labels.emplace();
    for (std::size_t a = 0; a < idx.size(); ++a) {
        pts.col(static_cast<Eigen::Index>(a)) = c.points.col(idx[a]);
        if (labels) labels->push_back((*c.labels)[static_cast<std::size_t>(idx[a])]);
    }
    return PointCloud(std::move(pts), std::move(labels));
}

Matrix restrict_rows(const Matrix& p, const std::vector<int>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), p.cols());
    for (std::size_t a = 0; a < rows.size(); ++a) out.row(static_cast<Eigen::Index>(a)) = p.row(rows[a]);
    const double s = out.sum();
    if (s > 0.0) out /= s;
    return out;
}

GmmSample make_gmm(const ExperimentConfig& c, std::uint64_t seed, bool equal_spacing = false) {
    GmmSpec g;
    g.components = c.data.components;
    g.ambient_dim = c.data.ambient_dim;
    g.signal_dim = c.data.signal_dim;
    g.points_per_component = c.data.points_per_component;
    g.seed = seed;
    g.equal_spacing = equal_spacing;
    return gen_gmm(g);
}

using Cell = std::vector<ResultRecord>;

Cell gmm_cell(const ExperimentConfig& c, double value, int rep, TransportMode mode) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(rep);
    GmmSample base = make_gmm(c, seed);
    PointCloud X0 = base.source, Y0 = base.target, X = base.source, Y = base.target;
    std::vector<int> kept;
    LotConfig lc = c.lot;
    lc.solver.seed = seed;
    const std::uint64_t pseed = seed ^ 0x9e3779b97f4a7c15ULL;
    if (c.sweep == "rotation") {
        X = perturb(X0, PerturbationSpec::rotation(value), pseed).cloud;
    } else if (c.sweep == "outlier_rate") {
        X = perturb(X0, PerturbationSpec::outliers(value), pseed).cloud;
    } else if (c.sweep == "dimension") {
        const int dp = static_cast<int>(value);
        X = perturb(X0, PerturbationSpec::dim_pad(dp), pseed).cloud;
        Y = perturb(Y0, PerturbationSpec::dim_pad(dp), pseed + 1).cloud;
    } else if (c.sweep == "mismatch") {
        std::vector<int> drop;
        for (int l = static_cast<int>(value); l < c.data.components; ++l) drop.push_back(l);
        Perturbed p = perturb(X0, PerturbationSpec::mismatch(drop), pseed);
        X = p.cloud;
        kept = p.kept;
    } else if (c.sweep == "rank") {
        lc.kx = lc.ky = static_cast<int>(value);
    } else {
        throw std::invalid_argument("unknown sweep parameter: " + c.sweep);
    }

    Cell cell;
    std::optional<Matrix> ot_reference;
    for (const std::string& m : c.methods) {
        auto t0 = std::chrono::steady_clock::now();
        MethodOutput out = run_method(m, X, Y, lc, mode);
        Matrix P0;
        if (c.sweep == "rank") {
            if (!ot_reference) ot_reference = run_ot(X0, Y0, lc).plan;
            P0 = *ot_reference;
        } else {
            P0 = run_method(m, X0, Y0, lc, mode).plan;
            if (!kept.empty()) P0 = restrict_rows(P0, kept);
        }
        ResultRecord r = record_from(m, value, seed, out);
        r.plan_deviation = plan_deviation(out.plan, P0);
        r.knn_accuracy = knn_accuracy(out.xhat, Y);
        r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        cell.push_back(std::move(r));
    }
    return cell;
}

double anchor_purity(const LotSolution& sol, const Labels& labels) {
    const Matrix& Px = sol.plans.px.values;
    std::map<std::pair<Eigen::Index, int>, int> counts;
    for (Eigen::Index i = 0; i < Px.rows(); ++i) {
        Eigen::Index m = 0;
        Px.row(i).maxCoeff(&m);
        ++counts[{m, labels[static_cast<std::size_t>(i)]}];
    }
    std::map<Eigen::Index, int> best;
    for (const auto& [key, n] : counts) best[key.first] = std::max(best[key.first], n);
    int total = 0;
    for (const auto& [m, n] : best) total += n;
    return static_cast<double>(total) / static_cast<double>(Px.rows());
}

Cell benchmark_cell(const ExperimentConfig& c, BenchmarkKind kind, int rep, TransportMode mode) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(rep);
    auto [X, Y] = gen_benchmark(kind, c.data.ambient_dim, c.data.benchmark_n, seed);
    LotConfig lc = c.lot;
    lc.solver.seed = seed;
    Cell cell;
    for (const std::string& m : c.methods) {
        auto t0 = std::chrono::steady_clock::now();
        MethodOutput out = run_method(m, X, Y, lc, mode);
        ResultRecord r = record_from(m, 0.0, seed, out);
        if (kind == BenchmarkKind::Hypercube) {
            r.knn_accuracy = knn_accuracy(out.xhat, Y);
            if (out.lot) r.purity = anchor_purity(*out.lot, *X.labels);
        } else {
            double rad = 0.0;
            for (Eigen::Index i = 0; i < out.xhat.size(); ++i) rad += out.xhat.points.col(i).head(2).norm();
            r.extra = rad / static_cast<double>(out.xhat.size());
        }
        r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        cell.push_back(std::move(r));
    }
    return cell;
}

struct SamplingPool {
    PointCloud X, Y;
    double full = 0.0;
};

SamplingPool sampling_pool(const ExperimentConfig& c) {
    ExperimentConfig pc = c;
    pc.data.points_per_component = std::max(1, c.data.sampling_pool / c.data.components);
    GmmSample g = make_gmm(pc, c.seed);
    LotConfig lc = c.lot;
    lc.variant = Variant::L2;
    lc.solver.seed = c.seed;
    LotSolution s = lot_solve(g.source, g.target, lc);
    return SamplingPool{g.source, g.target, transport_objective(s.plans, s.costs)};
}

// i.i.d. draws from the empirical pool measure.
std::vector<int> subsample(Eigen::Index n, int k, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int& i : idx) i = pick(rng);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Cell sampling_cell(const ExperimentConfig& c, const SamplingPool& pool, double value, int rep) {
    const int N = static_cast<int>(value);
    const std::uint64_t seed = c.seed + 1000003ULL * static_cast<std::uint64_t>(rep + 1) + static_cast<std::uint64_t>(N);
    std::mt19937_64 rng(seed);
    PointCloud Xs = select_columns(pool.X, subsample(pool.X.size(), N, rng));
    LotConfig lc = c.lot;
    lc.variant = Variant::L2;
    lc.solver.seed = c.seed;
    auto t0 = std::chrono::steady_clock::now();
    LotSolution s = lot_solve(Xs, pool.Y, lc);
    const double t = transport_objective(s.plans, s.costs);
    ResultRecord r;
    r.method = "LOT_L2";
    r.sweep_value = value;
    r.seed = seed;
    r.transport_rank = factored_rank(s.plans);
    r.latent_discrepancy = std::sqrt(std::max(0.0, t));
    r.extra = std::abs(pool.full - t);
    r.knn_accuracy = knn_accuracy(estimate_transport(s, Xs, pool.Y, TransportMode::LotDisplacement), pool.Y);
    r.converged = s.converged;
    r.outer_iterations = s.iterations;
    r.plan_iterations = s.diagnostics.plan_iterations;
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return Cell{r};
}

// Class-by-class aggregated plan mass.
Matrix class_blocks(const Matrix& P, const Labels& ls, const Labels& lt, int classes) {
    Matrix B = Matrix::Zero(classes, classes);
    for (Eigen::Index i = 0; i < P.rows(); ++i)
        for (Eigen::Index j = 0; j < P.cols(); ++j) B(ls[static_cast<std::size_t>(i)], lt[static_cast<std::size_t>(j)]) += P(i, j);
    return B;
}

Matrix cluster_correlation(const PointCloud& X, const PointCloud& Y, int classes) {
    Matrix ms = Matrix::Zero(X.dim(), classes), mt = Matrix::Zero(Y.dim(), classes);
    Vector cs = Vector::Zero(classes), ct = Vector::Zero(classes);
    for (Eigen::Index i = 0; i < X.size(); ++i) {
        int l = (*X.labels)[static_cast<std::size_t>(i)];
        ms.col(l) += X.points.col(i);
        cs(l) += 1.0;
    }
    for (Eigen::Index j = 0; j < Y.size(); ++j) {
        int l = (*Y.labels)[static_cast<std::size_t>(j)];
        mt.col(l) += Y.points.col(j);
        ct(l) += 1.0;
    }
    ms = ms * cs.cwiseMax(1.0).cwiseInverse().asDiagonal();
    mt = mt * ct.cwiseMax(1.0).cwiseInverse().asDiagonal();
    return ms.transpose() * mt;
}

struct CorrelationCell {
    Cell records;
    std::map<std::string, Matrix> blocks;
    Matrix correlation;
};

CorrelationCell correlation_cell(const ExperimentConfig& c, double value, int rep, TransportMode mode) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(rep);
    GmmSample g = make_gmm(c, seed, value != 0.0);
    LotConfig lc = c.lot;
    lc.solver.seed = seed;
    CorrelationCell out;
    out.correlation = cluster_correlation(g.source, g.target, c.data.components);
    for (const std::string& m : c.methods) {
        auto t0 = std::chrono::steady_clock::now();
        MethodOutput o = run_method(m, g.source, g.target, lc, mode);
        Matrix B = class_blocks(o.plan, *g.source.labels, *g.target.labels, c.data.components);
        ResultRecord r = record_from(m, value, seed, o);
        r.knn_accuracy = knn_accuracy(o.xhat, g.target);
        r.extra = B.trace() / B.sum();
        r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.records.push_back(std::move(r));
        out.blocks[m] = B;
    }
    return out;
}

int effective_jobs(int requested) {
    if (const char* env = std::getenv("LOT_JOBS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return std::max(1, requested);
}

template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next++;
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
            }
        }
    };
    const int n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(jobs), std::max<std::size_t>(count, 1)));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (err) std::rethrow_exception(err);
}

json band(std::vector<double> v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    return json{{"mean", mean}, {"q12_5", quantile(v, 0.125)}, {"q87_5", quantile(v, 0.875)}, {"count", v.size()}};
}

json summarize(const std::vector<ResultRecord>& recs) {
    std::map<std::pair<std::string, double>, std::vector<const ResultRecord*>> groups;
    for (const auto& r : recs) groups[{r.method, r.sweep_value}].push_back(&r);
    json out = json::array();
    for (const auto& [key, rs] : groups) {
        json metrics = json::object();
        auto collect = [&](const char* name, auto get) {
            std::vector<double> v;
            for (const ResultRecord* r : rs)
                if (auto x = get(*r)) v.push_back(*x);
            if (!v.empty()) metrics[name] = band(std::move(v));
        };
        collect("plan_deviation", [](const ResultRecord& r) { return r.plan_deviation; });
        collect("knn_accuracy", [](const ResultRecord& r) { return r.knn_accuracy; });
        collect("transport_rank", [](const ResultRecord& r) {
            return r.transport_rank ? std::optional<double>(*r.transport_rank) : std::nullopt;
        });
        collect("latent_discrepancy", [](const ResultRecord& r) { return r.latent_discrepancy; });
        collect("purity", [](const ResultRecord& r) { return r.purity; });
        collect("extra", [](const ResultRecord& r) { return r.extra; });
        int conv = 0;
        for (const ResultRecord* r : rs) conv += r->converged ? 1 : 0;
        out.push_back(json{{"method", key.first},
                           {"sweep_value", key.second},
                           {"runs", rs.size()},
                           {"converged_runs", conv},
                           {"metrics", metrics}});
    }
    return out;
}

void sort_canonical(std::vector<ResultRecord>& recs) {
    std::stable_sort(recs.begin(), recs.end(), [](const ResultRecord& a, const ResultRecord& b) {
        if (a.method != b.method) return a.method < b.method;
        if (a.sweep_value != b.sweep_value) return a.sweep_value < b.sweep_value;
        return a.seed < b.seed;
    });
}

void lot_from_json(const json& j, LotConfig& c) {
    if (j.contains("kx")) c.kx = j["kx"].get<int>();
    if (j.contains("ky")) c.ky = j["ky"].get<int>();
    if (j.contains("epsilon")) {
        c.set_epsilon(j["epsilon"].get<double>());
        c.solver.epsilon = c.eps_x;
    }
    if (j.contains("epsilon_z")) c.eps_z = j["epsilon_z"].get<double>();
    if (j.contains("epsilon_y")) c.eps_y = j["epsilon_y"].get<double>();
    if (j.contains("mz_scale")) c.mz.scale = j["mz_scale"].get<double>();
    if (j.contains("lambda")) c.fc_lambda = j["lambda"].get<double>();
    if (j.contains("tau1")) c.tau1 = j["tau1"].get<double>();
    if (j.contains("tau2")) c.tau2 = j["tau2"].get<double>();
    if (j.contains("theta")) c.theta = j["theta"].get<double>();
    if (j.contains("inner_epsilon")) c.inner_epsilon = j["inner_epsilon"].get<double>();
    if (j.contains("max_iter")) c.solver.max_iter = j["max_iter"].get<int>();
    if (j.contains("tol")) c.solver.tol = j["tol"].get<double>();
    if (j.contains("outer_max_iter")) c.outer_max_iter = j["outer_max_iter"].get<int>();
    if (j.contains("outer_tol")) c.outer_tol = j["outer_tol"].get<double>();
}

std::vector<double> default_values(const std::string& experiment, const std::string& sweep) {
    if (experiment == "sampling") return {50, 100, 200, 400, 800};
    if (experiment == "cluster_correlation") return {0, 1};
    if (experiment != "gmm_sweep") return {0};
    if (sweep == "rotation") return {0, 30, 60, 90};
    if (sweep == "outlier_rate") return {0, 0.1, 0.2, 0.3};
    if (sweep == "dimension") return {30, 60, 120};
    if (sweep == "mismatch") return {2, 4, 6, 8, 10};
    if (sweep == "rank") return {2, 4, 8, 16};
    return {};
}

}  // namespace

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double f = pos - static_cast<double>(lo);
    return v[lo] + f * (v[hi] - v[lo]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs at least two pairs");
    Matrix A(static_cast<Eigen::Index>(x.size()), 2);
    Vector b(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("slope fit needs positive values");
        A(static_cast<Eigen::Index>(i), 0) = std::log(x[i]);
        A(static_cast<Eigen::Index>(i), 1) = 1.0;
        b(static_cast<Eigen::Index>(i)) = std::log(y[i]);
    }
    Vector coef = A.colPivHouseholderQr().solve(b);
    return coef(0);
}

void ExperimentConfig::validate() const {
    static const std::set<std::string> names{"gmm_sweep", "hypercube", "annulus", "sampling", "cluster_correlation"};
    static const std::set<std::string> known{"OT", "LOT_L2", "LOT_WA", "FC_LIMIT", "UNBALANCED"};
    if (!names.count(experiment)) throw std::invalid_argument("unknown experiment: " + experiment);
    if (repetitions < 1) throw std::invalid_argument("repetitions must be at least 1");
    if (methods.empty()) throw std::invalid_argument("at least one method is required");
    for (const auto& m : methods)
        if (!known.count(m)) throw std::invalid_argument("unknown method: " + m);
    if (values.empty()) throw std::invalid_argument("empty sweep grid");
    parse_transport_mode(map);
}

ExperimentConfig experiment_from_json(const json& j) {
    ExperimentConfig c;
    if (j.contains("experiment")) c.experiment = j["experiment"].get<std::string>();
    if (j.contains("sweep")) c.sweep = j["sweep"].get<std::string>();
    if (j.contains("repetitions")) c.repetitions = j["repetitions"].get<int>();
    if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("map")) c.map = j["map"].get<std::string>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output")) c.output = j["output"].get<std::string>();
    if (j.contains("jobs")) c.jobs = j["jobs"].get<int>();
    if (c.experiment == "gmm_sweep" && c.sweep == "mismatch") c.data.components = 10;
    if (c.experiment == "cluster_correlation") c.data.components = 5;
    if (c.experiment == "hypercube") c.lot.set_epsilon(1.0);
    if (c.experiment == "annulus") {
        c.lot.kx = c.lot.ky = 15;
        c.lot.set_epsilon(1.0);
    }
    if (c.experiment == "hypercube" || c.experiment == "annulus") c.methods = {"LOT_L2", "OT"};
    if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("data")) {
        const json& d = j["data"];
        if (d.contains("components")) c.data.components = d["components"].get<int>();
        if (d.contains("dimension")) c.data.ambient_dim = d["dimension"].get<int>();
        if (d.contains("signal_dim")) c.data.signal_dim = d["signal_dim"].get<int>();
        if (d.contains("points_per_component")) c.data.points_per_component = d["points_per_component"].get<int>();
        if (d.contains("n")) c.data.benchmark_n = d["n"].get<int>();
        if (d.contains("sampling_pool")) c.data.sampling_pool = d["sampling_pool"].get<int>();
    }
    if (j.contains("lot")) lot_from_json(j["lot"], c.lot);
    c.lot.solver.epsilon = c.lot.eps_x;
    c.values = j.contains("values") ? j["values"].get<std::vector<double>>() : default_values(c.experiment, c.sweep);
    return c;
}

json experiment_to_json(const ExperimentConfig& c) {
    return json{{"experiment", c.experiment},
                {"sweep", c.sweep},
                {"values", c.values},
                {"repetitions", c.repetitions},
                {"methods", c.methods},
                {"map", c.map},
                {"seed", c.seed},
                {"data",
                 {{"components", c.data.components},
                  {"dimension", c.data.ambient_dim},
                  {"signal_dim", c.data.signal_dim},
                  {"points_per_component", c.data.points_per_component},
                  {"n", c.data.benchmark_n},
                  {"sampling_pool", c.data.sampling_pool}}},
                {"lot",
                 {{"kx", c.lot.kx},
                  {"ky", c.lot.ky},
                  {"epsilon", c.lot.eps_x},
                  {"epsilon_z", c.lot.eps_z},
                  {"epsilon_y", c.lot.eps_y},
                  {"mz_scale", c.lot.mz.scale},
                  {"lambda", c.lot.fc_lambda},
                  {"tau1", c.lot.tau1},
                  {"tau2", c.lot.tau2},
                  {"theta", c.lot.theta},
                  {"max_iter", c.lot.solver.max_iter},
                  {"tol", c.lot.solver.tol},
                  {"outer_max_iter", c.lot.outer_max_iter},
                  {"outer_tol", c.lot.outer_tol}}}};
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const TransportMode mode = parse_transport_mode(cfg.map);
    const int jobs = effective_jobs(cfg.jobs);
    ExperimentOutput out;
    out.summary["config"] = experiment_to_json(cfg);

    struct Task {
        double value;
        int rep;
    };
    std::vector<Task> tasks;
    for (double v : cfg.values)
        for (int r = 0; r < cfg.repetitions; ++r) tasks.push_back(Task{v, r});
    std::vector<Cell> cells(tasks.size());

    if (cfg.experiment == "gmm_sweep") {
        parallel_for(tasks.size(), jobs, [&](std::size_t i) { cells[i] = gmm_cell(cfg, tasks[i].value, tasks[i].rep, mode); });
    } else if (cfg.experiment == "hypercube" || cfg.experiment == "annulus") {
        const BenchmarkKind kind = cfg.experiment == "hypercube" ? BenchmarkKind::Hypercube : BenchmarkKind::Annulus;
        parallel_for(tasks.size(), jobs,
                     [&](std::size_t i) { cells[i] = benchmark_cell(cfg, kind, tasks[i].rep, mode); });
    } else if (cfg.experiment == "sampling") {
        SamplingPool pool = sampling_pool(cfg);
        parallel_for(tasks.size(), jobs,
                     [&](std::size_t i) { cells[i] = sampling_cell(cfg, pool, tasks[i].value, tasks[i].rep); });
        std::map<double, std::vector<double>> by_n;
        for (const Cell& c : cells)
            for (const ResultRecord& r : c) by_n[r.sweep_value].push_back(*r.extra);
        std::vector<double> xs, ys;
        json pairs = json::array();
        for (const auto& [n, ds] : by_n) {
            const double mean = std::accumulate(ds.begin(), ds.end(), 0.0) / static_cast<double>(ds.size());
            xs.push_back(n);
            ys.push_back(mean);
            pairs.push_back(json::array({n, mean}));
        }
        out.summary["sampling"] = {{"full_objective", pool.full}, {"pairs", pairs}};
        out.summary["sampling"]["slope"] = xs.size() >= 2 ? json(loglog_slope(xs, ys)) : json(nullptr);
    } else {
        std::vector<CorrelationCell> cc(tasks.size());
        parallel_for(tasks.size(), jobs,
                     [&](std::size_t i) { cc[i] = correlation_cell(cfg, tasks[i].value, tasks[i].rep, mode); });
        json regimes = json::array();
        for (double v : cfg.values) {
            std::map<std::string, Matrix> blocks;
            Matrix corr;
            int count = 0;
            for (std::size_t i = 0; i < tasks.size(); ++i) {
                if (tasks[i].value != v) continue;
                for (const auto& [m, B] : cc[i].blocks) {
                    auto it = blocks.find(m);
                    if (it == blocks.end()) blocks.emplace(m, B);
                    else it->second += B;
                }
                corr = count == 0 ? cc[i].correlation : Matrix(corr + cc[i].correlation);
                ++count;
            }
            json bj = json::object();
            for (auto& [m, B] : blocks) bj[m] = matrix_json(B / static_cast<double>(count));
            regimes.push_back(json{{"sweep_value", v}, {"plan_blocks", bj}, {"correlation", matrix_json(corr / count)}});
        }
        out.summary["cluster_correlation"] = regimes;
        for (std::size_t i = 0; i < tasks.size(); ++i) cells[i] = std::move(cc[i].records);
    }

    for (Cell& c : cells)
        for (ResultRecord& r : c) out.records.push_back(std::move(r));
    sort_canonical(out.records);
    out.summary["groups"] = summarize(out.records);
    out.summary["records"] = out.records.size();
    return out;
}

std::string records_csv(const std::vector<ResultRecord>& recs, const std::string& sweep) {
    std::ostringstream o;
    o << "method,sweep_param,sweep_value,seed,plan_deviation,knn_accuracy,transport_rank,latent_discrepancy,purity,"
         "extra,converged,outer_iterations,plan_iterations\n";
    for (const auto& r : recs) {
        o << r.method << "," << sweep << "," << format_double(r.sweep_value) << "," << r.seed << ","
          << opt_field(r.plan_deviation) << "," << opt_field(r.knn_accuracy) << ","
          << (r.transport_rank ? std::to_string(*r.transport_rank) : "") << "," << opt_field(r.latent_discrepancy)
          << "," << opt_field(r.purity) << "," << opt_field(r.extra) << "," << (r.converged ? 1 : 0) << ","
          << r.outer_iterations << "," << r.plan_iterations << "\n";
    }
    return o.str();
}

std::string timing_csv(const std::vector<ResultRecord>& recs) {
    std::ostringstream o;
    o << "method,sweep_value,seed,wall_seconds\n";
    for (const auto& r : recs)
        o << r.method << "," << format_double(r.sweep_value) << "," << r.seed << "," << format_double(r.wall_seconds)
          << "\n";
    return o.str();
}

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream o(path, std::ios::binary);
    if (!o) throw std::runtime_error("cannot write " + path);
    o << text;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument("invalid number in list: " + tok);
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> parse_names(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Latent optimal transport solver and experiment harness"};
    app.require_subcommand(1);

    SolveArgs sa;
    CLI::App* solve_cmd = app.add_subcommand("solve", "Solve a latent transport problem between two CSV clouds");
    solve_cmd->add_option("--source", sa.source, "Source CSV")->required();
    solve_cmd->add_option("--target", sa.target, "Target CSV")->required();
    solve_cmd->add_option("--kx", sa.kx, "Source anchors");
    solve_cmd->add_option("--ky", sa.ky, "Target anchors");
    solve_cmd->add_option("--epsilon", sa.epsilon, "Entropic regularization");
    solve_cmd->add_option("--epsilon-z", sa.eps_z, "Anchor-to-anchor regularization");
    solve_cmd->add_option("--epsilon-y", sa.eps_y, "Target-side regularization");
    solve_cmd->add_option("--variant", sa.variant, "l2|wa|unbalanced|transform|fc")
        ->check(CLI::IsMember({"l2", "wa", "unbalanced", "transform", "fc"}));
    solve_cmd->add_option("--lambda", sa.lambda, "Anchor metric scale (fc: limit scale, default 1e4)");
    solve_cmd->add_option("--tau1", sa.tau1, "Source marginal relaxation");
    solve_cmd->add_option("--tau2", sa.tau2, "Target marginal relaxation");
    solve_cmd->add_option("--theta", sa.theta, "Anchor pair threshold for wa");
    solve_cmd->add_option("--max-iter", sa.max_iter, "Plan iterations cap");
    solve_cmd->add_option("--tol", sa.tol, "Marginal violation tolerance");
    solve_cmd->add_option("--outer-max-iter", sa.outer_max_iter, "Alternation cap");
    solve_cmd->add_option("--outer-tol", sa.outer_tol, "Relative objective change tolerance");
    solve_cmd->add_option("--seed", sa.seed, "Seed");
    solve_cmd->add_option("--map", sa.map, "displacement|barycentric")->check(CLI::IsMember({"displacement", "barycentric"}));
    solve_cmd->add_flag("--cold-start", sa.cold_start, "Reset scalings at every plan update");
    solve_cmd->add_option("--out", sa.out, "Output JSON path")->required();

    std::string exp_config, exp_name, exp_sweep, exp_values, exp_methods, exp_out, exp_map;
    std::optional<int> exp_reps, exp_jobs, exp_kx, exp_ky;
    std::optional<double> exp_eps;
    std::optional<std::uint64_t> exp_seed;
    CLI::App* exp_cmd = app.add_subcommand("experiment", "Run a seeded experiment grid");
    exp_cmd->add_option("--config", exp_config, "JSON experiment configuration");
    exp_cmd->add_option("--name", exp_name, "gmm_sweep|hypercube|annulus|sampling|cluster_correlation");
    exp_cmd->add_option("--sweep", exp_sweep, "rotation|outlier_rate|dimension|mismatch|rank");
    exp_cmd->add_option("--values", exp_values, "Comma-separated sweep grid");
    exp_cmd->add_option("--reps", exp_reps, "Repetitions per grid value");
    exp_cmd->add_option("--methods", exp_methods, "Comma-separated subset of OT,LOT_L2,LOT_WA,FC_LIMIT,UNBALANCED");
    exp_cmd->add_option("--kx", exp_kx, "Source anchors");
    exp_cmd->add_option("--ky", exp_ky, "Target anchors");
    exp_cmd->add_option("--epsilon", exp_eps, "Entropic regularization");
    exp_cmd->add_option("--seed", exp_seed, "Base seed");
    exp_cmd->add_option("--map", exp_map, "displacement|barycentric");
    exp_cmd->add_option("--jobs", exp_jobs, "Concurrent grid cells (LOT_JOBS overrides)");
    exp_cmd->add_option("--out", exp_out, "Output prefix")->required();

    TuneArgs ta;
    CLI::App* tune_cmd = app.add_subcommand("tune-epsilon", "Smallest converging epsilon by geometric bisection");
    tune_cmd->add_option("--source", ta.source, "Source CSV")->required();
    tune_cmd->add_option("--target", ta.target, "Target CSV")->required();
    tune_cmd->add_option("--kx", ta.kx, "Source anchors");
    tune_cmd->add_option("--ky", ta.ky, "Target anchors");
    tune_cmd->add_option("--lo", ta.lo, "Lower bracket");
    tune_cmd->add_option("--hi", ta.hi, "Upper bracket");
    tune_cmd->add_option("--trials", ta.trials, "Maximum solves");
    tune_cmd->add_option("--max-iter", ta.max_iter, "Plan iterations cap");
    tune_cmd->add_option("--tol", ta.tol, "Marginal violation tolerance");
    tune_cmd->add_option("--outer-max-iter", ta.outer_max_iter, "Alternation cap");
    tune_cmd->add_option("--seed", ta.seed, "Seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 1;
    }

    try {
        if (*solve_cmd) return cmd_solve(sa);
        if (*tune_cmd) return cmd_tune(ta);
        json j = json::object();
        if (!exp_config.empty()) {
            std::ifstream in(exp_config);
            if (!in) throw std::invalid_argument("cannot open " + exp_config);
            in >> j;
        }
        if (!exp_name.empty()) j["experiment"] = exp_name;
        if (!exp_sweep.empty()) j["sweep"] = exp_sweep;
        if (!exp_values.empty()) j["values"] = parse_list(exp_values);
        if (exp_reps) j["repetitions"] = *exp_reps;
        if (!exp_methods.empty()) j["methods"] = parse_names(exp_methods);
        if (!exp_map.empty()) j["map"] = exp_map;
        if (exp_seed) j["seed"] = *exp_seed;
        if (exp_jobs) j["jobs"] = *exp_jobs;
        if (exp_kx) j["lot"]["kx"] = *exp_kx;
        if (exp_ky) j["lot"]["ky"] = *exp_ky;
        if (exp_eps) j["lot"]["epsilon"] = *exp_eps;
        ExperimentConfig cfg = experiment_from_json(j);
        cfg.output = exp_out;
        ExperimentOutput res = run_experiment(cfg);
        write_text(exp_out + ".csv", records_csv(res.records, cfg.experiment == "gmm_sweep" ? cfg.sweep : cfg.experiment));
        write_text(exp_out + ".summary.json", res.summary.dump(2) + "\n");
        write_text(exp_out + ".timing.csv", timing_csv(res.records));
        return 0;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> copy = args;
    copy.insert(copy.begin(), "lot");
    std::vector<char*> argv;
    for (auto& s : copy) argv.push_back(s.data());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace lot::cli
