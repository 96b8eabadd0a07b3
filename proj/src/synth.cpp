#include "lot/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace lot {

namespace {

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> N(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = N(rng);
    return m;
}

Matrix orthonormal_frame(Eigen::Index d, Eigen::Index k, std::mt19937_64& rng) {
    Matrix g = gaussian(d, k, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    return qr.householderQ() * Matrix::Identity(d, k);
}

}  // namespace

GmmSample gen_gmm(const GmmSpec& spec) {
    if (spec.components < 1 || spec.ambient_dim < 1 || spec.signal_dim < 1 || spec.points_per_component < 1)
        throw std::invalid_argument("GMM sizes must be positive");
    if (spec.signal_dim > spec.ambient_dim) throw std::invalid_argument("signal dimension exceeds ambient dimension");
    if (spec.equal_spacing && spec.components > spec.signal_dim)
        throw std::invalid_argument("equal spacing requires components <= signal dimension");
    const int M = spec.components, d = spec.ambient_dim, k = spec.signal_dim, P = spec.points_per_component;
    std::mt19937_64 rng(spec.seed);

    Matrix frame = orthonormal_frame(d, k, rng);
    std::vector<Vector> means;
    std::vector<Matrix> factors;  // covariance = G G^T, Wishart(k, I)
    for (int c = 0; c < M; ++c) {
        Vector m = gaussian(k, 1, rng).col(0);
        if (spec.equal_spacing) m = std::sqrt(static_cast<double>(k)) * Vector::Unit(k, c);
        means.push_back(m);
        factors.push_back(gaussian(k, k, rng));
    }

    auto draw = [&](Matrix& pts, Labels& labels) {
        pts.resize(d, static_cast<Eigen::Index>(M) * P);
        labels.resize(static_cast<std::size_t>(M) * P);
        Eigen::Index col = 0;
        for (int c = 0; c < M; ++c)
            for (int p = 0; p < P; ++p, ++col) {
                Vector latent = means[c] + factors[c] * gaussian(k, 1, rng).col(0);
                pts.col(col) = frame * latent + gaussian(d, 1, rng).col(0);
                labels[static_cast<std::size_t>(col)] = c;
            }
    };

    GmmSample out;
    Matrix sp, tp;
    Labels sl, tl;
    draw(sp, sl);
    draw(tp, tl);
    out.source = PointCloud(std::move(sp), std::move(sl));
    out.target = PointCloud(std::move(tp), std::move(tl));
    out.means.resize(d, M);
    for (int c = 0; c < M; ++c) out.means.col(c) = frame * means[c];
    return out;
}

PerturbationSpec PerturbationSpec::rotation(double degrees) {
    PerturbationSpec s;
    s.kind = Kind::Rotation;
    s.angle_degrees = degrees;
    return s;
}

PerturbationSpec PerturbationSpec::outliers(double rate) {
    PerturbationSpec s;
    s.kind = Kind::Outliers;
    s.rate = rate;
    return s;
}

PerturbationSpec PerturbationSpec::dim_pad(int target_dim) {
    PerturbationSpec s;
    s.kind = Kind::DimPad;
    s.target_dim = target_dim;
    return s;
}

PerturbationSpec PerturbationSpec::mismatch(std::vector<int> labels) {
    PerturbationSpec s;
    s.kind = Kind::Mismatch;
    s.drop_labels = std::move(labels);
    return s;
}

Perturbed perturb(const PointCloud& cloud, const PerturbationSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Eigen::Index d = cloud.dim(), n = cloud.size();
    Perturbed out;
    out.kept.resize(static_cast<std::size_t>(n));
    std::iota(out.kept.begin(), out.kept.end(), 0);

    switch (spec.kind) {
        case PerturbationSpec::Kind::Rotation: {
            if (!(spec.angle_degrees >= 0.0 && spec.angle_degrees < 360.0))
                throw std::invalid_argument("rotation angle must lie in [0, 360)");
            if (d < 2) throw std::invalid_argument("rotation requires d >= 2");
            Matrix F = orthonormal_frame(d, 2, rng);
            const double t = spec.angle_degrees * M_PI / 180.0;
            Matrix G(2, 2);
            G << std::cos(t) - 1.0, -std::sin(t), std::sin(t), std::cos(t) - 1.0;
            // R = I + F (G2 - I) F^T
            Matrix pts = cloud.points + F * (G * (F.transpose() * cloud.points));
            out.cloud = PointCloud(std::move(pts), cloud.labels);
            return out;
        }
        case PerturbationSpec::Kind::Outliers: {
            if (!(spec.rate >= 0.0 && spec.rate <= 1.0)) throw std::invalid_argument("outlier rate must lie in [0, 1]");
            const auto count = static_cast<std::size_t>(std::ceil(spec.rate * static_cast<double>(n) - 1e-12));
            std::map<int, Vector> sums;
            std::map<int, double> counts;
            for (Eigen::Index i = 0; i < n; ++i) {
                int l = cloud.labels ? (*cloud.labels)[static_cast<std::size_t>(i)] : 0;
                auto it = sums.find(l);
                if (it == sums.end()) it = sums.emplace(l, Vector::Zero(d)).first;
                it->second += cloud.points.col(i);
                counts[l] += 1.0;
            }
            std::vector<int> order(static_cast<std::size_t>(n));
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            order.resize(std::min(count, order.size()));
            std::sort(order.begin(), order.end());
            Matrix pts = cloud.points;
            std::normal_distribution<double> N(0.0, 1.0);
            for (int i : order) {
                int l = cloud.labels ? (*cloud.labels)[static_cast<std::size_t>(i)] : 0;
                Vector mean = sums[l] / counts[l];
                const double sd = std::sqrt(0.5 * mean.squaredNorm());
                Vector g(d);
                for (Eigen::Index a = 0; a < d; ++a) g(a) = sd * N(rng);
                pts.col(i) = 0.5 * cloud.points.col(i) + 0.5 * g;
            }
            out.replaced = order;
            out.cloud = PointCloud(std::move(pts), cloud.labels);
            return out;
        }
        case PerturbationSpec::Kind::DimPad: {
            if (spec.target_dim < d) throw std::invalid_argument("padded dimension is smaller than the data dimension");
            Matrix pts(spec.target_dim, n);
            pts.topRows(d) = cloud.points;
            if (spec.target_dim > d) pts.bottomRows(spec.target_dim - d) = gaussian(spec.target_dim - d, n, rng);
            out.cloud = PointCloud(std::move(pts), cloud.labels);
            return out;
        }
        case PerturbationSpec::Kind::Mismatch: {
            if (!cloud.labels) throw std::invalid_argument("mismatch perturbation requires labels");
            std::set<int> drop(spec.drop_labels.begin(), spec.drop_labels.end());
            out.kept.clear();
            for (Eigen::Index i = 0; i < n; ++i)
                if (!drop.count((*cloud.labels)[static_cast<std::size_t>(i)])) out.kept.push_back(static_cast<int>(i));
            if (out.kept.empty()) throw std::invalid_argument("mismatch perturbation removed every point");
            Matrix pts(d, static_cast<Eigen::Index>(out.kept.size()));
            Labels labels;
            for (std::size_t a = 0; a < out.kept.size(); ++a) {
                pts.col(static_cast<Eigen::Index>(a)) = cloud.points.col(out.kept[a]);
                labels.push_back((*cloud.labels)[static_cast<std::size_t>(out.kept[a])]);
            }
            out.cloud = PointCloud(std::move(pts), std::move(labels));
            return out;
        }
    }
    throw std::invalid_argument("unknown perturbation");
}

Vector hypercube_map(const Vector& x) {
    Vector y = x;
    auto sgn = [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); };
    y(0) += 2.0 * sgn(x(0));
    y(1) += 2.0 * sgn(x(1));
    return y;
}

int hypercube_quadrant(const Vector& x) { return (x(0) > 0.0 ? 1 : 0) + (x(1) > 0.0 ? 2 : 0); }

std::pair<PointCloud, PointCloud> gen_benchmark(BenchmarkKind kind, int d, int n, std::uint64_t seed) {
    if (d < 2) throw std::invalid_argument("benchmark dimension must be at least 2");
    if (n < 1) throw std::invalid_argument("benchmark size must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Matrix src(d, n), tgt(d, n);
    if (kind == BenchmarkKind::Hypercube) {
        Labels ls(static_cast<std::size_t>(n)), lt(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            for (int a = 0; a < d; ++a) src(a, i) = 2.0 * U(rng) - 1.0;
            ls[static_cast<std::size_t>(i)] = hypercube_quadrant(src.col(i));
        }
        for (int i = 0; i < n; ++i) {
            Vector x(d);
            for (int a = 0; a < d; ++a) x(a) = 2.0 * U(rng) - 1.0;
            tgt.col(i) = hypercube_map(x);
            lt[static_cast<std::size_t>(i)] = hypercube_quadrant(x);
        }
        return {PointCloud(src, ls), PointCloud(tgt, lt)};
    }
    std::bernoulli_distribution B(0.5);
    auto fill = [&](Matrix& m, double r0, double r1) {
        for (int i = 0; i < n; ++i) {
            const double r = std::sqrt(r0 * r0 + U(rng) * (r1 * r1 - r0 * r0));
            const double a = 2.0 * M_PI * U(rng);
            m(0, i) = r * std::cos(a);
            m(1, i) = r * std::sin(a);
            for (int k = 2; k < d; ++k) m(k, i) = B(rng) ? 1.0 : 0.0;
        }
    };
    fill(src, 0.0, 1.0);
    fill(tgt, 2.0, 3.0);
    return {PointCloud(src), PointCloud(tgt)};
}

}  // namespace lot
