#include "qostopics/project.hpp"

#include <Eigen/Eigenvalues>

#include <atomic>
#include <cmath>
#include <numeric>

namespace qos {

namespace {

double sq_distance(const Eigen::MatrixXd& x, Eigen::Index i, Eigen::Index j) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double d = x(i, c) - x(j, c);
        s += d * d;
    }
    return s;
}

// Other points ordered by (distance, index).
std::vector<Eigen::Index> ranked_neighbors(const Eigen::MatrixXd& x, Eigen::Index i, std::vector<double>& dist) {
    const Eigen::Index n = x.rows();
    dist.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<Eigen::Index> order;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        dist[j] = sq_distance(x, i, j);
        order.push_back(j);
    }
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return dist[a] != dist[b] ? dist[a] < dist[b] : a < b;
    });
    return order;
}

double solve_sigma(const std::vector<double>& d, double rho, double target) {
    // The sum rises from the number of zero-offset neighbors to k as sigma grows.
    double floor_count = 0.0, mean = 0.0;
    for (double v : d) {
        if (v - rho <= 0.0) floor_count += 1.0;
        mean += v;
    }
    mean /= static_cast<double>(d.size());
    if (floor_count >= target) return mean > 0.0 ? 1e-3 * mean : 1.0;
    double lo = 0.0, hi = 1.0;
    while (membership_sum(d, rho, hi) < target) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = membership_sum(d, rho, mid);
        if (std::abs(f - target) <= 1e-9) return mid;
        (f < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

template <bool Shared>
double load(double& x) {
    if constexpr (Shared)
        return std::atomic_ref<double>(x).load(std::memory_order_relaxed);
    else
        return x;
}

template <bool Shared>
void add(double& x, double v) {
    if constexpr (Shared)
        std::atomic_ref<double>(x).store(std::atomic_ref<double>(x).load(std::memory_order_relaxed) + v,
                                         std::memory_order_relaxed);
    else
        x += v;
}

double clip(double v) { return std::clamp(v, -4.0, 4.0); }

struct Edges {
    std::vector<Eigen::Index> head, tail;
    std::vector<double> epochs_per_sample;
};

struct EdgeSchedule {
    std::vector<double> next_sample, next_negative;
};

template <bool Shared>
void optimize_edges(double* y, const Edges& e, EdgeSchedule& s, std::size_t begin, std::size_t end, int epoch,
                    double alpha, double a, double b, int negative_rate, Eigen::Index n, Rng& rng) {
    for (std::size_t i = begin; i < end; ++i) {
        if (s.next_sample[i] > epoch) continue;
        double* yi = y + 2 * e.head[i];
        double* yj = y + 2 * e.tail[i];
        double dx = load<Shared>(yi[0]) - load<Shared>(yj[0]);
        double dy = load<Shared>(yi[1]) - load<Shared>(yj[1]);
        double d2 = dx * dx + dy * dy;
        if (d2 > 0.0) {
            const double coeff = -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0);
            const double gx = clip(coeff * dx) * alpha, gy = clip(coeff * dy) * alpha;
            add<Shared>(yi[0], gx);
            add<Shared>(yi[1], gy);
            add<Shared>(yj[0], -gx);
            add<Shared>(yj[1], -gy);
        }
        s.next_sample[i] += e.epochs_per_sample[i];

        const double per_negative = e.epochs_per_sample[i] / negative_rate;
        const int negatives = static_cast<int>((epoch - s.next_negative[i]) / per_negative);
        for (int p = 0; p < negatives; ++p) {
            const auto k = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
            if (k == e.head[i]) continue;
            double* yk = y + 2 * k;
            dx = load<Shared>(yi[0]) - load<Shared>(yk[0]);
            dy = load<Shared>(yi[1]) - load<Shared>(yk[1]);
            d2 = dx * dx + dy * dy;
            if (d2 > 0.0) {
                const double coeff = 2.0 * b / ((0.001 + d2) * (a * std::pow(d2, b) + 1.0));
                add<Shared>(yi[0], clip(coeff * dx) * alpha);
                add<Shared>(yi[1], clip(coeff * dy) * alpha);
            } else {
                add<Shared>(yi[0], 4.0 * alpha);
                add<Shared>(yi[1], 4.0 * alpha);
            }
        }
        s.next_negative[i] += negatives * per_negative;
    }
}

}  // namespace

std::string to_string(ProjectInit init) { return init == ProjectInit::pca ? "pca" : "random"; }

ProjectInit project_init_from_string(const std::string& s) {
    if (s == "pca") return ProjectInit::pca;
    if (s == "random") return ProjectInit::random;
    throw Error("unknown projection init '" + s + "'");
}

void validate(const ProjectConfig& cfg) {
    if (cfg.k_neighbors < 2) throw Error("k_neighbors must be >= 2");
    if (cfg.epochs < 1) throw Error("projection epochs must be >= 1");
    if (cfg.negative_rate < 1) throw Error("negative_rate must be >= 1");
    if (!(cfg.min_dist >= 0.0) || !(cfg.spread > 0.0) || !(cfg.min_dist < cfg.spread * 3.0))
        throw Error("min_dist must lie in [0, 3 * spread) with spread > 0");
    if (!(cfg.learning_rate > 0.0)) throw Error("projection learning_rate must be > 0");
}

double membership_sum(const std::vector<double>& distances, double rho, double sigma) {
    double s = 0.0;
    for (double d : distances) s += std::exp(-std::max(0.0, d - rho) / sigma);
    return s;
}

FuzzyGraph knn_fuzzy_graph(const Eigen::MatrixXd& vectors, int k, unsigned threads) {
    const Eigen::Index n = vectors.rows();
    if (k < 1) throw Error("k must be >= 1");
    if (n <= k) throw Error("k-NN graph needs more points (" + std::to_string(n) + ") than k (" + std::to_string(k) + ")");
    if (!vectors.allFinite()) throw Error("k-NN graph input has non-finite values");

    FuzzyGraph g;
    g.neighbors.resize(static_cast<std::size_t>(n));
    g.distances.resize(static_cast<std::size_t>(n));
    g.rho.resize(n);
    g.sigma.resize(n);
    const double target = std::log2(static_cast<double>(k));
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        std::vector<double> sq;
        const auto order = ranked_neighbors(vectors, static_cast<Eigen::Index>(i), sq);
        auto& nb = g.neighbors[i];
        auto& d = g.distances[i];
        for (int m = 0; m < k; ++m) {
            nb.push_back(static_cast<int>(order[m]));
            d.push_back(std::sqrt(sq[order[m]]));
        }
        g.rho[i] = d.front();
        g.sigma[i] = solve_sigma(d, d.front(), target);
    });

    std::vector<Eigen::Triplet<double>> trips;
    for (Eigen::Index i = 0; i < n; ++i)
        for (int m = 0; m < k; ++m) {
            const double w = std::exp(-std::max(0.0, g.distances[i][m] - g.rho[i]) / g.sigma[i]);
            if (w > 0.0) trips.emplace_back(i, g.neighbors[i][m], w);
        }
    Eigen::SparseMatrix<double> directed(n, n);
    directed.setFromTriplets(trips.begin(), trips.end());
    // a + b - ab, evaluated on the ordered pair (max, min) so that both
    // directions round identically and never exceed 1.
    std::vector<Eigen::Triplet<double>> sym;
    auto fuzzy_union = [](double a, double b) {
        const double hi = std::max(a, b), lo = std::min(a, b);
        return hi + lo * (1.0 - hi);
    };
    for (const auto& t : trips) {
        const double back = directed.coeff(t.col(), t.row());
        sym.emplace_back(t.row(), t.col(), fuzzy_union(t.value(), back));
        if (back == 0.0) sym.emplace_back(t.col(), t.row(), t.value());
    }
    g.weights.resize(n, n);
    g.weights.setFromTriplets(sym.begin(), sym.end());
    return g;
}

std::pair<double, double> fit_ab(double min_dist, double spread) {
    const int m = 300;
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(m, 0.0, 3.0 * spread);
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) y[i] = x[i] < min_dist ? 1.0 : std::exp(-(x[i] - min_dist) / spread);

    auto residual = [&](double a, double b, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        r.resize(m);
        if (jac) jac->resize(m, 2);
        for (int i = 0; i < m; ++i) {
            const double p = x[i] > 0.0 ? std::pow(x[i], 2.0 * b) : 0.0;
            const double den = 1.0 + a * p;
            r[i] = 1.0 / den - y[i];
            if (jac) {
                (*jac)(i, 0) = -p / (den * den);
                (*jac)(i, 1) = x[i] > 0.0 ? -a * p * 2.0 * std::log(x[i]) / (den * den) : 0.0;
            }
        }
        return r.squaredNorm();
    };

    // Levenberg-Marquardt from (1, 1).
    double a = 1.0, b = 1.0, lambda = 1e-3;
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    double cost = residual(a, b, r, &jac);
    for (int it = 0; it < 500; ++it) {
        const Eigen::Matrix2d jtj = jac.transpose() * jac;
        const Eigen::Vector2d jtr = jac.transpose() * r;
        Eigen::Matrix2d lhs = jtj;
        lhs.diagonal() += lambda * jtj.diagonal();
        const Eigen::Vector2d step = lhs.ldlt().solve(-jtr);
        Eigen::VectorXd r_new;
        const double a_new = a + step[0], b_new = b + step[1];
        const double cost_new = a_new > 0.0 && b_new > 0.0 ? residual(a_new, b_new, r_new, nullptr) : INFINITY;
        if (cost_new < cost) {
            const bool done = cost - cost_new <= 1e-15 * std::max(1.0, cost);
            a = a_new;
            b = b_new;
            cost = residual(a, b, r, &jac);
            lambda = std::max(lambda / 10.0, 1e-12);
            if (done) break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }
    return {a, b};
}

Eigen::MatrixXd initial_layout(const Eigen::MatrixXd& vectors, const ProjectConfig& cfg) {
    const Eigen::Index n = vectors.rows();
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, 2);
    if (cfg.init == ProjectInit::random) {
        Rng rng(derive_seed(cfg.seed, "project-init"));
        for (Eigen::Index i = 0; i < n; ++i)
            for (int c = 0; c < 2; ++c) y(i, c) = 20.0 * uniform01(rng) - 10.0;
        return y;
    }
    const Eigen::MatrixXd centred = vectors.rowwise() - vectors.colwise().mean();
    const Eigen::MatrixXd cov = centred.transpose() * centred;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::Index dims = cov.rows();
    for (int c = 0; c < 2 && c < dims; ++c) {
        Eigen::VectorXd axis = eig.eigenvectors().col(dims - 1 - c);
        // Fix the eigenvector sign by its largest component.
        Eigen::Index at = 0;
        axis.cwiseAbs().maxCoeff(&at);
        if (axis[at] < 0) axis = -axis;
        y.col(c) = centred * axis;
    }
    const double extent = y.cwiseAbs().maxCoeff();
    if (extent > 0.0) y *= 10.0 / extent;
    // Coincident starting points would never separate; nudge them apart.
    Rng rng(derive_seed(cfg.seed, "project-jitter"));
    for (Eigen::Index i = 0; i < n; ++i)
        for (int c = 0; c < 2; ++c) y(i, c) += 1e-4 * (uniform01(rng) - 0.5);
    return y;
}

Projection2D layout2d(const FuzzyGraph& graph, const Eigen::MatrixXd& vectors, const ProjectConfig& cfg) {
    validate(cfg);
    const Eigen::Index n = graph.size();
    if (vectors.rows() != n) throw Error("layout input rows do not match the graph");
    Projection2D out;
    out.config = cfg;
    Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> y = initial_layout(vectors, cfg);

    Edges e;
    double max_w = 0.0;
    for (int c = 0; c < graph.weights.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(graph.weights, c); it; ++it) max_w = std::max(max_w, it.value());
    for (int c = 0; c < graph.weights.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(graph.weights, c); it; ++it) {
            if (it.value() < max_w / cfg.epochs) continue;
            e.head.push_back(it.row());
            e.tail.push_back(it.col());
            e.epochs_per_sample.push_back(max_w / it.value());
        }

    const auto [a, b] = fit_ab(cfg.min_dist, cfg.spread);
    EdgeSchedule s{e.epochs_per_sample, {}};
    for (double eps : e.epochs_per_sample) s.next_negative.push_back(eps / cfg.negative_rate);

    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(std::max<std::size_t>(e.head.size(), 1))));
    std::vector<Rng> rngs;
    for (unsigned w = 0; w < workers; ++w) rngs.emplace_back(derive_seed(cfg.seed, "project-layout-" + std::to_string(w)));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double alpha = cfg.learning_rate * (1.0 - static_cast<double>(epoch) / cfg.epochs);
        parallel_for(workers, workers, [&](std::size_t w) {
            const std::size_t begin = e.head.size() * w / workers, end = e.head.size() * (w + 1) / workers;
            if (workers == 1)
                optimize_edges<false>(y.data(), e, s, begin, end, epoch, alpha, a, b, cfg.negative_rate, n, rngs[w]);
            else
                optimize_edges<true>(y.data(), e, s, begin, end, epoch, alpha, a, b, cfg.negative_rate, n, rngs[w]);
        });
    }
    if (!y.allFinite()) throw Error("projection layout produced non-finite coordinates");
    out.points = y;
    return out;
}

Projection2D project(const Eigen::MatrixXd& vectors, const ProjectConfig& cfg) {
    validate(cfg);
    const auto graph = knn_fuzzy_graph(vectors, cfg.k_neighbors, cfg.threads);
    auto out = layout2d(graph, vectors, cfg);
    out.trustworthiness = trustworthiness(vectors, out.points, cfg.k_neighbors);
    return out;
}

double trustworthiness(const Eigen::MatrixXd& high, const Eigen::MatrixXd& low, int k) {
    const Eigen::Index n = high.rows();
    if (low.rows() != n) throw Error("trustworthiness inputs have different row counts");
    if (k < 1 || n <= k) throw Error("trustworthiness needs 1 <= k < number of points");
    double penalty = 0.0;
    std::vector<double> dist;
    std::vector<Eigen::Index> rank(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto high_order = ranked_neighbors(high, i, dist);
        for (std::size_t r = 0; r < high_order.size(); ++r) rank[high_order[r]] = static_cast<Eigen::Index>(r) + 1;
        const auto low_order = ranked_neighbors(low, i, dist);
        for (int m = 0; m < k; ++m) penalty += static_cast<double>(std::max<Eigen::Index>(0, rank[low_order[m]] - k));
    }
    const double nd = static_cast<double>(n), kd = static_cast<double>(k);
    if (n >= 2 * k + 1) return 1.0 - 2.0 / (nd * kd * (2.0 * nd - 3.0 * kd - 1.0)) * penalty;
    // For large k the usual normaliser is no longer the worst case; use the
    // penalty of every neighborhood holding the k farthest points instead.
    double worst = 0.0;
    for (Eigen::Index r = n - k; r <= n - 1; ++r) worst += static_cast<double>(std::max<Eigen::Index>(0, r - k));
    worst *= nd;
    if (worst == 0.0) return 1.0;
    return 1.0 - penalty / worst;
}

}  // namespace qos
