#ifndef QOSTOPICS_TESTS_ORACLES_HPP
#define QOSTOPICS_TESTS_ORACLES_HPP

#include "qostopics/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace qos::oracle {

// "sofa" and "couch" sit between the same filler words; "radio" only ever
// sits between a disjoint set of fillers.
inline std::vector<std::vector<std::string>> distributional_corpus(int docs, std::uint64_t seed) {
    const std::vector<std::string> home = {"red", "blue", "green", "gray", "pink", "teal"};
    const std::vector<std::string> noise = {"loud", "quiet", "music", "static", "volume", "tuner"};
    const std::vector<std::string> centre = {"sofa", "couch", "radio"};
    Rng rng(seed);
    std::vector<std::vector<std::string>> out;
    for (int d = 0; d < docs; ++d) {
        const auto& target = centre[static_cast<std::size_t>(d % 3)];
        const auto& fill = d % 3 == 2 ? noise : home;
        std::vector<std::string> doc;
        for (int i = 0; i < 5; ++i) doc.push_back(i == 2 ? target : fill[uniform_index(rng, fill.size())]);
        out.push_back(std::move(doc));
    }
    return out;
}

// Two isotropic Gaussian clouds with means `separation` apart along every axis.
inline Eigen::MatrixXd two_clusters(int per_cluster, int dims, double separation, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd x(2 * per_cluster, dims);
    for (int i = 0; i < 2 * per_cluster; ++i)
        for (int c = 0; c < dims; ++c) x(i, c) = normal(rng) + (i < per_cluster ? 0.0 : separation);
    return x;
}

// Mean silhouette of labelled points under Euclidean distance.
inline double silhouette(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
    const int n = static_cast<int>(x.rows());
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> sum(2, 0.0), count(2, 0.0);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            sum[labels[j]] += (x.row(i) - x.row(j)).norm();
            count[labels[j]] += 1.0;
        }
        const double a = sum[labels[i]] / count[labels[i]];
        const double b = sum[1 - labels[i]] / count[1 - labels[i]];
        total += (b - a) / std::max(a, b);
    }
    return total / n;
}

// Trustworthiness straight from its definition: for every point, each
// low-dimensional neighbor outside the high-dimensional k-neighborhood costs
// its high-dimensional rank minus k.
inline double trustworthiness_brute(const Eigen::MatrixXd& high, const Eigen::MatrixXd& low, int k) {
    const int n = static_cast<int>(high.rows());
    auto dist = [](const Eigen::MatrixXd& x, int i, int j) {
        double s = 0.0;
        for (Eigen::Index c = 0; c < x.cols(); ++c) s += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
        return s;
    };
    // Rank of j among i's neighbors: 1 + points strictly closer (index breaks ties).
    auto rank = [&](const Eigen::MatrixXd& x, int i, int j) {
        int r = 1;
        const double dij = dist(x, i, j);
        for (int m = 0; m < n; ++m) {
            if (m == i || m == j) continue;
            const double dim = dist(x, i, m);
            if (dim < dij || (dim == dij && m < j)) ++r;
        }
        return r;
    };
    double penalty = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (j == i || rank(low, i, j) > k) continue;
            const int r = rank(high, i, j);
            if (r > k) penalty += r - k;
        }
    const double nd = n, kd = k;
    return 1.0 - 2.0 / (nd * kd * (2.0 * nd - 3.0 * kd - 1.0)) * penalty;
}

// Enumerates every window explicitly as a set of tokens.
inline std::vector<std::set<std::string>> brute_windows(const std::vector<std::vector<std::string>>& docs, int s) {
    std::vector<std::set<std::string>> windows;
    for (const auto& doc : docs) {
        if (doc.empty()) continue;
        const auto width = std::min<std::size_t>(doc.size(), static_cast<std::size_t>(s));
        for (std::size_t start = 0; start + width <= doc.size(); ++start)
            windows.emplace_back(doc.begin() + static_cast<std::ptrdiff_t>(start),
                                 doc.begin() + static_cast<std::ptrdiff_t>(start + width));
    }
    return windows;
}

inline double brute_prob(const std::vector<std::set<std::string>>& windows, const std::string& a, const std::string& b) {
    long hits = 0;
    for (const auto& w : windows) hits += w.count(a) && w.count(b);
    return static_cast<double>(hits) / static_cast<double>(windows.size());
}

inline double brute_npmi(const std::vector<std::set<std::string>>& windows, const std::string& a, const std::string& b,
                  double eps) {
    const double pij = brute_prob(windows, a, b) + eps;
    if (std::log(pij) >= 0.0) return 1.0;
    return -std::log(pij / (brute_prob(windows, a, a) * brute_prob(windows, b, b))) / std::log(pij);
}

inline double brute_coherence(const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& w, int s, double eps, bool powerset) {
    const auto windows = brute_windows(docs, s);
    const auto n = w.size();
    auto v = [&](const std::vector<std::size_t>& subset) {
        std::vector<double> out(n, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            for (auto i : subset) out[j] += brute_npmi(windows, w[i], w[j], eps);
        return out;
    };
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    const auto whole = v(all);
    auto cos = [&](const std::vector<double>& a) {
        double dot = 0, na = 0, nb = 0;
        for (std::size_t j = 0; j < n; ++j) dot += a[j] * whole[j], na += a[j] * a[j], nb += whole[j] * whole[j];
        return dot / (std::sqrt(na) * std::sqrt(nb));
    };
    double sum = 0.0;
    int pairs = 0;
    if (powerset) {
        for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
            std::vector<std::size_t> subset;
            for (std::size_t i = 0; i < n; ++i)
                if (mask >> i & 1) subset.push_back(i);
            sum += cos(v(subset));
            ++pairs;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) sum += cos(v({i})), ++pairs;
    }
    return sum / pairs;
}

inline std::vector<std::vector<std::string>> random_docs(Rng& rng, int docs, int max_len, int alphabet) {
    std::vector<std::vector<std::string>> out;
    int total = 0;
    for (int d = 0; d < docs && total < 200; ++d) {
        std::vector<std::string> doc;
        const auto len = uniform_index(rng, static_cast<std::size_t>(max_len)) + 1;
        for (std::size_t i = 0; i < len && total < 200; ++i, ++total)
            doc.push_back(std::string(1, static_cast<char>('a' + uniform_index(rng, static_cast<std::size_t>(alphabet)))));
        out.push_back(std::move(doc));
    }
    return out;
}

// Pairwise Tukey-Kramer statistics of a grouping.
inline std::vector<double> pair_qs(const std::vector<std::vector<double>>& g) {
    double ssw = 0.0;
    std::size_t total = 0;
    std::vector<double> means;
    for (const auto& x : g) {
        const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
        for (double v : x) ssw += (v - m) * (v - m);
        means.push_back(m);
        total += x.size();
    }
    const double msw = ssw / (total - g.size());
    std::vector<double> qs;
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = i + 1; j < g.size(); ++j)
            qs.push_back(std::abs(means[i] - means[j]) / std::sqrt(msw * (1.0 / g[i].size() + 1.0 / g[j].size()) / 2.0));
    return qs;
}

// Significance of each pair against the permutation distribution of the max statistic.
inline std::vector<bool> permutation_decisions(const std::vector<std::vector<double>>& g, int permutations, double alpha, std::uint64_t seed) {
    const auto observed = pair_qs(g);
    std::vector<double> pooled;
    for (const auto& x : g) pooled.insert(pooled.end(), x.begin(), x.end());
    std::vector<int> exceed(observed.size(), 0);
    Rng rng(seed);
    for (int p = 0; p < permutations; ++p) {
        for (std::size_t i = pooled.size(); i > 1; --i) std::swap(pooled[i - 1], pooled[uniform_index(rng, i)]);
        std::vector<std::vector<double>> shuffled;
        std::size_t at = 0;
        for (const auto& x : g) {
            shuffled.emplace_back(pooled.begin() + at, pooled.begin() + at + x.size());
            at += x.size();
        }
        const auto qs = pair_qs(shuffled);
        const double top = *std::max_element(qs.begin(), qs.end());
        for (std::size_t i = 0; i < observed.size(); ++i) exceed[i] += top >= observed[i];
    }
    std::vector<bool> sig;
    for (int e : exceed) sig.push_back((1.0 + e) / (1.0 + permutations) < alpha);
    return sig;
}

}  // namespace qos::oracle

#endif  // QOSTOPICS_TESTS_ORACLES_HPP
