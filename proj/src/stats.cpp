#include "qostopics/stats.hpp"

#include "qostopics/lda.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace qos {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Estimate {
    double value, error;
};

template <typename F>
Estimate gk15(const F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double fc = f(c);
    double kronrod = fc * kWgk[7], gauss = fc * kWg[3];
    for (int i = 0; i < 7; ++i) {
        const double x = h * kXgk[i];
        const double sum = f(c - x) + f(c + x);
        kronrod += kWgk[i] * sum;
        if (i % 2 == 1) gauss += kWg[i / 2] * sum;
    }
    return {kronrod * h, std::abs((kronrod - gauss) * h)};
}

// Adaptive bisection until the summed error estimate is within tol.
template <typename F>
double integrate(const F& f, double a, double b, double tol, int max_intervals = 2000) {
    struct Piece {
        double a, b;
        Estimate e;
    };
    std::vector<Piece> pieces{{a, b, gk15(f, a, b)}};
    for (int n = 1;; ++n) {
        double total = 0.0, error = 0.0;
        std::size_t worst = 0;
        for (std::size_t i = 0; i < pieces.size(); ++i) {
            total += pieces[i].e.value;
            error += pieces[i].e.error;
            if (pieces[i].e.error > pieces[worst].e.error) worst = i;
        }
        if (error <= tol) return total;
        if (n >= max_intervals)
            throw Error("quadrature did not converge: error estimate " + std::to_string(error) + " above tolerance " +
                        std::to_string(tol));
        const Piece p = pieces[worst];
        const double mid = 0.5 * (p.a + p.b);
        pieces[worst] = {p.a, mid, gk15(f, p.a, mid)};
        pieces.push_back({mid, p.b, gk15(f, mid, p.b)});
    }
}

// P(range of k iid standard normals <= w).
double normal_range_cdf(double w, int k) {
    if (w <= 0.0) return 0.0;
    const auto f = [&](double z) {
        const double inner = normal_cdf(z + w) - normal_cdf(z);
        return normal_pdf(z) * std::pow(inner, k - 1);
    };
    const double v = k * integrate(f, -9.0, 9.0, 1e-10);
    return std::clamp(v, 0.0, 1.0);
}

// Continued fraction of the incomplete beta, modified Lentz.
double beta_fraction(double x, double a, double b) {
    constexpr double tiny = 1e-300, eps = 1e-15;
    double c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        c = 1.0 + num / c;
        if (std::abs(d) < tiny) d = tiny;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        c = 1.0 + num / c;
        if (std::abs(d) < tiny) d = tiny;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < eps) return h;
    }
    throw Error("incomplete beta continued fraction did not converge");
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

void validate(const AnalysisConfig& cfg) {
    if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) throw Error("threshold must lie in (0, 1)");
    if (!(cfg.alpha_sig > 0.0 && cfg.alpha_sig < 1.0)) throw Error("alpha_sig must lie in (0, 1)");
}

std::optional<int> representative(const Eigen::VectorXd& dist, double tau) {
    if (dist.size() == 0 || std::abs(dist.sum() - 1.0) > 1e-6 || (dist.array() < 0.0).any())
        throw Error("topic distribution is not normalised");
    Eigen::Index best = 0;
    const double top = dist.maxCoeff(&best);
    if (top > tau) return static_cast<int>(best);
    return std::nullopt;
}

double representative_share(const Eigen::MatrixXd& doc_topic, double tau) {
    if (doc_topic.rows() == 0) return 0.0;
    long hits = 0;
    for (Eigen::Index d = 0; d < doc_topic.rows(); ++d)
        if (representative(doc_topic.row(d).transpose(), tau)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(doc_topic.rows());
}

double representative_share(const LdaModel& model, double tau) { return representative_share(model.doc_topic, tau); }

TopicMagnitude topic_magnitude(const LdaModel& model, const std::vector<std::size_t>& hotel_reviews, int topic,
                               const std::string& hotel_id) {
    if (topic < 0 || topic >= model.num_topics()) throw Error("topic index out of range");
    TopicMagnitude m{topic, hotel_id, 0.0, static_cast<int>(hotel_reviews.size())};
    for (std::size_t r : hotel_reviews) m.magnitude += doc_topic_dist(model, r)[topic];
    return m;
}

std::vector<TopicMagnitude> hotel_magnitudes(const LdaModel& model, const std::vector<std::string>& hotel_of_review) {
    if (hotel_of_review.size() != model.num_docs()) throw Error("hotel labels do not align with the model's documents");
    std::map<std::string, std::vector<std::size_t>> by_hotel;
    for (std::size_t r = 0; r < hotel_of_review.size(); ++r) by_hotel[hotel_of_review[r]].push_back(r);
    std::vector<TopicMagnitude> out;
    for (const auto& [hotel, rows] : by_hotel)
        for (int t = 0; t < model.num_topics(); ++t) out.push_back(topic_magnitude(model, rows, t, hotel));
    return out;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw Error("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ScoreBox box_stats(std::vector<double> scores, int topic) {
    if (scores.empty()) throw Error("box statistics need at least one score");
    std::sort(scores.begin(), scores.end());
    ScoreBox b;
    b.topic = topic;
    b.n = static_cast<int>(scores.size());
    b.q1 = quantile_sorted(scores, 0.25);
    b.median = quantile_sorted(scores, 0.5);
    b.q3 = quantile_sorted(scores, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
    b.min = b.q1;
    b.max = b.q3;
    for (double s : scores) {
        if (s < lo_fence || s > hi_fence) {
            b.outliers.push_back(s);
            continue;
        }
        b.min = std::min(b.min, s);
        b.max = std::max(b.max, s);
    }
    return b;
}

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw Error("ANOVA needs at least two groups");
    std::size_t total = 0;
    for (const auto& g : groups) {
        if (g.empty()) throw Error("ANOVA groups must be non-empty");
        total += g.size();
    }
    if (total <= groups.size()) throw Error("ANOVA needs more observations than groups");

    // Centre on the grand mean first so large offsets do not cost precision.
    double grand = 0.0;
    for (const auto& g : groups) grand += std::accumulate(g.begin(), g.end(), 0.0);
    grand /= static_cast<double>(total);
    double ssb = 0.0, ssw = 0.0;
    for (const auto& g : groups) {
        double m = 0.0;
        for (double x : g) m += x - grand;
        m /= static_cast<double>(g.size());
        ssb += static_cast<double>(g.size()) * m * m;
        for (double x : g) ssw += (x - grand - m) * (x - grand - m);
    }
    AnovaResult r;
    r.df_between = static_cast<int>(groups.size()) - 1;
    r.df_within = static_cast<int>(total - groups.size());
    r.ms_within = ssw / r.df_within;
    const double msb = ssb / r.df_between;
    if (ssw == 0.0) {
        if (ssb == 0.0) throw Error("ANOVA undefined: no variance within or between groups");
        r.f = INFINITY;
        r.p_value = 0.0;
        return r;
    }
    r.f = msb / r.ms_within;
    r.p_value = f_sf(r.f, r.df_between, r.df_within);
    return r;
}

double tukey_q(double mean_i, double mean_j, std::size_t n_i, std::size_t n_j, double ms_within) {
    return std::abs(mean_i - mean_j) / std::sqrt(ms_within * (1.0 / static_cast<double>(n_i) + 1.0 / static_cast<double>(n_j)) / 2.0);
}

TukeyResult tukey_hsd(const std::vector<std::vector<double>>& groups, double alpha_sig) {
    const auto anova = anova_oneway(groups);
    if (!(anova.ms_within > 0.0)) throw Error("Tukey HSD undefined: zero within-group variance");
    const int k = static_cast<int>(groups.size());
    std::vector<double> means;
    for (const auto& g : groups) means.push_back(mean_of(g));
    TukeyResult r;
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
            TukeyPair p;
            p.i = i;
            p.j = j;
            p.mean_diff = means[j] - means[i];
            p.q = tukey_q(means[i], means[j], groups[i].size(), groups[j].size(), anova.ms_within);
            p.p_value = studentized_range_sf(p.q, k, anova.df_within);
            p.significant = p.p_value < alpha_sig;
            r.pairs.push_back(p);
        }
    return r;
}

double incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error("incomplete beta needs a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    // The fraction converges fast on the side of the mean.
    if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * beta_fraction(x, a, b) / a;
    return 1.0 - std::exp(log_front) * beta_fraction(1.0 - x, b, a) / b;
}

double f_sf(double f, double d1, double d2) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) throw Error("F distribution needs positive degrees of freedom");
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    return incomplete_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0);
}

double studentized_range_sf(double q, int k, int df) {
    if (k < 2) throw Error("studentized range needs k >= 2");
    if (df < 1) throw Error("studentized range needs df >= 1");
    if (!(q >= 0.0)) throw Error("studentized range needs q >= 0");
    if (q == 0.0) return 1.0;
    if (std::isinf(q)) return 0.0;
    // s = chi_df / sqrt(df) has density c s^(df-1) exp(-df s^2 / 2).
    const double nu = df;
    const double log_c = (nu / 2.0) * std::log(nu) - std::lgamma(nu / 2.0) - (nu / 2.0 - 1.0) * std::log(2.0);
    const auto density = [&](double s) {
        if (s <= 0.0) return 0.0;
        return std::exp(log_c + (nu - 1.0) * std::log(s) - nu * s * s / 2.0);
    };
    const auto tail = [&](double s) {
        const double d = density(s);
        return d == 0.0 ? 0.0 : d * (1.0 - normal_range_cdf(q * s, k));
    };
    const double mode = std::sqrt(std::max(nu - 1.0, 0.0) / nu);
    const double width = 1.0 / std::sqrt(2.0 * nu);
    const double upper = mode + 40.0 * width;
    double sf = 0.0;
    // Split at the bulk of the density so adaptivity starts in the right place.
    const std::vector<double> cuts = {0.0, std::max(0.0, mode - 6.0 * width), mode, mode + 6.0 * width, upper};
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        if (cuts[i + 1] > cuts[i]) sf += integrate(tail, cuts[i], cuts[i + 1], 1e-8);
    return std::clamp(sf, 0.0, 1.0);
}

std::vector<std::vector<double>> score_groups(const LdaModel& model, const std::vector<double>& scores, double tau) {
    if (scores.size() != model.num_docs()) throw Error("scores do not align with the model's documents");
    std::vector<std::vector<double>> groups(static_cast<std::size_t>(model.num_topics()));
    for (std::size_t d = 0; d < model.num_docs(); ++d)
        if (const auto t = representative(doc_topic_dist(model, d), tau)) groups[static_cast<std::size_t>(*t)].push_back(scores[d]);
    return groups;
}

}  // namespace qos
