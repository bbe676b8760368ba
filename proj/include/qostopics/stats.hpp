#ifndef QOSTOPICS_STATS_HPP
#define QOSTOPICS_STATS_HPP

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "qostopics/common.hpp"

namespace qos {

struct LdaModel;

struct AnalysisConfig {
    double threshold = 0.8;  // tau
    double alpha_sig = 0.05;
};

void validate(const AnalysisConfig& cfg);

/// argmax topic when its probability is strictly above tau.
std::optional<int> representative(const Eigen::VectorXd& dist, double tau);

/// Fraction of theta rows with a representative topic.
double representative_share(const Eigen::MatrixXd& doc_topic, double tau);
double representative_share(const LdaModel& model, double tau);

struct TopicMagnitude {
    int topic = 0;
    std::string hotel_id;
    double magnitude = 0.0;  // M_T
    int reviews = 0;         // |R_H|
};

/// M_T = sum of P(r in T) over the given rows of theta.
TopicMagnitude topic_magnitude(const LdaModel& model, const std::vector<std::size_t>& hotel_reviews, int topic,
                               const std::string& hotel_id = {});

/// Every (hotel, topic) magnitude; hotel_of_review is aligned with theta rows.
/// Hotels are ordered by id.
std::vector<TopicMagnitude> hotel_magnitudes(const LdaModel& model, const std::vector<std::string>& hotel_of_review);

/// Type-7 (linear interpolation) quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double p);

struct ScoreBox {
    int topic = -1;
    int n = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;  // min/max are the whisker ends
    std::vector<double> outliers;
};

ScoreBox box_stats(std::vector<double> scores, int topic = -1);

struct AnovaResult {
    double f = 0.0;
    int df_between = 0;
    int df_within = 0;
    double p_value = 1.0;
    double ms_within = 0.0;
};

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);

struct TukeyPair {
    int i = 0, j = 0;
    double mean_diff = 0.0;  // mean_j - mean_i
    double q = 0.0;
    double p_value = 1.0;
    bool significant = false;
};

struct TukeyResult {
    std::vector<TukeyPair> pairs;  // (0,1), (0,2), ..., (k-2,k-1)
};

TukeyResult tukey_hsd(const std::vector<std::vector<double>>& groups, double alpha_sig = 0.05);

/// Tukey-Kramer statistic for one pair.
double tukey_q(double mean_i, double mean_j, std::size_t n_i, std::size_t n_j, double ms_within);

/// Regularised incomplete beta I_x(a, b).
double incomplete_beta(double x, double a, double b);

/// P(F > f) for the F(d1, d2) distribution.
double f_sf(double f, double d1, double d2);

/// P(Q > q) for the studentized range of k groups with df degrees of freedom,
/// by nested adaptive quadrature to absolute tolerance 1e-6 or better.
double studentized_range_sf(double q, int k, int df);

/// Scores of each topic's representative documents; groups are indexed by topic.
std::vector<std::vector<double>> score_groups(const LdaModel& model, const std::vector<double>& scores, double tau);

}  // namespace qos

#endif  // QOSTOPICS_STATS_HPP
