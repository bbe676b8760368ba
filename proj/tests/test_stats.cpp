#include <doctest.h>

#include "oracles.hpp"
#include "qostopics/lda.hpp"
#include "qostopics/stats.hpp"

#include <cmath>
#include <numeric>

using namespace qos;

namespace {

using Groups = std::vector<std::vector<double>>;

LdaModel model_with_theta(const Eigen::MatrixXd& theta) {
    LdaModel m;
    m.config.k = static_cast<int>(theta.cols());
    m.doc_topic = theta;
    m.topic_word = Eigen::MatrixXd::Constant(theta.cols(), 1, 1.0);
    for (Eigen::Index d = 0; d < theta.rows(); ++d) m.review_ids.push_back("r" + std::to_string(d));
    return m;
}

Eigen::MatrixXd random_theta(int docs, int k, std::uint64_t seed) {
    Rng rng(seed);
    std::gamma_distribution<double> gamma(0.3);
    Eigen::MatrixXd theta(docs, k);
    for (int d = 0; d < docs; ++d) {
        for (int t = 0; t < k; ++t) theta(d, t) = gamma(rng) + 1e-12;
        theta.row(d) /= theta.row(d).sum();
    }
    return theta;
}

}  // namespace

TEST_CASE("representative topic uses a strict threshold") {
    CHECK(representative(Eigen::Vector2d(0.85, 0.15), 0.8) == 0);
    CHECK_FALSE(representative(Eigen::Vector2d(0.5, 0.5), 0.8));
    CHECK_FALSE(representative(Eigen::Vector2d(0.8, 0.2), 0.8));
    CHECK(representative(Eigen::Vector3d(0.05, 0.05, 0.9), 0.8) == 2);
    CHECK_THROWS_AS(representative(Eigen::Vector2d(0.7, 0.7), 0.8), Error);
    CHECK_THROWS_AS(representative(Eigen::VectorXd(), 0.8), Error);
}

TEST_CASE("representative share") {
    const auto theta = random_theta(400, 5, 1);
    double previous = 1.0;
    for (double tau : {0.5, 0.6, 0.7, 0.8, 0.9, 0.99}) {
        const double s = representative_share(theta, tau);
        CHECK(s <= previous);
        CHECK(s >= 0.0);
        previous = s;
    }
    CHECK(representative_share(theta, 1.0 - 1e-15) == 0.0);
    Eigen::MatrixXd pure = Eigen::MatrixXd::Zero(10, 3);
    pure.col(1).setOnes();
    for (double tau : {0.1, 0.8, 0.999999}) CHECK(representative_share(pure, tau) == 1.0);
    CHECK(representative_share(model_with_theta(pure), 0.8) == 1.0);
}

TEST_CASE("topic magnitude") {
    Eigen::MatrixXd theta(3, 2);
    theta << 0.6, 0.4, 0.2, 0.8, 0.5, 0.5;
    const auto m = model_with_theta(theta);
    CHECK(topic_magnitude(m, {0, 1}, 0, "h1").magnitude == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(topic_magnitude(m, {}, 1).magnitude == 0.0);
    CHECK_THROWS_AS(topic_magnitude(m, {0}, 2), Error);

    const auto big = model_with_theta(random_theta(300, 6, 2));
    std::vector<std::string> hotels;
    for (int d = 0; d < 300; ++d) hotels.push_back("h" + std::to_string(d % 7));
    const auto all = hotel_magnitudes(big, hotels);
    CHECK(all.size() == 7 * 6);
    for (std::size_t h = 0; h < 7; ++h) {
        double sum = 0.0;
        for (int t = 0; t < 6; ++t) {
            const auto& tm = all[h * 6 + t];
            CHECK(tm.magnitude <= tm.reviews);
            sum += tm.magnitude;
        }
        CHECK(std::abs(sum - all[h * 6].reviews) <= 1e-9);
    }
}

TEST_CASE("box statistics") {
    auto b = box_stats({5, 1, 4, 2, 3});
    CHECK(b.q1 == 2.0);
    CHECK(b.median == 3.0);
    CHECK(b.q3 == 4.0);
    CHECK(b.min == 1.0);
    CHECK(b.max == 5.0);
    CHECK(b.outliers.empty());

    b = box_stats({7, 7, 7});
    for (double v : {b.min, b.q1, b.median, b.q3, b.max}) CHECK(v == 7.0);
    CHECK(b.outliers.empty());

    b = box_stats({1, 1, 1, 1, 10});
    CHECK(b.outliers == std::vector<double>{10.0});
    CHECK(b.max == 1.0);

    // Interpolated quartiles between tied values.
    b = box_stats({1, 2, 3, 4});
    CHECK(b.q1 == 1.75);
    CHECK(b.median == 2.5);
    CHECK(b.q3 == 3.25);
    CHECK_THROWS_AS(box_stats({}), Error);

    Rng rng(3);
    std::normal_distribution<double> normal(6.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(1 + uniform_index(rng, 30));
        for (auto& v : x) v = std::round(normal(rng) * 10) / 10;
        if (trial % 5 == 0) x.push_back(40.0);
        const auto s = box_stats(x);
        CHECK(s.min <= s.q1);
        CHECK(s.q1 <= s.median);
        CHECK(s.median <= s.q3);
        CHECK(s.q3 <= s.max);
        CHECK(static_cast<std::size_t>(s.n) == x.size());
    }
}

TEST_CASE("one-way ANOVA") {
    const Groups g = {{1, 2, 3}, {2, 3, 4}, {3, 4, 5}};
    const auto r = anova_oneway(g);
    CHECK(r.f == 3.0);
    CHECK(r.df_between == 2);
    CHECK(r.df_within == 6);
    // F(2, d2) survival has the closed form (1 + 2F/d2)^(-d2/2).
    CHECK(r.p_value == doctest::Approx(std::pow(1.0 + 2.0 * 3.0 / 6.0, -3.0)).epsilon(1e-12));
    CHECK(f_sf(5.14, 2, 6) == doctest::Approx(0.05).epsilon(0.01));
    CHECK(anova_oneway({{1, 2}, {1, 2}}).f == 0.0);
    CHECK(anova_oneway({{1, 2}, {1, 2}}).p_value == 1.0);
    CHECK_THROWS_AS(anova_oneway({{3, 3}, {3, 3}}), Error);
    CHECK_THROWS_AS(anova_oneway({{1, 2}}), Error);
    CHECK_THROWS_AS(anova_oneway({{1}, {2}}), Error);
    CHECK_THROWS_AS(anova_oneway({{1, 2}, {}}), Error);
    const auto sep = anova_oneway({{1, 1}, {2, 2}});
    CHECK(std::isinf(sep.f));
    CHECK(sep.p_value == 0.0);
}

TEST_CASE("ANOVA F is invariant under affine maps of the scores") {
    Rng rng(8);
    std::normal_distribution<double> normal(7.0, 1.5);
    Groups g(4);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t n = 0; n < 5 + 3 * i; ++n) g[i].push_back(normal(rng) + 0.3 * i);
    const double f = anova_oneway(g).f;
    for (const auto& [scale, shift] : std::vector<std::pair<double, double>>{{1.0, 100.0}, {3.0, 0.0}, {-0.5, 7.0}, {10.0, -1e3}}) {
        Groups h = g;
        for (auto& x : h)
            for (auto& v : x) v = scale * v + shift;
        CHECK(anova_oneway(h).f == doctest::Approx(f).epsilon(1e-11));
    }
}

TEST_CASE("incomplete beta and F survival against closed forms") {
    for (double x : {0.01, 0.2, 0.5, 0.77, 0.99}) {
        for (double b : {0.5, 1.0, 3.0, 40.0}) CHECK(incomplete_beta(x, 1.0, b) == doctest::Approx(1.0 - std::pow(1.0 - x, b)).epsilon(1e-12));
        for (double a : {0.5, 2.0, 25.0}) CHECK(incomplete_beta(x, a, 1.0) == doctest::Approx(std::pow(x, a)).epsilon(1e-12));
        CHECK(incomplete_beta(x, 2.5, 4.0) + incomplete_beta(1.0 - x, 4.0, 2.5) == doctest::Approx(1.0).epsilon(1e-13));
    }
    for (double f : {0.1, 1.0, 3.0, 20.0})
        for (double d2 : {1.0, 6.0, 60.0}) CHECK(f_sf(f, 2, d2) == doctest::Approx(std::pow(1.0 + 2.0 * f / d2, -d2 / 2.0)).epsilon(1e-11));
    CHECK(f_sf(0.0, 3, 4) == 1.0);
    CHECK(incomplete_beta(0.0, 2, 2) == 0.0);
    CHECK(incomplete_beta(1.0, 2, 2) == 1.0);
}

TEST_CASE("studentized range survival") {
    CHECK(studentized_range_sf(0.0, 3, 6) == 1.0);
    CHECK(studentized_range_sf(100.0, 3, 10) <= 1e-6);
    CHECK(std::abs(studentized_range_sf(4.34, 3, 6) - 0.05) <= 0.002);
    // Published 5% critical values.
    CHECK(std::abs(studentized_range_sf(3.46, 2, 6) - 0.05) <= 0.002);
    CHECK(std::abs(studentized_range_sf(4.65, 5, 10) - 0.05) <= 0.002);
    CHECK(std::abs(studentized_range_sf(3.58, 3, 20) - 0.05) <= 0.002);
    // For two groups Q = sqrt(2)|T| with T ~ t(df), whose tail is an incomplete beta.
    for (int df : {1, 3, 8, 30, 200})
        for (double q : {0.5, 2.0, 4.0, 9.0}) {
            const double t = q / std::sqrt(2.0);
            CHECK(std::abs(studentized_range_sf(q, 2, df) - incomplete_beta(df / (df + t * t), df / 2.0, 0.5)) <= 1e-6);
        }
    // Survival falls with q and rises with the number of groups.
    double prev = 1.0;
    for (double q = 0.5; q < 8.0; q += 0.5) {
        const double s = studentized_range_sf(q, 4, 12);
        CHECK(s <= prev);
        CHECK(s <= studentized_range_sf(q, 6, 12));
        prev = s;
    }
    CHECK_THROWS_AS(studentized_range_sf(1.0, 1, 5), Error);
    CHECK_THROWS_AS(studentized_range_sf(1.0, 3, 0), Error);
    CHECK_THROWS_AS(studentized_range_sf(-1.0, 3, 5), Error);
}

TEST_CASE("Tukey HSD") {
    const auto r = tukey_hsd({{1, 2, 3}, {2, 3, 4}, {3, 4, 5}});
    REQUIRE(r.pairs.size() == 3);
    CHECK(r.pairs[1].i == 0);
    CHECK(r.pairs[1].j == 2);
    CHECK(r.pairs[1].mean_diff == 2.0);
    CHECK(r.pairs[1].q == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
    CHECK(r.pairs[0].q == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));

    const auto same = tukey_hsd({{1, 2, 3}, {1, 2, 3}});
    CHECK(same.pairs[0].q == 0.0);
    CHECK(same.pairs[0].p_value == 1.0);
    CHECK_FALSE(same.pairs[0].significant);
    CHECK(tukey_hsd({{1, 2, 3, 4}, {2, 3, 4, 5}, {3, 4, 5, 6}, {9, 9, 10, 11}}).pairs.size() == 6);
    CHECK_THROWS_AS(tukey_hsd({{1, 1}, {2, 2}}), Error);
}

TEST_CASE("Tukey decisions agree with a permutation oracle") {
    const std::vector<Groups> datasets = {
        {{4.1, 5.0, 4.6, 5.3, 4.8, 5.5}, {5.2, 4.9, 5.8, 5.1, 5.6, 4.7}, {7.9, 8.4, 7.6, 8.8, 8.1, 7.7}},
        {{2, 3, 3, 4, 2, 3, 4}, {6, 7, 5, 6, 7}, {3, 4, 3, 2, 4, 3, 3, 4}, {6, 5, 7, 6}},
        {{5.1, 6.2, 4.8, 5.9, 5.5}, {5.6, 4.9, 6.1, 5.3, 5.8}, {5.0, 5.7, 6.0, 5.2, 5.4}},
    };
    for (std::size_t d = 0; d < datasets.size(); ++d) {
        const auto r = tukey_hsd(datasets[d], 0.05);
        const auto oracle = oracle::permutation_decisions(datasets[d], 10000, 0.05, 100 + d);
        REQUIRE(oracle.size() == r.pairs.size());
        for (std::size_t p = 0; p < oracle.size(); ++p) {
            CAPTURE(d);
            CAPTURE(p);
            CAPTURE(r.pairs[p].p_value);
            CHECK(r.pairs[p].significant == oracle[p]);
        }
    }
}

TEST_CASE("score groups collect representative reviews") {
    Eigen::MatrixXd theta(4, 2);
    theta << 0.9, 0.1, 0.3, 0.7, 0.05, 0.95, 0.81, 0.19;
    const auto m = model_with_theta(theta);
    const auto g = score_groups(m, {9.0, 5.0, 3.0, 8.0}, 0.8);
    CHECK(g[0] == std::vector<double>{9.0, 8.0});
    CHECK(g[1] == std::vector<double>{3.0});
    CHECK_THROWS_AS(score_groups(m, {1.0}, 0.8), Error);
    AnalysisConfig cfg;
    cfg.threshold = 1.0;
    CHECK_THROWS_AS(validate(cfg), Error);
}
