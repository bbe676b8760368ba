#ifndef QOSTOPICS_PROJECT_HPP
#define QOSTOPICS_PROJECT_HPP

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qostopics/common.hpp"

namespace qos {

enum class ProjectInit { pca, random };

std::string to_string(ProjectInit init);
ProjectInit project_init_from_string(const std::string& s);

struct ProjectConfig {
    int k_neighbors = 15;
    double min_dist = 0.1;
    double spread = 1.0;
    int epochs = 200;
    int negative_rate = 5;
    double learning_rate = 1.0;
    ProjectInit init = ProjectInit::pca;
    std::uint64_t seed = 1;
    unsigned threads = 1;  // > 1 lays out without locks; not reproducible
};

void validate(const ProjectConfig& cfg);

struct FuzzyGraph {
    Eigen::SparseMatrix<double> weights;  // D x D, symmetric, entries in (0, 1]
    std::vector<std::vector<int>> neighbors;  // k nearest per point, nearest first
    std::vector<std::vector<double>> distances;
    Eigen::VectorXd rho;
    Eigen::VectorXd sigma;

    Eigen::Index size() const { return weights.rows(); }
};

/// Rows of `vectors` are points. Exact k-NN (self excluded), per-point
/// smooth scaling, then fuzzy union w = a + b - ab.
FuzzyGraph knn_fuzzy_graph(const Eigen::MatrixXd& vectors, int k, unsigned threads = 1);

/// Sum over a point's neighbors of exp(-max(0, d - rho) / sigma).
double membership_sum(const std::vector<double>& distances, double rho, double sigma);

/// (a, b) of the curve 1 / (1 + a d^(2b)) fitted by least squares to the
/// offset exponential defined by min_dist and spread.
std::pair<double, double> fit_ab(double min_dist, double spread = 1.0);

struct Projection2D {
    Eigen::MatrixXd points;  // D x 2, rows aligned with the input
    ProjectConfig config;
    double trustworthiness = 0.0;
};

/// Initial coordinates: the top two principal components scaled to [-10, 10],
/// or uniform noise in that box.
Eigen::MatrixXd initial_layout(const Eigen::MatrixXd& vectors, const ProjectConfig& cfg);

Projection2D layout2d(const FuzzyGraph& graph, const Eigen::MatrixXd& vectors, const ProjectConfig& cfg);

/// Graph, layout and trustworthiness in one call.
Projection2D project(const Eigen::MatrixXd& vectors, const ProjectConfig& cfg);

/// Standard trustworthiness of `low` against `high` over k-neighborhoods.
double trustworthiness(const Eigen::MatrixXd& high, const Eigen::MatrixXd& low, int k);

}  // namespace qos

#endif  // QOSTOPICS_PROJECT_HPP
