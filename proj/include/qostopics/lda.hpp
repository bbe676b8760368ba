#ifndef QOSTOPICS_LDA_HPP
#define QOSTOPICS_LDA_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "qostopics/textprep.hpp"

namespace qos {

struct LdaConfig {
    int k = 10;
    double alpha = 0.1;  // symmetric doc-topic prior
    double beta = 0.01;  // symmetric topic-word prior
    int iterations = 1000;
    int burn_in = 200;
    int sample_lag = 10;  // sweeps between posterior samples after burn-in
    std::uint64_t seed = 1;
    int likelihood_interval = 0;  // record the log-likelihood every n sweeps; 0 = never
    double initial_temperature = 1.0;  // > 1 tempers the first half of burn-in
};

void validate(const LdaConfig& cfg);

/// A trained collapsed-Gibbs LDA model. phi and theta are posterior means
/// averaged over the post-burn-in samples.
struct LdaModel {
    LdaConfig config;
    Vocabulary vocab;
    std::vector<std::string> review_ids;  // row labels of doc_topic
    Eigen::MatrixXd topic_word;           // K x V, rows sum to 1
    Eigen::MatrixXd doc_topic;            // D x K, rows sum to 1
    std::vector<std::vector<int>> assignments;  // final topic per token, tokens in bag order
    std::vector<std::pair<int, double>> log_likelihood;  // (sweep, log p(w | z))

    int num_topics() const { return static_cast<int>(topic_word.rows()); }
    std::size_t num_docs() const { return static_cast<std::size_t>(doc_topic.rows()); }
};

LdaModel train_lda(const BowCorpus& corpus, const LdaConfig& cfg);

/// theta row of one document, P(r in T) for every topic T.
Eigen::VectorXd doc_topic_dist(const LdaModel& model, std::size_t doc);

struct WordProb {
    std::string word;
    double prob = 0.0;
};

/// The n most probable words of a topic, descending; ties alphabetical.
std::vector<WordProb> top_words(const LdaModel& model, int topic, int n);

/// Sum of the topic's top-n word probabilities.
double salience(const LdaModel& model, int topic, int n = 10);

/// Mean of theta over documents, in percent.
Eigen::VectorXd topic_shares(const LdaModel& model);

/// Collapsed log p(w | z) of a count state.
double collapsed_log_likelihood(const std::vector<int>& topic_word_counts, const std::vector<int>& topic_counts,
                                int k, int v, double beta);

void save_lda(const LdaModel& model, const std::filesystem::path& path);
LdaModel load_lda(const std::filesystem::path& path);

}  // namespace qos

#endif  // QOSTOPICS_LDA_HPP
