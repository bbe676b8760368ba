#ifndef QOSTOPICS_COHERENCE_HPP
#define QOSTOPICS_COHERENCE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qostopics/lda.hpp"

namespace qos {

enum class Segmentation {
    powerset,           // every non-empty subset of W against W
    one_set_singletons  // every single word against W
};

struct CoherenceConfig {
    int top_n = 10;
    int window = 110;  // boolean sliding window size, in tokens
    double gamma = 1.0;
    double epsilon = 1e-12;
    Segmentation segmentation = Segmentation::powerset;
};

void validate(const CoherenceConfig& cfg);

/// Boolean sliding-window probabilities for a word set W. Entry (i, i) of
/// pair_prob equals word_prob(i).
struct WindowCounts {
    std::vector<std::string> words;
    Eigen::VectorXd word_prob;
    Eigen::MatrixXd pair_prob;
    long window_total = 0;

    std::size_t index_of(const std::string& w) const;
    double prob(const std::string& w) const { return word_prob[static_cast<Eigen::Index>(index_of(w))]; }
    double joint(const std::string& a, const std::string& b) const {
        return pair_prob(static_cast<Eigen::Index>(index_of(a)), static_cast<Eigen::Index>(index_of(b)));
    }
};

/// Slides a window of s tokens over every document; a document shorter than
/// s is one window, an empty document none. Throws on an empty corpus.
WindowCounts window_counts(const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& words,
                           int s);

/// Same, over documents already mapped to integer ids. `words` holds the ids
/// of W (negative ids never match) and `labels` their display strings.
WindowCounts window_counts_ids(const std::vector<std::vector<int>>& docs, const std::vector<int>& words,
                               std::vector<std::string> labels, int s);

/// NPMI(w_i, w_j)^gamma with the leading minus, so that perfect co-occurrence
/// scores +1 and independence 0. Negative values keep their sign under gamma.
/// Throws when either marginal is zero.
double npmi(const WindowCounts& counts, std::size_t i, std::size_t j, double gamma = 1.0, double epsilon = 1e-12);
double npmi(const WindowCounts& counts, const std::string& a, const std::string& b, double gamma = 1.0,
            double epsilon = 1e-12);

/// Row i holds NPMI(w_i, w_j)^gamma for every j.
Eigen::MatrixXd npmi_matrix(const WindowCounts& counts, double gamma = 1.0, double epsilon = 1e-12);

/// v(subset): component j is the sum over members w_i of NPMI(w_i, w_j)^gamma.
/// `subset` indexes counts.words.
Eigen::VectorXd context_vector(const WindowCounts& counts, const std::vector<std::size_t>& subset, double gamma = 1.0,
                               double epsilon = 1e-12);

/// A context vector has zero norm, so the cosine confirmation is undefined.
class DegenerateTopicError : public Error {
public:
    using Error::Error;
};

/// Mean cosine confirmation cos(v(W'), v(W)) over the segmentation of
/// W = counts.words. Power-set mode requires |W| <= 16.
double topic_coherence(const WindowCounts& counts, const CoherenceConfig& cfg);

struct CoherenceReport {
    std::vector<double> per_topic;  // NaN for degenerate topics
    std::vector<int> degenerate;    // topics excluded from the mean
    double mean = 0.0;              // NaN when every topic is degenerate
    CoherenceConfig config;
};

/// Coherence of every topic's top-N words against the reference documents.
CoherenceReport model_coherence(const LdaModel& model, const std::vector<std::vector<std::string>>& docs,
                                const CoherenceConfig& cfg);

struct SweepResult {
    std::vector<int> k_values;
    std::vector<double> mean_coherence;
    std::vector<double> std_coherence;  // sample standard deviation over runs
    std::vector<std::vector<double>> run_coherence;  // [k index][run]
    int runs = 0;
    int best_k = 0;
};

/// Argmax of the means over finite values; ties go to the smaller K.
int select_best_k(const std::vector<int>& k_values, const std::vector<double>& means);

/// Trains `runs` models per K (seed base_seed + run, other settings from
/// `lda`) and records their mean coherence. (K, run) pairs are independent
/// and may run on `threads` workers with identical results.
SweepResult sweep_k(const BowCorpus& corpus, const std::vector<std::vector<std::string>>& token_docs,
                    const std::vector<int>& k_values, int runs, const LdaConfig& lda, const CoherenceConfig& cfg,
                    std::uint64_t base_seed, unsigned threads = 1);

/// `K,mean,std,runs` with a header row.
void write_sweep_csv(const SweepResult& sweep, std::ostream& out);

}  // namespace qos

#endif  // QOSTOPICS_COHERENCE_HPP
