#ifndef QOSTOPICS_EMBED_HPP
#define QOSTOPICS_EMBED_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qostopics/textprep.hpp"

namespace qos {

enum class SoftmaxMode { negative_sampling, exact };

std::string to_string(SoftmaxMode mode);
SoftmaxMode softmax_mode_from_string(const std::string& s);

struct EmbedConfig {
    int dim = 100;
    int chain_len = 5;
    int chain_len_max = 0;  // 0 = chain_len only
    int context_radius = 2;
    int epochs = 5;
    int negatives = 5;
    double lr_initial = 0.05;
    std::uint64_t seed = 1;
    SoftmaxMode softmax_mode = SoftmaxMode::negative_sampling;
    int min_count = 1;
    unsigned threads = 1;  // > 1 trains without locks; not reproducible
};

void validate(const EmbedConfig& cfg);

/// Contiguous n-code-point substrings of "⟨word⟩". A wrapped word shorter
/// than n is a single chain.
std::vector<std::string> ngram_chains(std::string_view word, int n);

/// Chains for every n in [n_min, n_max], shorter lengths first.
std::vector<std::string> ngram_chains(std::string_view word, int n_min, int n_max);

class ChainVocabulary {
public:
    ChainVocabulary() = default;
    ChainVocabulary(const std::vector<std::string>& words, int n_min, int n_max);

    std::size_t size() const { return chains_.size(); }
    const std::string& chain(std::size_t i) const { return chains_.at(i); }
    const std::vector<std::string>& chains() const { return chains_; }
    int find(const std::string& chain) const;  // -1 when unknown

    /// Known chain ids of a word, in decomposition order.
    std::vector<int> decompose(std::string_view word) const;
    int n_min() const { return n_min_; }
    int n_max() const { return n_max_; }

private:
    std::vector<std::string> chains_;
    std::unordered_map<std::string, int> index_;
    int n_min_ = 5;
    int n_max_ = 5;
};

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
struct BasicEmbeddingModel {
    EmbedConfig config;
    Vocabulary words;                          // training targets
    ChainVocabulary chains;
    std::vector<std::vector<int>> word_chains;  // chain ids of each target word
    RowMatrix<Scalar> chain_vectors;           // |chains| x N
    RowMatrix<Scalar> output_vectors;          // V x N
    std::vector<double> epoch_loss;            // mean loss per target, per epoch

    int dim() const { return static_cast<int>(chain_vectors.cols()); }
};

using EmbeddingModel = BasicEmbeddingModel<float>;

template <typename Scalar>
struct Composed {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> vector;
    bool oov = false;
};

template <typename Scalar>
Composed<Scalar> word_vector(const BasicEmbeddingModel<Scalar>& model, std::string_view word);

template <typename Scalar>
Composed<Scalar> review_vector(const BasicEmbeddingModel<Scalar>& model, const std::vector<std::string>& tokens);

/// CBOW over chain-averaged word vectors. Documents are visited in a
/// canonical order, so single-threaded results do not depend on input order.
template <typename Scalar>
BasicEmbeddingModel<Scalar> train_embeddings(const std::vector<std::vector<std::string>>& docs, const EmbedConfig& cfg);

/// Untrained model with the vocabularies of `docs` and seeded random weights.
template <typename Scalar>
BasicEmbeddingModel<Scalar> init_embeddings(const std::vector<std::vector<std::string>>& docs, const EmbedConfig& cfg);

template <typename Scalar>
struct CbowGradient {
    RowMatrix<Scalar> chain_vectors;
    RowMatrix<Scalar> output_vectors;
};

/// Full-softmax cross-entropy of predicting `target` from `context` (word ids).
template <typename Scalar>
Scalar exact_loss(const BasicEmbeddingModel<Scalar>& model, const std::vector<int>& context, int target);

template <typename Scalar>
CbowGradient<Scalar> exact_gradient(const BasicEmbeddingModel<Scalar>& model, const std::vector<int>& context,
                                    int target);

/// Binary model plus `<path>.json` holding the config.
template <typename Scalar>
void save_embeddings(const BasicEmbeddingModel<Scalar>& model, const std::filesystem::path& path);

EmbeddingModel load_embeddings(const std::filesystem::path& path);

template <typename Scalar>
double cosine(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& a, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b) {
    const double na = static_cast<double>(a.norm()), nb = static_cast<double>(b.norm());
    if (na == 0.0 || nb == 0.0) return 0.0;
    return static_cast<double>(a.dot(b)) / (na * nb);
}

}  // namespace qos

#endif  // QOSTOPICS_EMBED_HPP
