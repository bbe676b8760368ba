#ifndef QOSTOPICS_CORPUS_HPP
#define QOSTOPICS_CORPUS_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qostopics/common.hpp"

namespace qos {

/// One customer entry. A review carries a single averaged score; per-aspect
/// scores are not published at the customer level.
struct Review {
    std::string id;
    std::string hotel_id;
    std::string city;
    std::optional<std::string> author_country;
    std::string positive_text;
    std::string negative_text;
    double score = 0.0;
    std::optional<std::string> language;

    bool operator==(const Review&) const = default;
};

struct Provenance {
    std::string source;
    std::string loaded_at;  // ISO-8601 UTC
};

struct ReviewSet {
    std::vector<Review> reviews;
    Provenance provenance;
};

enum class CorpusFormat { jsonl, csv };

/// A rejected input record: 1-based line (JSONL) or data row (CSV) plus reason.
struct RecordError {
    std::size_t line = 0;
    std::string reason;
};

struct LoadResult {
    ReviewSet set;
    std::vector<RecordError> rejected;
};

/// Thrown for whole-file failures (missing file, duplicate id, bad header).
class CorpusError : public Error {
public:
    using Error::Error;
};

/// Checks the per-record invariants; returns the reason for the first
/// violation, or nullopt.
std::optional<std::string> validate_review(const Review& r);

/// Loads a corpus. Records that fail to parse or violate an invariant are
/// collected in `rejected`; a duplicate id or a missing file throws.
LoadResult load_reviews(const std::filesystem::path& path, CorpusFormat format);

/// Like load_reviews, but any rejected record is an error as well.
ReviewSet load_reviews_strict(const std::filesystem::path& path, CorpusFormat format);

void save_reviews(const ReviewSet& set, const std::filesystem::path& path, CorpusFormat format);

/// Guesses the format from the extension (.csv -> csv, anything else -> jsonl).
CorpusFormat format_from_path(const std::filesystem::path& path);

enum class Polarity { positive, negative };

std::string to_string(Polarity p);
Polarity polarity_from_string(const std::string& s);

struct DocEntry {
    std::string review_id;
    std::string raw_text;
    double score = 0.0;
};

/// All non-empty texts of one polarity from one city.
struct DocumentSet {
    Polarity polarity = Polarity::positive;
    std::string city;
    std::vector<DocEntry> docs;

    /// "<city>:<polarity>", the form accepted by the CLI's --set flag.
    std::string name() const;
};

/// Splits reviews into one DocumentSet per (city, polarity). Each side of a
/// review is routed independently. With a language filter, only reviews whose
/// tag has the same primary subtag (case-insensitive) are kept; untagged
/// reviews are dropped. Output is ordered by city, then positive before negative.
std::vector<DocumentSet> partition(const ReviewSet& set, const std::optional<std::string>& language_filter = std::nullopt);

/// Parameters of the planted-topic generator.
struct SyntheticSpec {
    int k_true = 5;
    int vocab_per_topic = 50;
    int docs = 500;
    int doc_len = 50;
    double topic_mixing = 0.1;  // symmetric Dirichlet concentration
    std::uint64_t seed = 1;
    double zipf_exponent = 1.0;  // within-topic word weights ~ rank^-s
    std::string city = "synthetic";
    std::string word_prefix = "w";
};

struct GroundTruth {
    std::vector<std::string> words;  // words[k * vocab_per_topic + j] belongs to topic k
    Eigen::MatrixXd topic_word;      // K x (K * vocab_per_topic), rows sum to 1
    Eigen::MatrixXd doc_topic;       // docs x K, the sampled mixtures
    std::vector<std::vector<int>> token_topics;
};

struct SyntheticCorpus {
    ReviewSet reviews;  // texts in positive_text, negative_text empty
    GroundTruth truth;
};

/// Throws Error on non-positive counts or concentration.
void validate(const SyntheticSpec& spec);

/// Samples documents from the LDA generative process over disjoint per-topic
/// vocabularies of letter-only pseudo-words. Deterministic in spec.seed.
SyntheticCorpus synth_corpus(const SyntheticSpec& spec);

/// Deterministic letter-only word for an index: prefix + index in base 26
/// over a-z, at least three letters (pseudo_word("w", 0) == "waaa").
std::string pseudo_word(const std::string& prefix, int index);

/// A multi-city corpus where every review has a positive and a negative text,
/// each drawn from a per-(city, polarity) planted topic model. Scores depend on
/// the review's topic mixtures so that topic groups differ in score.
struct ReviewCorpusSpec {
    std::vector<std::string> cities = {"bogota", "madrid"};
    int reviews_per_city = 1000;
    int hotels_per_city = 20;
    std::vector<int> k_true = {6, 6, 4, 5};  // per set, in partition order
    int vocab_per_topic = 30;
    int doc_len = 20;
    double topic_mixing = 0.1;
    double score_noise = 0.8;
    std::uint64_t seed = 7;
    std::string language = "es";
};

ReviewSet synth_review_corpus(const ReviewCorpusSpec& spec);

}  // namespace qos

#endif  // QOSTOPICS_CORPUS_HPP
