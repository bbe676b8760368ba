#ifndef QOSTOPICS_TEXTPREP_HPP
#define QOSTOPICS_TEXTPREP_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "qostopics/common.hpp"
#include "qostopics/corpus.hpp"

namespace qos {

struct PrepResources {
    std::unordered_set<std::string> stopwords;
    std::unordered_map<std::string, std::string> lemma_map;
    int min_token_len = 2;  // in code points
};

/// One word per line; blank lines and lines starting with '#' are skipped.
/// Entries are lowercased on load.
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path);

/// TSV `surface<TAB>lemma`; keys lowercased on load.
std::unordered_map<std::string, std::string> load_lemmas(const std::filesystem::path& path);

PrepResources load_resources(const std::filesystem::path& stopwords, const std::filesystem::path& lemmas,
                             int min_token_len = 2);

/// Decodes UTF-8; invalid bytes become U+FFFD.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

bool is_letter(char32_t c);
char32_t to_lower(char32_t c);
std::string lowercase(std::string_view utf8);

/// Maximal runs of Unicode letters, lowercased. Digits and everything else
/// separate tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Tokenize, drop stopwords, map through the lemma table (identity
/// fallback), drop tokens shorter than min_token_len.
std::vector<std::string> preprocess(std::string_view text, const PrepResources& res);

struct TokenDoc {
    std::string review_id;
    std::vector<std::string> tokens;
    double score = 0.0;
};

std::vector<TokenDoc> preprocess_set(const DocumentSet& set, const PrepResources& res, unsigned threads = 1);

/// Words sorted by code point, with a bijective index onto 0..V-1.
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> words, std::vector<long> counts);

    std::size_t size() const { return words_.size(); }
    bool empty() const { return words_.empty(); }
    const std::string& word(std::size_t i) const { return words_.at(i); }
    const std::vector<std::string>& words() const { return words_; }
    const std::vector<long>& counts() const { return counts_; }
    std::optional<int> find(const std::string& w) const;

private:
    std::vector<std::string> words_;
    std::vector<long> counts_;
    std::unordered_map<std::string, int> index_;
};

class EmptyVocabularyError : public Error {
public:
    using Error::Error;
};

/// Words with corpus frequency >= min_count. Throws EmptyVocabularyError when
/// nothing qualifies.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& docs, int min_count = 5);

using BowDoc = std::vector<std::pair<int, int>>;  // (word index, count), ascending index

BowDoc to_bow(const std::vector<std::string>& tokens, const Vocabulary& vocab);

struct BowCorpus {
    std::vector<std::string> review_ids;
    std::vector<BowDoc> docs;
    Vocabulary vocab;
};

BowCorpus make_bow_corpus(const std::vector<TokenDoc>& docs, int min_count = 5);

std::vector<std::vector<std::string>> token_lists(const std::vector<TokenDoc>& docs);

}  // namespace qos

#endif  // QOSTOPICS_TEXTPREP_HPP
