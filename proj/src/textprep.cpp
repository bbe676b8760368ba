#include "qostopics/textprep.hpp"

#include <algorithm>
#include <cwctype>
#include <fstream>
#include <locale>
#include <map>

namespace qos {

namespace {

const std::ctype<wchar_t>* unicode_ctype() {
    static const std::ctype<wchar_t>* facet = []() -> const std::ctype<wchar_t>* {
        for (const char* name : {"C.UTF-8", "C.utf8", "en_US.UTF-8"}) {
            try {
                static const std::locale loc(name);
                return &std::use_facet<std::ctype<wchar_t>>(loc);
            } catch (const std::runtime_error&) {
            }
        }
        return nullptr;
    }();
    return facet;
}

// Latin-1 and Latin Extended-A, used when no UTF-8 locale is installed.
bool fallback_is_letter(char32_t c) {
    if ((c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z')) return true;
    if (c >= 0xC0 && c <= 0x24F) return c != 0xD7 && c != 0xF7;
    return false;
}

char32_t fallback_lower(char32_t c) {
    if (c >= U'A' && c <= U'Z') return c + 32;
    if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
    if (c >= 0x100 && c <= 0x17F && c != 0x130 && c != 0x138) {
        const bool odd_upper = (c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E);
        if (odd_upper ? (c % 2 == 1) : (c % 2 == 0)) return c + 1;
    }
    return c;
}

std::ifstream open_resource(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open resource file '" + path.string() + "'");
    return in;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::u32string utf8_decode(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        int extra = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            extra = 1;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            extra = 2;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            extra = 3;
            cp = b0 & 0x07;
        } else {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k <= extra; ++k) {
            if (i + k >= s.size() || (static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        }
        if (!ok) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += extra + 1;
    }
    return out;
}

std::string utf8_encode(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t c : s) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else if (c < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else if (c < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (c >> 12)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (c >> 18)));
            out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

bool is_letter(char32_t c) {
    if (const auto* ct = unicode_ctype()) return ct->is(std::ctype_base::alpha, static_cast<wchar_t>(c)) &&
                                                 !ct->is(std::ctype_base::digit, static_cast<wchar_t>(c));
    return fallback_is_letter(c);
}

char32_t to_lower(char32_t c) {
    if (const auto* ct = unicode_ctype()) return static_cast<char32_t>(ct->tolower(static_cast<wchar_t>(c)));
    return fallback_lower(c);
}

std::string lowercase(std::string_view utf8) {
    auto cps = utf8_decode(utf8);
    for (auto& c : cps) c = to_lower(c);
    return utf8_encode(cps);
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::u32string current;
    for (char32_t c : utf8_decode(text)) {
        if (is_letter(c)) {
            current.push_back(to_lower(c));
        } else if (!current.empty()) {
            tokens.push_back(utf8_encode(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(utf8_encode(current));
    return tokens;
}

std::vector<std::string> preprocess(std::string_view text, const PrepResources& res) {
    std::vector<std::string> out;
    for (auto& token : tokenize(text)) {
        if (res.stopwords.count(token)) continue;
        if (const auto it = res.lemma_map.find(token); it != res.lemma_map.end()) token = it->second;
        if (static_cast<int>(utf8_decode(token).size()) < res.min_token_len) continue;
        out.push_back(std::move(token));
    }
    return out;
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
    auto in = open_resource(path);
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        words.insert(lowercase(line));
    }
    return words;
}

std::unordered_map<std::string, std::string> load_lemmas(const std::filesystem::path& path) {
    auto in = open_resource(path);
    std::unordered_map<std::string, std::string> lemmas;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error(path.string() + ":" + std::to_string(n) + ": expected surface<TAB>lemma");
        lemmas[lowercase(trim(line.substr(0, tab)))] = trim(line.substr(tab + 1));
    }
    return lemmas;
}

PrepResources load_resources(const std::filesystem::path& stopwords, const std::filesystem::path& lemmas,
                             int min_token_len) {
    PrepResources res;
    res.stopwords = load_stopwords(stopwords);
    res.lemma_map = load_lemmas(lemmas);
    res.min_token_len = min_token_len;
    return res;
}

std::vector<TokenDoc> preprocess_set(const DocumentSet& set, const PrepResources& res, unsigned threads) {
    std::vector<TokenDoc> out(set.docs.size());
    parallel_for(set.docs.size(), threads, [&](std::size_t i) {
        const auto& d = set.docs[i];
        out[i] = {d.review_id, preprocess(d.raw_text, res), d.score};
    });
    return out;
}

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<long> counts)
    : words_(std::move(words)), counts_(std::move(counts)) {
    if (counts_.size() != words_.size()) throw Error("vocabulary words and counts differ in length");
    for (std::size_t i = 0; i < words_.size(); ++i)
        if (!index_.emplace(words_[i], static_cast<int>(i)).second)
            throw Error("duplicate vocabulary word '" + words_[i] + "'");
}

std::optional<int> Vocabulary::find(const std::string& w) const {
    const auto it = index_.find(w);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& docs, int min_count) {
    if (min_count < 1) throw Error("min_count must be >= 1");
    std::map<std::string, long> freq;  // UTF-8 byte order == code point order
    for (const auto& doc : docs)
        for (const auto& t : doc) ++freq[t];
    std::vector<std::string> words;
    std::vector<long> counts;
    for (const auto& [w, c] : freq) {
        if (c < min_count) continue;
        words.push_back(w);
        counts.push_back(c);
    }
    if (words.empty())
        throw EmptyVocabularyError("empty vocabulary: no token occurs at least " + std::to_string(min_count) +
                                   " times");
    return Vocabulary(std::move(words), std::move(counts));
}

BowDoc to_bow(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    std::map<int, int> counts;
    for (const auto& t : tokens)
        if (auto i = vocab.find(t)) ++counts[*i];
    return {counts.begin(), counts.end()};
}

BowCorpus make_bow_corpus(const std::vector<TokenDoc>& docs, int min_count) {
    BowCorpus corpus;
    corpus.vocab = build_vocab(token_lists(docs), min_count);
    for (const auto& d : docs) {
        corpus.review_ids.push_back(d.review_id);
        corpus.docs.push_back(to_bow(d.tokens, corpus.vocab));
    }
    return corpus;
}

std::vector<std::vector<std::string>> token_lists(const std::vector<TokenDoc>& docs) {
    std::vector<std::vector<std::string>> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back(d.tokens);
    return out;
}

}  // namespace qos
