#include "qostopics/corpus.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

namespace qos {

namespace {

using nlohmann::json;

const std::vector<std::string> kColumns = {"id",           "hotel_id",      "city",  "author_country",
                                           "positive_text", "negative_text", "score", "language"};

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string lower_ascii(std::string s) {
    for (auto& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
}

std::string primary_subtag(const std::string& tag) {
    const auto cut = tag.find_first_of("-_");
    return lower_ascii(tag.substr(0, cut));
}

std::optional<std::string> optional_string(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw Error(std::string("field '") + key + "' is not a string");
    return it->get<std::string>();
}

std::string required_string(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) throw Error(std::string("missing field '") + key + "'");
    if (!it->is_string()) throw Error(std::string("field '") + key + "' is not a string");
    return it->get<std::string>();
}

double parse_score_text(const std::string& text) {
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &used);
    } catch (const std::exception&) {
        throw Error("score '" + text + "' is not a number");
    }
    if (used != text.size()) throw Error("score '" + text + "' is not a number");
    return value;
}

Review review_from_json(const json& obj) {
    if (!obj.is_object()) throw Error("record is not a JSON object");
    for (const auto& [key, _] : obj.items())
        if (std::find(kColumns.begin(), kColumns.end(), key) == kColumns.end())
            throw Error("unknown field '" + key + "'");
    Review r;
    r.id = required_string(obj, "id");
    r.hotel_id = required_string(obj, "hotel_id");
    r.city = required_string(obj, "city");
    r.author_country = optional_string(obj, "author_country");
    r.positive_text = optional_string(obj, "positive_text").value_or("");
    r.negative_text = optional_string(obj, "negative_text").value_or("");
    r.language = optional_string(obj, "language");
    const auto it = obj.find("score");
    if (it == obj.end() || it->is_null()) throw Error("missing field 'score'");
    if (it->is_number())
        r.score = it->get<double>();
    else if (it->is_string())
        r.score = parse_score_text(it->get<std::string>());
    else
        throw Error("field 'score' is not a number");
    return r;
}

json review_to_json(const Review& r) {
    json obj = json::object();
    obj["id"] = r.id;
    obj["hotel_id"] = r.hotel_id;
    obj["city"] = r.city;
    obj["author_country"] = r.author_country ? json(*r.author_country) : json(nullptr);
    obj["positive_text"] = r.positive_text;
    obj["negative_text"] = r.negative_text;
    obj["score"] = r.score;
    obj["language"] = r.language ? json(*r.language) : json(nullptr);
    return obj;
}

// RFC 4180 reader: quoted fields may hold separators, doubled quotes and newlines.
class CsvReader {
public:
    explicit CsvReader(std::istream& in) : in_(in) {}

    // Reads one record; returns false at end of input. `start_line` receives
    // the 1-based physical line on which the record begins.
    bool next(std::vector<std::string>& fields, std::size_t& start_line) {
        fields.clear();
        int c = in_.get();
        if (c == EOF) return false;
        start_line = line_;
        std::string field;
        bool quoted = false;
        bool was_quoted = false;
        for (;; c = in_.get()) {
            if (c == EOF) {
                if (quoted) throw Error("unterminated quoted field");
                fields.push_back(std::move(field));
                return true;
            }
            const char ch = static_cast<char>(c);
            if (quoted) {
                if (ch == '"') {
                    if (in_.peek() == '"') {
                        field.push_back('"');
                        in_.get();
                    } else {
                        quoted = false;
                    }
                } else {
                    if (ch == '\n') ++line_;
                    field.push_back(ch);
                }
                continue;
            }
            if (ch == '"' && field.empty() && !was_quoted) {
                quoted = was_quoted = true;
            } else if (ch == ',') {
                fields.push_back(std::move(field));
                field.clear();
                was_quoted = false;
            } else if (ch == '\n' || ch == '\r') {
                if (ch == '\r' && in_.peek() == '\n') in_.get();
                ++line_;
                fields.push_back(std::move(field));
                return true;
            } else {
                field.push_back(ch);
            }
        }
    }

private:
    std::istream& in_;
    std::size_t line_ = 1;
};

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string format_score(double score) {
    std::ostringstream os;
    os.precision(17);
    os << score;
    return os.str();
}

void add_record(LoadResult& out, std::unordered_set<std::string>& seen, Review review, std::size_t line) {
    if (auto reason = validate_review(review)) {
        out.rejected.push_back({line, *reason});
        return;
    }
    if (!seen.insert(review.id).second)
        throw CorpusError("duplicate review id '" + review.id + "' at line " + std::to_string(line));
    out.set.reviews.push_back(std::move(review));
}

}  // namespace

std::optional<std::string> validate_review(const Review& r) {
    if (r.id.empty()) return "empty id";
    if (!std::isfinite(r.score) || r.score < 1.0 || r.score > 10.0) return "score out of range";
    if (r.positive_text.empty() && r.negative_text.empty()) return "both comments empty";
    return std::nullopt;
}

CorpusFormat format_from_path(const std::filesystem::path& path) {
    return lower_ascii(path.extension().string()) == ".csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
}

LoadResult load_reviews(const std::filesystem::path& path, CorpusFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError("cannot open corpus file '" + path.string() + "'");
    LoadResult out;
    out.set.provenance = {path.string(), utc_now()};
    std::unordered_set<std::string> seen;

    if (format == CorpusFormat::jsonl) {
        std::string text;
        for (std::size_t line = 1; std::getline(in, text); ++line) {
            if (!text.empty() && text.back() == '\r') text.pop_back();
            if (text.find_first_not_of(" \t") == std::string::npos) continue;
            Review review;
            try {
                review = review_from_json(json::parse(text));
            } catch (const std::exception& e) {
                out.rejected.push_back({line, std::string("malformed record: ") + e.what()});
                continue;
            }
            add_record(out, seen, std::move(review), line);
        }
        return out;
    }

    CsvReader reader(in);
    std::vector<std::string> fields;
    std::size_t line = 0;
    if (!reader.next(fields, line)) return out;
    if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < fields.size(); ++i) column[fields[i]] = i;
    for (const char* required : {"id", "hotel_id", "city", "score"})
        if (!column.count(required)) throw CorpusError(std::string("CSV header lacks column '") + required + "'");
    for (const auto& [name, _] : column)
        if (std::find(kColumns.begin(), kColumns.end(), name) == kColumns.end())
            throw CorpusError("CSV header has unknown column '" + name + "'");

    while (reader.next(fields, line)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != column.size()) {
            out.rejected.push_back({line, "malformed record: expected " + std::to_string(column.size()) +
                                              " fields, got " + std::to_string(fields.size())});
            continue;
        }
        auto get = [&](const char* name) -> std::optional<std::string> {
            const auto it = column.find(name);
            if (it == column.end()) return std::nullopt;
            return fields[it->second];
        };
        auto non_empty = [&](const char* name) -> std::optional<std::string> {
            auto v = get(name);
            if (v && v->empty()) return std::nullopt;
            return v;
        };
        Review review;
        try {
            review.id = *get("id");
            review.hotel_id = *get("hotel_id");
            review.city = *get("city");
            review.author_country = non_empty("author_country");
            review.positive_text = get("positive_text").value_or("");
            review.negative_text = get("negative_text").value_or("");
            review.score = parse_score_text(*get("score"));
            review.language = non_empty("language");
        } catch (const std::exception& e) {
            out.rejected.push_back({line, std::string("malformed record: ") + e.what()});
            continue;
        }
        add_record(out, seen, std::move(review), line);
    }
    return out;
}

ReviewSet load_reviews_strict(const std::filesystem::path& path, CorpusFormat format) {
    auto result = load_reviews(path, format);
    if (!result.rejected.empty()) {
        const auto& first = result.rejected.front();
        throw CorpusError(path.string() + ": " + std::to_string(result.rejected.size()) +
                          " rejected record(s); first at line " + std::to_string(first.line) + ": " + first.reason);
    }
    return std::move(result.set);
}

void save_reviews(const ReviewSet& set, const std::filesystem::path& path, CorpusFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CorpusError("cannot write '" + path.string() + "'");
    if (format == CorpusFormat::jsonl) {
        for (const auto& r : set.reviews) out << review_to_json(r).dump() << '\n';
        return;
    }
    for (std::size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
    out << '\n';
    for (const auto& r : set.reviews) {
        out << csv_escape(r.id) << ',' << csv_escape(r.hotel_id) << ',' << csv_escape(r.city) << ','
            << csv_escape(r.author_country.value_or("")) << ',' << csv_escape(r.positive_text) << ','
            << csv_escape(r.negative_text) << ',' << format_score(r.score) << ','
            << csv_escape(r.language.value_or("")) << '\n';
    }
}

std::string to_string(Polarity p) { return p == Polarity::positive ? "positive" : "negative"; }

Polarity polarity_from_string(const std::string& s) {
    const auto l = lower_ascii(s);
    if (l == "positive" || l == "pos") return Polarity::positive;
    if (l == "negative" || l == "neg") return Polarity::negative;
    throw Error("unknown polarity '" + s + "'");
}

std::string DocumentSet::name() const { return city + ":" + to_string(polarity); }

std::vector<DocumentSet> partition(const ReviewSet& set, const std::optional<std::string>& language_filter) {
    const auto wanted = language_filter ? std::optional(primary_subtag(*language_filter)) : std::nullopt;
    std::map<std::pair<std::string, int>, DocumentSet> groups;
    for (const auto& r : set.reviews) {
        if (wanted && (!r.language || primary_subtag(*r.language) != *wanted)) continue;
        auto route = [&](const std::string& text, Polarity p) {
            if (text.empty()) return;
            auto& g = groups[{r.city, static_cast<int>(p)}];
            g.city = r.city;
            g.polarity = p;
            g.docs.push_back({r.id, text, r.score});
        };
        route(r.positive_text, Polarity::positive);
        route(r.negative_text, Polarity::negative);
    }
    std::vector<DocumentSet> out;
    out.reserve(groups.size());
    for (auto& [_, g] : groups) out.push_back(std::move(g));
    return out;
}

void validate(const SyntheticSpec& spec) {
    if (spec.k_true < 1 || spec.vocab_per_topic < 1 || spec.docs < 1 || spec.doc_len < 1)
        throw Error("synthetic spec counts must be positive");
    if (!(spec.topic_mixing > 0.0)) throw Error("synthetic topic_mixing must be > 0");
    if (!(spec.zipf_exponent >= 0.0)) throw Error("synthetic zipf_exponent must be >= 0");
}

std::string pseudo_word(const std::string& prefix, int index) {
    std::string letters;
    do {
        letters.push_back(static_cast<char>('a' + index % 26));
        index /= 26;
    } while (index > 0);
    while (letters.size() < 3) letters.push_back('a');
    std::reverse(letters.begin(), letters.end());
    return prefix + letters;
}

namespace {

Eigen::VectorXd sample_dirichlet(Rng& rng, int k, double concentration) {
    Eigen::VectorXd theta(k);
    std::gamma_distribution<double> gamma(concentration, 1.0);
    double total = 0.0;
    for (int i = 0; i < k; ++i) total += theta[i] = gamma(rng);
    if (!(total > 0.0)) {
        // All draws underflowed; fall back to a single dominant topic.
        theta.setZero();
        theta[static_cast<Eigen::Index>(uniform_index(rng, k))] = 1.0;
        return theta;
    }
    return theta / total;
}

int sample_categorical(Rng& rng, const Eigen::Ref<const Eigen::VectorXd>& cumulative) {
    const double u = uniform01(rng) * cumulative[cumulative.size() - 1];
    const auto* begin = cumulative.data();
    const auto* it = std::upper_bound(begin, begin + cumulative.size(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - begin, cumulative.size() - 1));
}

Eigen::MatrixXd planted_topic_words(int k, int vocab_per_topic, double zipf) {
    const int v = k * vocab_per_topic;
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(k, v);
    Eigen::VectorXd weights(vocab_per_topic);
    for (int j = 0; j < vocab_per_topic; ++j) weights[j] = std::pow(j + 1.0, -zipf);
    weights /= weights.sum();
    for (int t = 0; t < k; ++t) phi.row(t).segment(t * vocab_per_topic, vocab_per_topic) = weights.transpose();
    return phi;
}

Eigen::MatrixXd row_cumsum(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd c = m;
    for (Eigen::Index r = 0; r < c.rows(); ++r)
        for (Eigen::Index j = 1; j < c.cols(); ++j) c(r, j) += c(r, j - 1);
    return c;
}

struct PlantedDoc {
    std::string text;
    Eigen::VectorXd theta;
    std::vector<int> topics;
};

PlantedDoc sample_doc(Rng& rng, const Eigen::MatrixXd& phi_cum, const std::vector<std::string>& words, int k,
                      double mixing, int len) {
    PlantedDoc doc;
    doc.theta = sample_dirichlet(rng, k, mixing);
    Eigen::VectorXd theta_cum = doc.theta;
    for (int i = 1; i < k; ++i) theta_cum[i] += theta_cum[i - 1];
    doc.topics.reserve(len);
    for (int n = 0; n < len; ++n) {
        const int z = sample_categorical(rng, theta_cum);
        const int w = sample_categorical(rng, phi_cum.row(z).transpose());
        if (n) doc.text.push_back(' ');
        doc.text += words[w];
        doc.topics.push_back(z);
    }
    return doc;
}

std::string padded(const std::string& stem, int n, int width) {
    std::string digits = std::to_string(n);
    while (static_cast<int>(digits.size()) < width) digits.insert(digits.begin(), '0');
    return stem + digits;
}

}  // namespace

SyntheticCorpus synth_corpus(const SyntheticSpec& spec) {
    validate(spec);
    Rng rng(spec.seed);
    SyntheticCorpus out;
    auto& truth = out.truth;
    const int v = spec.k_true * spec.vocab_per_topic;
    truth.words.reserve(v);
    for (int i = 0; i < v; ++i) truth.words.push_back(pseudo_word(spec.word_prefix, i));
    truth.topic_word = planted_topic_words(spec.k_true, spec.vocab_per_topic, spec.zipf_exponent);
    truth.doc_topic.resize(spec.docs, spec.k_true);
    const Eigen::MatrixXd phi_cum = row_cumsum(truth.topic_word);

    out.reviews.provenance = {"synthetic:seed=" + std::to_string(spec.seed), ""};
    for (int d = 0; d < spec.docs; ++d) {
        auto doc = sample_doc(rng, phi_cum, truth.words, spec.k_true, spec.topic_mixing, spec.doc_len);
        truth.doc_topic.row(d) = doc.theta.transpose();
        truth.token_topics.push_back(std::move(doc.topics));
        Review r;
        r.id = padded("doc", d, 5);
        r.hotel_id = padded("hotel", d % 10, 2);
        r.city = spec.city;
        r.positive_text = std::move(doc.text);
        r.score = std::round(10.0 * (1.0 + 9.0 * doc.theta[0])) / 10.0;
        out.reviews.reviews.push_back(std::move(r));
    }
    return out;
}

ReviewSet synth_review_corpus(const ReviewCorpusSpec& spec) {
    const std::size_t n_sets = spec.cities.size() * 2;
    if (spec.k_true.size() != n_sets) throw Error("k_true must list one topic count per (city, polarity)");
    if (spec.reviews_per_city < 1 || spec.hotels_per_city < 1 || spec.vocab_per_topic < 1 || spec.doc_len < 1)
        throw Error("review corpus counts must be positive");
    auto cities = spec.cities;
    std::sort(cities.begin(), cities.end());

    struct SetModel {
        int k;
        std::vector<std::string> words;
        Eigen::MatrixXd phi_cum;
        Eigen::VectorXd effect;
    };
    std::vector<SetModel> models;
    for (std::size_t s = 0; s < n_sets; ++s) {
        SetModel m;
        m.k = spec.k_true[s];
        if (m.k < 1) throw Error("k_true entries must be positive");
        const bool positive = s % 2 == 0;
        const std::string prefix = std::string(1, positive ? 'p' : 'n') + static_cast<char>('a' + (s / 2) % 26);
        for (int i = 0; i < m.k * spec.vocab_per_topic; ++i) m.words.push_back(pseudo_word(prefix, i));
        m.phi_cum = row_cumsum(planted_topic_words(m.k, spec.vocab_per_topic, 1.0));
        // Topic score effects: positive topics lift the score, negative ones lower it.
        m.effect = positive ? Eigen::VectorXd::LinSpaced(m.k, 0.2, 2.2) : Eigen::VectorXd::LinSpaced(m.k, -3.0, -0.6);
        models.push_back(std::move(m));
    }

    const std::vector<std::string> countries = {"Colombia", "Spain", "Mexico", "Argentina", "Chile", "Peru"};
    Rng rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.score_noise);
    ReviewSet out;
    out.provenance = {"synthetic:seed=" + std::to_string(spec.seed), ""};
    for (std::size_t c = 0; c < cities.size(); ++c) {
        for (int i = 0; i < spec.reviews_per_city; ++i) {
            const auto& pos = models[2 * c];
            const auto& neg = models[2 * c + 1];
            auto p = sample_doc(rng, pos.phi_cum, pos.words, pos.k, spec.topic_mixing, spec.doc_len);
            auto n = sample_doc(rng, neg.phi_cum, neg.words, neg.k, spec.topic_mixing, spec.doc_len);
            Review r;
            r.id = cities[c] + "-" + padded("r", i, 5);
            r.hotel_id = cities[c] + "-" + padded("h", static_cast<int>(uniform_index(rng, spec.hotels_per_city)), 3);
            r.city = cities[c];
            r.author_country = countries[uniform_index(rng, countries.size())];
            r.positive_text = std::move(p.text);
            r.negative_text = std::move(n.text);
            const double raw = 7.5 + p.theta.dot(pos.effect) + n.theta.dot(neg.effect) + noise(rng);
            r.score = std::round(10.0 * std::clamp(raw, 1.0, 10.0)) / 10.0;
            r.language = spec.language;
            out.reviews.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace qos
