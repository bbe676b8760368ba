#include "qostopics/lda.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numeric>

namespace qos {

void validate(const LdaConfig& cfg) {
    if (cfg.k < 1) throw Error("LDA k must be >= 1");
    if (!(cfg.alpha > 0.0) || !(cfg.beta > 0.0)) throw Error("LDA alpha and beta must be > 0");
    if (cfg.iterations < 1) throw Error("LDA iterations must be >= 1");
    if (cfg.burn_in < 0 || cfg.burn_in >= cfg.iterations) throw Error("LDA burn_in must lie in [0, iterations)");
    if (cfg.sample_lag < 1) throw Error("LDA sample_lag must be >= 1");
    if (cfg.likelihood_interval < 0) throw Error("LDA likelihood_interval must be >= 0");
    if (!(cfg.initial_temperature >= 1.0)) throw Error("LDA initial_temperature must be >= 1");
}

double collapsed_log_likelihood(const std::vector<int>& nkw, const std::vector<int>& nk, int k, int v, double beta) {
    const double lg_beta = std::lgamma(beta);
    double ll = k * (std::lgamma(v * beta) - v * lg_beta);
    for (int t = 0; t < k; ++t) ll -= std::lgamma(nk[t] + v * beta);
    // Zero counts contribute lgamma(beta), already folded into the constant term.
    for (int c : nkw)
        if (c > 0) ll += std::lgamma(c + beta) - lg_beta;
    return ll;
}

LdaModel train_lda(const BowCorpus& corpus, const LdaConfig& cfg) {
    validate(cfg);
    if (corpus.docs.empty()) throw Error("cannot train LDA on an empty corpus");
    const int k = cfg.k;
    const int v = static_cast<int>(corpus.vocab.size());
    const auto d_count = corpus.docs.size();

    // Token word ids per document, expanded from the bags.
    std::vector<std::vector<int>> words(d_count);
    long total_tokens = 0;
    for (std::size_t d = 0; d < d_count; ++d) {
        for (const auto& [w, c] : corpus.docs[d]) {
            if (w < 0 || w >= v) throw Error("bag-of-words index out of vocabulary range");
            words[d].insert(words[d].end(), c, w);
        }
        total_tokens += static_cast<long>(words[d].size());
    }
    if (total_tokens == 0) throw Error("cannot train LDA on an empty corpus (no in-vocabulary tokens)");

    Rng rng(cfg.seed);
    std::vector<int> ndk(d_count * k, 0), nkw(static_cast<std::size_t>(v) * k, 0), nk(k, 0);
    std::vector<std::vector<int>> z(d_count);
    std::vector<double> cumulative(k);
    const double v_beta = v * cfg.beta;
    for (std::size_t d = 0; d < d_count; ++d) {
        z[d].resize(words[d].size());
        for (std::size_t i = 0; i < words[d].size(); ++i) {
            const int t = static_cast<int>(uniform_index(rng, k));
            z[d][i] = t;
            ++ndk[d * k + t];
            ++nkw[static_cast<std::size_t>(words[d][i]) * k + t];
            ++nk[t];
        }
    }

    LdaModel model;
    model.config = cfg;
    model.vocab = corpus.vocab;
    model.review_ids = corpus.review_ids;
    Eigen::MatrixXd phi_sum = Eigen::MatrixXd::Zero(k, v);
    Eigen::MatrixXd theta_sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d_count), k);
    int samples = 0;

    auto accumulate = [&] {
        for (int t = 0; t < k; ++t) {
            const double denom = nk[t] + v_beta;
            for (int w = 0; w < v; ++w) phi_sum(t, w) += (nkw[static_cast<std::size_t>(w) * k + t] + cfg.beta) / denom;
        }
        for (std::size_t d = 0; d < d_count; ++d) {
            const double denom = static_cast<double>(words[d].size()) + k * cfg.alpha;
            for (int t = 0; t < k; ++t) theta_sum(static_cast<Eigen::Index>(d), t) += (ndk[d * k + t] + cfg.alpha) / denom;
        }
        ++samples;
    };

    // Tempered burn-in: the conditional is raised to 1/T, with T decaying
    // geometrically from initial_temperature to 1 over the first half of burn-in.
    const int anneal_sweeps = cfg.initial_temperature > 1.0 ? cfg.burn_in / 2 : 0;
    std::size_t max_doc = 0;
    for (const auto& doc : words) max_doc = std::max(max_doc, doc.size());
    std::vector<double> doc_pow, word_pow, topic_pow;

    for (int sweep = 1; sweep <= cfg.iterations; ++sweep) {
        const bool tempered = sweep <= anneal_sweeps;
        if (tempered) {
            const double inv_t = std::pow(cfg.initial_temperature, -(1.0 - static_cast<double>(sweep - 1) / anneal_sweeps));
            auto fill = [inv_t](std::vector<double>& table, std::size_t n, double offset, double sign) {
                table.resize(n + 1);
                for (std::size_t c = 0; c <= n; ++c) table[c] = std::pow(static_cast<double>(c) + offset, sign * inv_t);
            };
            fill(doc_pow, max_doc, cfg.alpha, 1.0);
            fill(word_pow, static_cast<std::size_t>(total_tokens), cfg.beta, 1.0);
            fill(topic_pow, static_cast<std::size_t>(total_tokens), v_beta, -1.0);
        }
        for (std::size_t d = 0; d < d_count; ++d) {
            int* doc_counts = &ndk[d * k];
            for (std::size_t i = 0; i < words[d].size(); ++i) {
                const int w = words[d][i];
                int* word_counts = &nkw[static_cast<std::size_t>(w) * k];
                const int old = z[d][i];
                --doc_counts[old];
                --word_counts[old];
                --nk[old];
                double total = 0.0;
                if (tempered) {
                    for (int t = 0; t < k; ++t) {
                        total += doc_pow[doc_counts[t]] * word_pow[word_counts[t]] * topic_pow[nk[t]];
                        cumulative[t] = total;
                    }
                } else {
                    for (int t = 0; t < k; ++t) {
                        total += (doc_counts[t] + cfg.alpha) * (word_counts[t] + cfg.beta) / (nk[t] + v_beta);
                        cumulative[t] = total;
                    }
                }
                const double u = uniform01(rng) * total;
                int t = 0;
                while (t < k - 1 && cumulative[t] <= u) ++t;
                z[d][i] = t;
                ++doc_counts[t];
                ++word_counts[t];
                ++nk[t];
            }
        }
        if (std::accumulate(nk.begin(), nk.end(), 0L) != total_tokens)
            throw std::logic_error("Gibbs sweep changed the total token count");
        if (cfg.likelihood_interval > 0 && sweep % cfg.likelihood_interval == 0)
            model.log_likelihood.emplace_back(sweep, collapsed_log_likelihood(nkw, nk, k, v, cfg.beta));
        if (sweep > cfg.burn_in && (sweep - cfg.burn_in) % cfg.sample_lag == 0) accumulate();
    }
    if (samples == 0) accumulate();

    model.topic_word = phi_sum / samples;
    model.doc_topic = theta_sum / samples;
    // Averaging preserves row sums up to rounding; renormalise to keep 1e-9 exactness.
    model.topic_word.array().colwise() /= model.topic_word.rowwise().sum().array();
    model.doc_topic.array().colwise() /= model.doc_topic.rowwise().sum().array();
    model.assignments = std::move(z);
    return model;
}

Eigen::VectorXd doc_topic_dist(const LdaModel& model, std::size_t doc) {
    if (doc >= model.num_docs()) throw Error("document index " + std::to_string(doc) + " out of range");
    return model.doc_topic.row(static_cast<Eigen::Index>(doc)).transpose();
}

namespace {

void check_topic(const LdaModel& model, int topic) {
    if (topic < 0 || topic >= model.num_topics())
        throw Error("topic index " + std::to_string(topic) + " out of range");
}

}  // namespace

std::vector<WordProb> top_words(const LdaModel& model, int topic, int n) {
    check_topic(model, topic);
    const auto v = static_cast<int>(model.topic_word.cols());
    std::vector<int> order(v);
    std::iota(order.begin(), order.end(), 0);
    const int take = std::clamp(n, 0, v);
    const auto row = model.topic_word.row(topic);
    // Vocabulary indices are alphabetical, so index order breaks ties alphabetically.
    std::partial_sort(order.begin(), order.begin() + take, order.end(), [&](int a, int b) {
        if (row[a] != row[b]) return row[a] > row[b];
        return a < b;
    });
    std::vector<WordProb> out;
    out.reserve(take);
    for (int i = 0; i < take; ++i) out.push_back({model.vocab.word(order[i]), row[order[i]]});
    return out;
}

double salience(const LdaModel& model, int topic, int n) {
    double s = 0.0;
    for (const auto& wp : top_words(model, topic, n)) s += wp.prob;
    return s;
}

Eigen::VectorXd topic_shares(const LdaModel& model) {
    if (model.num_docs() == 0) return Eigen::VectorXd::Zero(model.num_topics());
    return 100.0 * model.doc_topic.colwise().mean().transpose();
}

namespace {

using nlohmann::json;

json matrix_json(const Eigen::MatrixXd& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto flat = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols) throw Error("matrix data length mismatch");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
    return m;
}

}  // namespace

void save_lda(const LdaModel& model, const std::filesystem::path& path) {
    const auto& c = model.config;
    json j = {{"format", "qostopics-lda"},
              {"version", 1},
              {"config",
               {{"k", c.k},
                {"alpha", c.alpha},
                {"beta", c.beta},
                {"iterations", c.iterations},
                {"burn_in", c.burn_in},
                {"sample_lag", c.sample_lag},
                {"seed", c.seed}}},
              {"seed", c.seed},
              {"vocab", model.vocab.words()},
              {"vocab_counts", model.vocab.counts()},
              {"review_ids", model.review_ids},
              {"topic_word", matrix_json(model.topic_word)},
              {"doc_topic", matrix_json(model.doc_topic)}};
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << j.dump(1) << '\n';
}

LdaModel load_lda(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open LDA model '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
        if (j.at("format") != "qostopics-lda") throw Error("not an LDA model file");
        LdaModel m;
        const auto& c = j.at("config");
        m.config.k = c.at("k");
        m.config.alpha = c.at("alpha");
        m.config.beta = c.at("beta");
        m.config.iterations = c.at("iterations");
        m.config.burn_in = c.at("burn_in");
        m.config.sample_lag = c.at("sample_lag");
        m.config.seed = c.at("seed");
        m.vocab = Vocabulary(j.at("vocab").get<std::vector<std::string>>(), j.at("vocab_counts").get<std::vector<long>>());
        m.review_ids = j.at("review_ids").get<std::vector<std::string>>();
        m.topic_word = matrix_from_json(j.at("topic_word"));
        m.doc_topic = matrix_from_json(j.at("doc_topic"));
        if (m.topic_word.rows() != m.config.k || m.topic_word.cols() != static_cast<Eigen::Index>(m.vocab.size()) ||
            m.doc_topic.cols() != m.config.k || m.doc_topic.rows() != static_cast<Eigen::Index>(m.review_ids.size()))
            throw Error("inconsistent matrix shapes");
        return m;
    } catch (const json::exception& e) {
        throw Error("malformed LDA model '" + path.string() + "': " + e.what());
    } catch (const Error& e) {
        throw Error("malformed LDA model '" + path.string() + "': " + e.what());
    }
}

}  // namespace qos
