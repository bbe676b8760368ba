#include "qostopics/coherence.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <ostream>
#include <unordered_map>

namespace qos {

void validate(const CoherenceConfig& cfg) {
    if (cfg.top_n < 2) throw Error("coherence top_n must be >= 2");
    if (cfg.window < 1) throw Error("coherence window must be >= 1");
    if (!(cfg.epsilon > 0.0)) throw Error("coherence epsilon must be > 0");
    if (!(cfg.gamma > 0.0)) throw Error("coherence gamma must be > 0");
}

std::size_t WindowCounts::index_of(const std::string& w) const {
    const auto it = std::find(words.begin(), words.end(), w);
    if (it == words.end()) throw Error("word '" + w + "' is not in the counted set");
    return static_cast<std::size_t>(it - words.begin());
}

WindowCounts window_counts_ids(const std::vector<std::vector<int>>& docs, const std::vector<int>& words,
                               std::vector<std::string> labels, int s) {
    if (s < 1) throw Error("window size must be >= 1");
    const auto n = words.size();
    if (n > 64) throw Error("at most 64 words can be counted at once");
    if (labels.size() != n) throw Error("word labels and ids differ in length");

    std::unordered_map<int, int> position;
    for (std::size_t i = 0; i < n; ++i)
        if (words[i] >= 0 && !position.emplace(words[i], static_cast<int>(i)).second)
            throw Error("duplicate word '" + labels[i] + "' in the counted set");

    // Histogram of presence masks over all windows.
    std::unordered_map<std::uint64_t, long> masks;
    long total = 0;
    std::vector<int> in_window(n);
    std::vector<int> pos;
    for (const auto& doc : docs) {
        if (doc.empty()) continue;
        pos.resize(doc.size());
        for (std::size_t t = 0; t < doc.size(); ++t) {
            const auto it = position.find(doc[t]);
            pos[t] = it == position.end() ? -1 : it->second;
        }
        const std::size_t len = doc.size();
        const std::size_t width = std::min<std::size_t>(len, static_cast<std::size_t>(s));
        std::fill(in_window.begin(), in_window.end(), 0);
        std::uint64_t mask = 0;
        auto add = [&](int p) {
            if (p >= 0 && in_window[p]++ == 0) mask |= std::uint64_t{1} << p;
        };
        auto remove = [&](int p) {
            if (p >= 0 && --in_window[p] == 0) mask &= ~(std::uint64_t{1} << p);
        };
        for (std::size_t t = 0; t < width; ++t) add(pos[t]);
        ++masks[mask];
        ++total;
        for (std::size_t start = 1; start + width <= len; ++start) {
            remove(pos[start - 1]);
            add(pos[start + width - 1]);
            ++masks[mask];
            ++total;
        }
    }
    if (total == 0) throw Error("cannot count windows over an empty corpus");

    WindowCounts out;
    out.words = std::move(labels);
    out.window_total = total;
    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto& [m, c] : masks) {
        for (std::uint64_t a = m; a; a &= a - 1) {
            const int i = std::countr_zero(a);
            for (std::uint64_t b = a; b; b &= b - 1) {
                const int j = std::countr_zero(b);
                joint(i, j) += static_cast<double>(c);
            }
        }
    }
    joint = joint.selfadjointView<Eigen::Upper>();
    out.pair_prob = joint / static_cast<double>(total);
    out.word_prob = out.pair_prob.diagonal();
    return out;
}

WindowCounts window_counts(const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& words,
                           int s) {
    std::unordered_map<std::string, int> ids;
    std::vector<int> word_ids;
    for (const auto& w : words) {
        const auto [it, inserted] = ids.emplace(w, static_cast<int>(ids.size()));
        if (!inserted) throw Error("duplicate word '" + w + "' in the counted set");
        word_ids.push_back(it->second);
    }
    std::vector<std::vector<int>> mapped;
    mapped.reserve(docs.size());
    for (const auto& doc : docs) {
        std::vector<int> m;
        m.reserve(doc.size());
        for (const auto& t : doc) {
            const auto it = ids.find(t);
            m.push_back(it == ids.end() ? -1 : it->second);
        }
        mapped.push_back(std::move(m));
    }
    return window_counts_ids(mapped, word_ids, words, s);
}

double npmi(const WindowCounts& counts, std::size_t i, std::size_t j, double gamma, double epsilon) {
    const auto n = counts.words.size();
    if (i >= n || j >= n) throw Error("NPMI word index out of range");
    const double pi = counts.word_prob[static_cast<Eigen::Index>(i)];
    const double pj = counts.word_prob[static_cast<Eigen::Index>(j)];
    if (!(pi > 0.0) || !(pj > 0.0))
        throw Error("NPMI undefined: word '" + counts.words[pi > 0.0 ? j : i] + "' has zero probability");
    const double joint = counts.pair_prob(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) + epsilon;
    const double denom = std::log(joint);
    // Both words in every window: the ratio is 0/0 in the limit; perfect association.
    if (denom >= 0.0) return 1.0;
    const double value = -std::log(joint / (pi * pj)) / denom;
    if (gamma == 1.0) return value;
    return std::copysign(std::pow(std::abs(value), gamma), value);
}

double npmi(const WindowCounts& counts, const std::string& a, const std::string& b, double gamma, double epsilon) {
    return npmi(counts, counts.index_of(a), counts.index_of(b), gamma, epsilon);
}

Eigen::MatrixXd npmi_matrix(const WindowCounts& counts, double gamma, double epsilon) {
    const auto n = static_cast<Eigen::Index>(counts.words.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            m(i, j) = npmi(counts, static_cast<std::size_t>(i), static_cast<std::size_t>(j), gamma, epsilon);
    return m;
}

Eigen::VectorXd context_vector(const WindowCounts& counts, const std::vector<std::size_t>& subset, double gamma,
                               double epsilon) {
    if (subset.empty()) throw Error("context vector of an empty word subset");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(counts.words.size()));
    for (const auto i : subset)
        for (std::size_t j = 0; j < counts.words.size(); ++j)
            v[static_cast<Eigen::Index>(j)] += npmi(counts, i, j, gamma, epsilon);
    return v;
}

namespace {

double cosine(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
    const double na = a.norm(), nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateTopicError("zero-norm context vector");
    return a.dot(b) / (na * nb);
}

}  // namespace

double topic_coherence(const WindowCounts& counts, const CoherenceConfig& cfg) {
    const auto n = counts.words.size();
    if (n < 1) throw Error("topic coherence of an empty word set");
    const Eigen::MatrixXd m = npmi_matrix(counts, cfg.gamma, cfg.epsilon);
    const Eigen::VectorXd whole = m.colwise().sum().transpose();

    if (cfg.segmentation == Segmentation::one_set_singletons) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) sum += cosine(m.row(i).transpose(), whole);
        return sum / static_cast<double>(n);
    }

    if (n > 16) throw Error("power-set segmentation supports at most 16 words");
    // v(mask) = v(mask without its lowest bit) + v(lowest bit), built in mask order.
    const std::size_t subsets = std::size_t{1} << n;
    Eigen::MatrixXd v(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(subsets));
    v.col(0).setZero();
    double sum = 0.0;
    for (std::size_t mask = 1; mask < subsets; ++mask) {
        const int low = std::countr_zero(mask);
        v.col(static_cast<Eigen::Index>(mask)) =
            v.col(static_cast<Eigen::Index>(mask & (mask - 1))) + m.row(low).transpose();
        sum += cosine(v.col(static_cast<Eigen::Index>(mask)), whole);
    }
    return sum / static_cast<double>(subsets - 1);
}

CoherenceReport model_coherence(const LdaModel& model, const std::vector<std::vector<std::string>>& docs,
                                const CoherenceConfig& cfg) {
    validate(cfg);
    CoherenceReport report;
    report.config = cfg;
    // Map documents onto model vocabulary ids once; other tokens never match.
    std::vector<std::vector<int>> mapped;
    mapped.reserve(docs.size());
    for (const auto& doc : docs) {
        std::vector<int> ids;
        ids.reserve(doc.size());
        for (const auto& t : doc) ids.push_back(model.vocab.find(t).value_or(-1));
        mapped.push_back(std::move(ids));
    }
    double sum = 0.0;
    int valid = 0;
    for (int t = 0; t < model.num_topics(); ++t) {
        const auto top = top_words(model, t, cfg.top_n);
        std::vector<int> ids;
        std::vector<std::string> labels;
        for (const auto& wp : top) {
            ids.push_back(*model.vocab.find(wp.word));
            labels.push_back(wp.word);
        }
        double c = std::numeric_limits<double>::quiet_NaN();
        try {
            c = topic_coherence(window_counts_ids(mapped, ids, std::move(labels), cfg.window), cfg);
        } catch (const DegenerateTopicError&) {
        } catch (const Error&) {
            // A top word absent from every window; NPMI is undefined.
        }
        report.per_topic.push_back(c);
        if (std::isnan(c)) {
            report.degenerate.push_back(t);
        } else {
            sum += c;
            ++valid;
        }
    }
    report.mean = valid ? sum / valid : std::numeric_limits<double>::quiet_NaN();
    return report;
}

int select_best_k(const std::vector<int>& k_values, const std::vector<double>& means) {
    if (k_values.empty() || k_values.size() != means.size()) throw Error("sweep results are empty or misaligned");
    int best = -1;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k_values.size(); ++i) {
        if (!std::isfinite(means[i])) continue;
        if (best < 0 || means[i] > best_mean || (means[i] == best_mean && k_values[i] < best)) {
            best = k_values[i];
            best_mean = means[i];
        }
    }
    if (best < 0) throw Error("no K produced a finite coherence");
    return best;
}

SweepResult sweep_k(const BowCorpus& corpus, const std::vector<std::vector<std::string>>& token_docs,
                    const std::vector<int>& k_values, int runs, const LdaConfig& lda, const CoherenceConfig& cfg,
                    std::uint64_t base_seed, unsigned threads) {
    if (runs < 1) throw Error("sweep runs must be >= 1");
    if (k_values.empty()) throw Error("sweep K range is empty");
    validate(cfg);
    const std::size_t nk = k_values.size();
    std::vector<double> scores(nk * static_cast<std::size_t>(runs));
    parallel_for(scores.size(), threads, [&](std::size_t idx) {
        LdaConfig c = lda;
        c.k = k_values[idx / static_cast<std::size_t>(runs)];
        c.seed = base_seed + idx % static_cast<std::size_t>(runs);
        c.likelihood_interval = 0;
        scores[idx] = model_coherence(train_lda(corpus, c), token_docs, cfg).mean;
    });

    SweepResult out;
    out.k_values = k_values;
    out.runs = runs;
    for (std::size_t i = 0; i < nk; ++i) {
        std::vector<double> row(scores.begin() + static_cast<std::ptrdiff_t>(i * runs),
                                scores.begin() + static_cast<std::ptrdiff_t>((i + 1) * runs));
        double sum = 0.0;
        int n = 0;
        for (double s : row)
            if (std::isfinite(s)) sum += s, ++n;
        const double mean = n ? sum / n : std::numeric_limits<double>::quiet_NaN();
        double ss = 0.0;
        for (double s : row)
            if (std::isfinite(s)) ss += (s - mean) * (s - mean);
        out.mean_coherence.push_back(mean);
        out.std_coherence.push_back(n > 1 ? std::sqrt(ss / (n - 1)) : 0.0);
        out.run_coherence.push_back(std::move(row));
    }
    out.best_k = select_best_k(out.k_values, out.mean_coherence);
    return out;
}

void write_sweep_csv(const SweepResult& sweep, std::ostream& out) {
    out << "K,mean,std,runs\n";
    const auto old = out.precision(17);
    for (std::size_t i = 0; i < sweep.k_values.size(); ++i)
        out << sweep.k_values[i] << ',' << sweep.mean_coherence[i] << ',' << sweep.std_coherence[i] << ','
            << sweep.runs << '\n';
    out.precision(old);
}

}  // namespace qos
