#include "qostopics/embed.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace qos {

namespace {

constexpr char32_t kOpen = U'⟨';
constexpr char32_t kClose = U'⟩';
constexpr char kMagic[8] = {'Q', 'O', 'S', 'E', 'M', 'B', '1', '\0'};

template <bool Shared, typename S>
S load(S& x) {
    if constexpr (Shared)
        return std::atomic_ref<S>(x).load(std::memory_order_relaxed);
    else
        return x;
}

template <bool Shared, typename S>
void store(S& x, S v) {
    if constexpr (Shared)
        std::atomic_ref<S>(x).store(v, std::memory_order_relaxed);
    else
        x = v;
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// -log sigmoid(x), stable at both ends.
double neg_log_sigmoid(double x) {
    return x >= 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

std::vector<int> context_of(const std::vector<int>& doc, std::size_t i, int radius) {
    std::vector<int> ctx;
    const std::size_t lo = i >= static_cast<std::size_t>(radius) ? i - radius : 0;
    const std::size_t hi = std::min(doc.size(), i + radius + 1);
    for (std::size_t j = lo; j < hi; ++j)
        if (j != i) ctx.push_back(doc[j]);
    return ctx;
}

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xffu));
}

void put_u64(std::ostream& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint64_t get_uint(std::istream& in, int bytes) {
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b) {
        const int c = in.get();
        if (c == EOF) throw Error("truncated embedding model file");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * b);
    }
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const auto n = get_uint(in, 4);
    std::string s(n, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw Error("truncated embedding model file");
    return s;
}

template <typename Scalar>
void put_matrix(std::ostream& out, const RowMatrix<Scalar>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i])));
}

RowMatrix<float> get_matrix(std::istream& in, std::size_t rows, std::size_t cols) {
    RowMatrix<float> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_uint(in, 4)));
    return m;
}

nlohmann::json config_json(const EmbedConfig& cfg) {
    return {{"dim", cfg.dim},
            {"chain_len", cfg.chain_len},
            {"chain_len_max", cfg.chain_len_max},
            {"context_radius", cfg.context_radius},
            {"epochs", cfg.epochs},
            {"negatives", cfg.negatives},
            {"lr_initial", cfg.lr_initial},
            {"seed", cfg.seed},
            {"softmax_mode", to_string(cfg.softmax_mode)},
            {"min_count", cfg.min_count}};
}

EmbedConfig config_from_json(const nlohmann::json& j) {
    EmbedConfig cfg;
    cfg.dim = j.at("dim").get<int>();
    cfg.chain_len = j.at("chain_len").get<int>();
    cfg.chain_len_max = j.at("chain_len_max").get<int>();
    cfg.context_radius = j.at("context_radius").get<int>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.negatives = j.at("negatives").get<int>();
    cfg.lr_initial = j.at("lr_initial").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.softmax_mode = softmax_mode_from_string(j.at("softmax_mode").get<std::string>());
    cfg.min_count = j.at("min_count").get<int>();
    return cfg;
}

int chain_max(const EmbedConfig& cfg) { return cfg.chain_len_max > 0 ? cfg.chain_len_max : cfg.chain_len; }

// Mean of the context words' chain-averaged vectors.
template <bool Shared, typename Scalar>
void hidden(const BasicEmbeddingModel<Scalar>& m, const Scalar* chains, const std::vector<int>& ctx, std::vector<double>& h) {
    const int n = m.dim();
    std::fill(h.begin(), h.end(), 0.0);
    for (int c : ctx) {
        const auto& ids = m.word_chains[static_cast<std::size_t>(c)];
        const double w = 1.0 / (static_cast<double>(ids.size()) * static_cast<double>(ctx.size()));
        for (int id : ids) {
            const Scalar* row = chains + static_cast<std::ptrdiff_t>(id) * n;
            for (int k = 0; k < n; ++k) h[k] += w * load<Shared>(const_cast<Scalar&>(row[k]));
        }
    }
}

struct NoiseTable {
    std::vector<double> cumulative;

    explicit NoiseTable(const std::vector<long>& counts) {
        double total = 0.0;
        for (long c : counts) cumulative.push_back(total += std::pow(static_cast<double>(c), 0.75));
    }
    int draw(Rng& rng) const {
        const double u = uniform01(rng) * cumulative.back();
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(), static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
    }
};

// One SGD step on one target. Returns its loss.
template <bool Shared, typename Scalar>
double sgd_step(BasicEmbeddingModel<Scalar>& m, const std::vector<int>& ctx, int target, double lr, const NoiseTable& noise,
                Rng& rng, std::vector<double>& h, std::vector<double>& grad_h, std::vector<double>& scores) {
    const int n = m.dim();
    Scalar* chains = m.chain_vectors.data();
    Scalar* out = m.output_vectors.data();
    hidden<Shared>(m, chains, ctx, h);
    std::fill(grad_h.begin(), grad_h.end(), 0.0);

    auto update_output = [&](int word, double g) {
        Scalar* row = out + static_cast<std::ptrdiff_t>(word) * n;
        for (int k = 0; k < n; ++k) {
            const double o = load<Shared>(row[k]);
            grad_h[k] += g * o;
            store<Shared>(row[k], static_cast<Scalar>(o - lr * g * h[k]));
        }
    };
    auto score = [&](int word) {
        const Scalar* row = out + static_cast<std::ptrdiff_t>(word) * n;
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += h[k] * load<Shared>(const_cast<Scalar&>(row[k]));
        return s;
    };

    double loss = 0.0;
    if (m.config.softmax_mode == SoftmaxMode::exact) {
        const int v = static_cast<int>(m.words.size());
        double top = -INFINITY;
        for (int w = 0; w < v; ++w) top = std::max(top, scores[w] = score(w));
        double z = 0.0;
        for (int w = 0; w < v; ++w) z += std::exp(scores[w] - top);
        loss = std::log(z) + top - scores[target];
        for (int w = 0; w < v; ++w) update_output(w, std::exp(scores[w] - top) / z - (w == target ? 1.0 : 0.0));
    } else {
        const double st = score(target);
        loss += neg_log_sigmoid(st);
        update_output(target, sigmoid(st) - 1.0);
        for (int i = 0; i < m.config.negatives; ++i) {
            const int w = noise.draw(rng);
            if (w == target) continue;
            const double s = score(w);
            loss += neg_log_sigmoid(-s);
            update_output(w, sigmoid(s));
        }
    }

    for (int c : ctx) {
        const auto& ids = m.word_chains[static_cast<std::size_t>(c)];
        const double w = lr / (static_cast<double>(ids.size()) * static_cast<double>(ctx.size()));
        for (int id : ids) {
            Scalar* row = chains + static_cast<std::ptrdiff_t>(id) * n;
            for (int k = 0; k < n; ++k) store<Shared>(row[k], static_cast<Scalar>(load<Shared>(row[k]) - w * grad_h[k]));
        }
    }
    return loss;
}

template <bool Shared, typename Scalar>
void train_range(BasicEmbeddingModel<Scalar>& m, const std::vector<std::vector<int>>& docs, const std::vector<std::size_t>& order,
                 std::size_t begin, std::size_t end, const NoiseTable& noise, Rng& rng, std::atomic<long>& processed,
                 double total_steps, double& loss, long& steps) {
    const auto n = static_cast<std::size_t>(m.dim());
    std::vector<double> h(n), grad_h(n), scores(m.words.size());
    for (std::size_t o = begin; o < end; ++o) {
        const auto& doc = docs[order[o]];
        for (std::size_t i = 0; i < doc.size(); ++i) {
            const auto ctx = context_of(doc, i, m.config.context_radius);
            if (ctx.empty()) continue;
            const double done = static_cast<double>(processed.fetch_add(1, std::memory_order_relaxed));
            const double lr = m.config.lr_initial * std::max(0.0, 1.0 - done / total_steps);
            loss += sgd_step<Shared>(m, ctx, doc[i], lr, noise, rng, h, grad_h, scores);
            ++steps;
        }
    }
}

}  // namespace

std::string to_string(SoftmaxMode mode) { return mode == SoftmaxMode::exact ? "exact" : "negative_sampling"; }

SoftmaxMode softmax_mode_from_string(const std::string& s) {
    if (s == "exact") return SoftmaxMode::exact;
    if (s == "negative_sampling") return SoftmaxMode::negative_sampling;
    throw Error("unknown softmax mode '" + s + "'");
}

void validate(const EmbedConfig& cfg) {
    if (cfg.dim < 2) throw Error("embedding dim must be >= 2");
    if (cfg.chain_len < 2) throw Error("chain_len must be >= 2");
    if (cfg.chain_len_max != 0 && cfg.chain_len_max < cfg.chain_len) throw Error("chain_len_max must be 0 or >= chain_len");
    if (cfg.context_radius < 1) throw Error("context_radius must be >= 1");
    if (cfg.epochs < 0) throw Error("epochs must be >= 0");
    if (cfg.negatives < 1) throw Error("negatives must be >= 1");
    if (!(cfg.lr_initial > 0.0)) throw Error("lr_initial must be > 0");
    if (cfg.min_count < 1) throw Error("embedding min_count must be >= 1");
}

std::vector<std::string> ngram_chains(std::string_view word, int n) {
    if (word.empty()) throw Error("ngram_chains needs a non-empty word");
    if (n < 1) throw Error("chain length must be >= 1");
    std::u32string wrapped;
    wrapped += kOpen;
    wrapped += utf8_decode(word);
    wrapped += kClose;
    const auto len = static_cast<std::size_t>(n);
    if (wrapped.size() <= len) return {utf8_encode(wrapped)};
    std::vector<std::string> out;
    for (std::size_t i = 0; i + len <= wrapped.size(); ++i) out.push_back(utf8_encode(std::u32string_view(wrapped).substr(i, len)));
    return out;
}

std::vector<std::string> ngram_chains(std::string_view word, int n_min, int n_max) {
    std::vector<std::string> out;
    for (int n = n_min; n <= n_max; ++n) {
        auto part = ngram_chains(word, n);
        // A short word yields the same whole-word chain for every longer n.
        for (auto& c : part)
            if (n == n_min || std::find(out.begin(), out.end(), c) == out.end()) out.push_back(std::move(c));
    }
    return out;
}

ChainVocabulary::ChainVocabulary(const std::vector<std::string>& words, int n_min, int n_max) : n_min_(n_min), n_max_(n_max) {
    std::set<std::string> all;
    for (const auto& w : words)
        for (auto& c : ngram_chains(w, n_min, n_max)) all.insert(std::move(c));
    chains_.assign(all.begin(), all.end());
    for (std::size_t i = 0; i < chains_.size(); ++i) index_.emplace(chains_[i], static_cast<int>(i));
}

int ChainVocabulary::find(const std::string& chain) const {
    const auto it = index_.find(chain);
    return it == index_.end() ? -1 : it->second;
}

std::vector<int> ChainVocabulary::decompose(std::string_view word) const {
    std::vector<int> ids;
    if (word.empty()) return ids;
    for (const auto& c : ngram_chains(word, n_min_, n_max_))
        if (const int id = find(c); id >= 0) ids.push_back(id);
    return ids;
}

template <typename Scalar>
Composed<Scalar> word_vector(const BasicEmbeddingModel<Scalar>& model, std::string_view word) {
    Composed<Scalar> r{Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(model.dim()), true};
    const auto ids = model.chains.decompose(word);
    if (ids.empty()) return r;
    for (int id : ids) r.vector += model.chain_vectors.row(id).transpose();
    r.vector /= static_cast<Scalar>(ids.size());
    r.oov = false;
    return r;
}

template <typename Scalar>
Composed<Scalar> review_vector(const BasicEmbeddingModel<Scalar>& model, const std::vector<std::string>& tokens) {
    Composed<Scalar> r{Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(model.dim()), true};
    int used = 0;
    for (const auto& t : tokens) {
        const auto w = word_vector(model, t);
        if (w.oov) continue;
        r.vector += w.vector;
        ++used;
    }
    if (used == 0) return r;
    r.vector /= static_cast<Scalar>(used);
    r.oov = false;
    return r;
}

template <typename Scalar>
BasicEmbeddingModel<Scalar> init_embeddings(const std::vector<std::vector<std::string>>& docs, const EmbedConfig& cfg) {
    validate(cfg);
    bool any = false;
    for (const auto& d : docs) any = any || !d.empty();
    if (!any) throw Error("cannot train embeddings on an empty corpus");
    BasicEmbeddingModel<Scalar> m;
    m.config = cfg;
    m.words = build_vocab(docs, cfg.min_count);
    m.chains = ChainVocabulary(m.words.words(), cfg.chain_len, chain_max(cfg));
    for (const auto& w : m.words.words()) m.word_chains.push_back(m.chains.decompose(w));
    Rng rng(derive_seed(cfg.seed, "embed-init"));
    const double bound = 1.0 / cfg.dim;
    m.chain_vectors.resize(static_cast<Eigen::Index>(m.chains.size()), cfg.dim);
    for (Eigen::Index i = 0; i < m.chain_vectors.size(); ++i)
        m.chain_vectors.data()[i] = static_cast<Scalar>((2.0 * uniform01(rng) - 1.0) * bound);
    m.output_vectors = RowMatrix<Scalar>::Zero(static_cast<Eigen::Index>(m.words.size()), cfg.dim);
    return m;
}

template <typename Scalar>
BasicEmbeddingModel<Scalar> train_embeddings(const std::vector<std::vector<std::string>>& docs, const EmbedConfig& cfg) {
    auto m = init_embeddings<Scalar>(docs, cfg);

    std::vector<std::vector<int>> ids;
    for (const auto& d : docs) {
        std::vector<int> seq;
        for (const auto& t : d)
            if (const auto w = m.words.find(t)) seq.push_back(*w);
        if (!seq.empty()) ids.push_back(std::move(seq));
    }
    std::sort(ids.begin(), ids.end());

    long per_epoch = 0;
    for (const auto& d : ids)
        if (d.size() > 1) per_epoch += static_cast<long>(d.size());
    if (per_epoch == 0) return m;  // no token has a context
    const double total_steps = static_cast<double>(per_epoch) * cfg.epochs;
    const NoiseTable noise(m.words.counts());
    std::atomic<long> processed{0};
    std::vector<std::size_t> order(ids.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle(derive_seed(cfg.seed, "embed-epoch-" + std::to_string(epoch)));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle, i)]);

        const unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(order.size())));
        std::vector<double> loss(workers, 0.0);
        std::vector<long> steps(workers, 0);
        parallel_for(workers, workers, [&](std::size_t w) {
            Rng rng(derive_seed(cfg.seed, "embed-worker-" + std::to_string(epoch) + "-" + std::to_string(w)));
            const std::size_t begin = order.size() * w / workers, end = order.size() * (w + 1) / workers;
            if (workers == 1)
                train_range<false>(m, ids, order, begin, end, noise, rng, processed, total_steps, loss[w], steps[w]);
            else
                train_range<true>(m, ids, order, begin, end, noise, rng, processed, total_steps, loss[w], steps[w]);
        });
        double sum = 0.0;
        long count = 0;
        for (unsigned w = 0; w < workers; ++w) {
            sum += loss[w];
            count += steps[w];
        }
        m.epoch_loss.push_back(count ? sum / static_cast<double>(count) : 0.0);
        if (!m.chain_vectors.allFinite() || !m.output_vectors.allFinite())
            throw Error("embedding training diverged; lower lr_initial");
    }
    return m;
}

template <typename Scalar>
Scalar exact_loss(const BasicEmbeddingModel<Scalar>& m, const std::vector<int>& context, int target) {
    if (context.empty()) throw Error("CBOW context is empty");
    std::vector<double> h(static_cast<std::size_t>(m.dim()));
    hidden<false>(m, m.chain_vectors.data(), context, h);
    const Eigen::Map<const Eigen::VectorXd> hv(h.data(), m.dim());
    const Eigen::VectorXd s = m.output_vectors.template cast<double>() * hv;
    const double top = s.maxCoeff();
    return static_cast<Scalar>(std::log((s.array() - top).exp().sum()) + top - s[target]);
}

template <typename Scalar>
CbowGradient<Scalar> exact_gradient(const BasicEmbeddingModel<Scalar>& m, const std::vector<int>& context, int target) {
    if (context.empty()) throw Error("CBOW context is empty");
    std::vector<double> h(static_cast<std::size_t>(m.dim()));
    hidden<false>(m, m.chain_vectors.data(), context, h);
    const Eigen::Map<const Eigen::VectorXd> hv(h.data(), m.dim());
    const Eigen::MatrixXd out = m.output_vectors.template cast<double>();
    const Eigen::VectorXd s = out * hv;
    Eigen::VectorXd g = (s.array() - s.maxCoeff()).exp();
    g /= g.sum();
    g[target] -= 1.0;

    CbowGradient<Scalar> grad;
    grad.output_vectors = (g * hv.transpose()).template cast<Scalar>();
    const Eigen::VectorXd grad_h = out.transpose() * g;
    grad.chain_vectors = RowMatrix<Scalar>::Zero(m.chain_vectors.rows(), m.chain_vectors.cols());
    for (int c : context) {
        const auto& ids = m.word_chains[static_cast<std::size_t>(c)];
        const double w = 1.0 / (static_cast<double>(ids.size()) * static_cast<double>(context.size()));
        for (int id : ids) grad.chain_vectors.row(id) += (w * grad_h).transpose().template cast<Scalar>();
    }
    return grad;
}

template <typename Scalar>
void save_embeddings(const BasicEmbeddingModel<Scalar>& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write embedding model " + path.string());
    out.write(kMagic, sizeof kMagic);
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(m.dim()));
    put_u32(out, static_cast<std::uint32_t>(m.chains.size()));
    put_u32(out, static_cast<std::uint32_t>(m.words.size()));
    for (const auto& c : m.chains.chains()) put_string(out, c);
    for (std::size_t i = 0; i < m.words.size(); ++i) {
        put_string(out, m.words.word(i));
        put_u64(out, static_cast<std::uint64_t>(m.words.counts()[i]));
    }
    put_matrix(out, m.chain_vectors);
    put_matrix(out, m.output_vectors);
    if (!out) throw Error("failed writing embedding model " + path.string());

    auto sidecar = path;
    sidecar += ".json";
    std::ofstream js(sidecar);
    if (!js) throw Error("cannot write " + sidecar.string());
    nlohmann::json j{{"format", "qostopics-embeddings"},
                     {"version", 1},
                     {"config", config_json(m.config)},
                     {"epoch_loss", m.epoch_loss}};
    js << j.dump(2) << '\n';
}

EmbeddingModel load_embeddings(const std::filesystem::path& path) {
    auto sidecar = path;
    sidecar += ".json";
    std::ifstream js(sidecar);
    if (!js) throw Error("cannot read " + sidecar.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(js);
    } catch (const nlohmann::json::exception& e) {
        throw Error(sidecar.string() + ": " + e.what());
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read embedding model " + path.string());
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic))
        throw Error(path.string() + " is not an embedding model file");
    if (get_uint(in, 4) != 1) throw Error(path.string() + ": unsupported embedding model version");

    EmbeddingModel m;
    try {
        m.config = config_from_json(j.at("config"));
        m.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(sidecar.string() + ": " + e.what());
    }
    const auto dim = get_uint(in, 4), n_chains = get_uint(in, 4), n_words = get_uint(in, 4);
    if (dim != static_cast<std::uint64_t>(m.config.dim)) throw Error(path.string() + ": dim disagrees with sidecar");
    std::vector<std::string> chain_names;
    for (std::uint64_t i = 0; i < n_chains; ++i) chain_names.push_back(get_string(in));
    std::vector<std::string> words;
    std::vector<long> counts;
    for (std::uint64_t i = 0; i < n_words; ++i) {
        words.push_back(get_string(in));
        counts.push_back(static_cast<long>(get_uint(in, 8)));
    }
    m.words = Vocabulary(words, counts);
    m.chains = ChainVocabulary(words, m.config.chain_len, chain_max(m.config));
    if (m.chains.chains() != chain_names) throw Error(path.string() + ": chain table does not match the vocabulary");
    for (const auto& w : m.words.words()) m.word_chains.push_back(m.chains.decompose(w));
    m.chain_vectors = get_matrix(in, n_chains, dim);
    m.output_vectors = get_matrix(in, n_words, dim);
    return m;
}

#define QOS_EMBED_INSTANTIATE(S)                                                                                       \
    template Composed<S> word_vector(const BasicEmbeddingModel<S>&, std::string_view);                                \
    template Composed<S> review_vector(const BasicEmbeddingModel<S>&, const std::vector<std::string>&);               \
    template BasicEmbeddingModel<S> init_embeddings(const std::vector<std::vector<std::string>>&, const EmbedConfig&); \
    template BasicEmbeddingModel<S> train_embeddings(const std::vector<std::vector<std::string>>&, const EmbedConfig&); \
    template S exact_loss(const BasicEmbeddingModel<S>&, const std::vector<int>&, int);                               \
    template CbowGradient<S> exact_gradient(const BasicEmbeddingModel<S>&, const std::vector<int>&, int);             \
    template void save_embeddings(const BasicEmbeddingModel<S>&, const std::filesystem::path&);

QOS_EMBED_INSTANTIATE(float)
QOS_EMBED_INSTANTIATE(double)

}  // namespace qos
