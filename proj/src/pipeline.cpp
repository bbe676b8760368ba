#include "qostopics/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace qos {

using nlohmann::json;

namespace {

void expect_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void take(const json& obj, const char* key, T& out, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

Segmentation segmentation_from_string(const std::string& s) {
    if (s == "powerset") return Segmentation::powerset;
    if (s == "one_set_singletons") return Segmentation::one_set_singletons;
    throw ConfigError("unknown segmentation '" + s + "'");
}

std::string to_string(Segmentation s) { return s == Segmentation::powerset ? "powerset" : "one_set_singletons"; }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_nan(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

std::vector<std::vector<std::string>> texts(const std::vector<TokenDoc>& docs) { return token_lists(docs); }

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

json box_json(const ScoreBox& b) {
    return {{"topic", b.topic}, {"n", b.n},       {"min", b.min}, {"q1", b.q1},
            {"median", b.median}, {"q3", b.q3}, {"max", b.max}, {"outliers", b.outliers}};
}

ScoreBox box_from_json(const json& j) {
    ScoreBox b;
    b.topic = j.at("topic").get<int>();
    b.n = j.at("n").get<int>();
    b.min = j.at("min").get<double>();
    b.q1 = j.at("q1").get<double>();
    b.median = j.at("median").get<double>();
    b.q3 = j.at("q3").get<double>();
    b.max = j.at("max").get<double>();
    b.outliers = j.at("outliers").get<std::vector<double>>();
    return b;
}

json sweep_json(const SweepResult& s) {
    json means = json::array(), stds = json::array(), runs = json::array();
    for (std::size_t i = 0; i < s.k_values.size(); ++i) {
        means.push_back(finite_or_null(s.mean_coherence[i]));
        stds.push_back(finite_or_null(s.std_coherence[i]));
        json row = json::array();
        for (double v : s.run_coherence[i]) row.push_back(finite_or_null(v));
        runs.push_back(row);
    }
    return {{"k_values", s.k_values}, {"mean", means}, {"std", stds}, {"runs", s.runs}, {"run_coherence", runs}, {"best_k", s.best_k}};
}

}  // namespace

std::filesystem::path PipelineConfig::resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
}

PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    c.base_dir = base_dir;
    expect_keys(j,
                {"corpus", "stopwords", "lemmas", "output_dir", "min_token_len", "language", "seed", "threads", "sets",
                 "vocab_min_count", "label_words", "sweep", "lda", "coherence", "embed", "project", "analysis"},
                "config");
    for (const char* key : {"corpus", "stopwords", "lemmas"})
        if (!j.contains(key)) throw ConfigError(std::string("config is missing required key '") + key + "'");
    take(j, "corpus", c.corpus, "config");
    take(j, "stopwords", c.stopwords, "config");
    take(j, "lemmas", c.lemmas, "config");
    take(j, "output_dir", c.output_dir, "config");
    take(j, "min_token_len", c.min_token_len, "config");
    if (j.contains("language") && !j.at("language").is_null()) {
        std::string lang;
        take(j, "language", lang, "config");
        c.language = lang;
    }
    take(j, "seed", c.seed, "config");
    take(j, "threads", c.threads, "config");
    take(j, "sets", c.sets, "config");
    take(j, "vocab_min_count", c.vocab_min_count, "config");
    take(j, "label_words", c.label_words, "config");

    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        expect_keys(s, {"k_values", "runs"}, "sweep");
        take(s, "k_values", c.k_values, "sweep");
        take(s, "runs", c.runs, "sweep");
    }
    if (j.contains("lda")) {
        const auto& s = j.at("lda");
        expect_keys(s, {"alpha", "beta", "iterations", "burn_in", "sample_lag", "likelihood_interval", "initial_temperature"},
                    "lda");
        take(s, "alpha", c.lda.alpha, "lda");
        take(s, "beta", c.lda.beta, "lda");
        take(s, "iterations", c.lda.iterations, "lda");
        take(s, "burn_in", c.lda.burn_in, "lda");
        take(s, "sample_lag", c.lda.sample_lag, "lda");
        take(s, "likelihood_interval", c.lda.likelihood_interval, "lda");
        take(s, "initial_temperature", c.lda.initial_temperature, "lda");
    }
    if (j.contains("coherence")) {
        const auto& s = j.at("coherence");
        expect_keys(s, {"top_n", "window", "gamma", "epsilon", "segmentation"}, "coherence");
        take(s, "top_n", c.coherence.top_n, "coherence");
        take(s, "window", c.coherence.window, "coherence");
        take(s, "gamma", c.coherence.gamma, "coherence");
        take(s, "epsilon", c.coherence.epsilon, "coherence");
        std::string seg = to_string(c.coherence.segmentation);
        take(s, "segmentation", seg, "coherence");
        c.coherence.segmentation = segmentation_from_string(seg);
    }
    if (j.contains("embed")) {
        const auto& s = j.at("embed");
        expect_keys(s,
                    {"dim", "chain_len", "chain_len_max", "context_radius", "epochs", "negatives", "lr_initial",
                     "softmax_mode", "min_count"},
                    "embed");
        take(s, "dim", c.embed.dim, "embed");
        take(s, "chain_len", c.embed.chain_len, "embed");
        take(s, "chain_len_max", c.embed.chain_len_max, "embed");
        take(s, "context_radius", c.embed.context_radius, "embed");
        take(s, "epochs", c.embed.epochs, "embed");
        take(s, "negatives", c.embed.negatives, "embed");
        take(s, "lr_initial", c.embed.lr_initial, "embed");
        take(s, "min_count", c.embed.min_count, "embed");
        std::string mode = to_string(c.embed.softmax_mode);
        take(s, "softmax_mode", mode, "embed");
        try {
            c.embed.softmax_mode = softmax_mode_from_string(mode);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    if (j.contains("project")) {
        const auto& s = j.at("project");
        expect_keys(s, {"k_neighbors", "min_dist", "spread", "epochs", "negative_rate", "learning_rate", "init"}, "project");
        take(s, "k_neighbors", c.project.k_neighbors, "project");
        take(s, "min_dist", c.project.min_dist, "project");
        take(s, "spread", c.project.spread, "project");
        take(s, "epochs", c.project.epochs, "project");
        take(s, "negative_rate", c.project.negative_rate, "project");
        take(s, "learning_rate", c.project.learning_rate, "project");
        std::string init = to_string(c.project.init);
        take(s, "init", init, "project");
        try {
            c.project.init = project_init_from_string(init);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    if (j.contains("analysis")) {
        const auto& s = j.at("analysis");
        expect_keys(s, {"threshold", "alpha_sig", "share_thresholds"}, "analysis");
        take(s, "threshold", c.analysis.threshold, "analysis");
        take(s, "alpha_sig", c.analysis.alpha_sig, "analysis");
        take(s, "share_thresholds", c.share_thresholds, "analysis");
    }
    validate(c);
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    try {
        return config_from_json(j, path.parent_path());
    } catch (const Error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

json to_json(const PipelineConfig& c) {
    return {{"corpus", c.corpus},
            {"stopwords", c.stopwords},
            {"lemmas", c.lemmas},
            {"output_dir", c.output_dir},
            {"min_token_len", c.min_token_len},
            {"language", c.language ? json(*c.language) : json(nullptr)},
            {"seed", c.seed},
            {"threads", c.threads},
            {"sets", c.sets},
            {"vocab_min_count", c.vocab_min_count},
            {"label_words", c.label_words},
            {"sweep", {{"k_values", c.k_values}, {"runs", c.runs}}},
            {"lda",
             {{"alpha", c.lda.alpha},
              {"beta", c.lda.beta},
              {"iterations", c.lda.iterations},
              {"burn_in", c.lda.burn_in},
              {"sample_lag", c.lda.sample_lag},
              {"likelihood_interval", c.lda.likelihood_interval},
              {"initial_temperature", c.lda.initial_temperature}}},
            {"coherence",
             {{"top_n", c.coherence.top_n},
              {"window", c.coherence.window},
              {"gamma", c.coherence.gamma},
              {"epsilon", c.coherence.epsilon},
              {"segmentation", to_string(c.coherence.segmentation)}}},
            {"embed",
             {{"dim", c.embed.dim},
              {"chain_len", c.embed.chain_len},
              {"chain_len_max", c.embed.chain_len_max},
              {"context_radius", c.embed.context_radius},
              {"epochs", c.embed.epochs},
              {"negatives", c.embed.negatives},
              {"lr_initial", c.embed.lr_initial},
              {"softmax_mode", to_string(c.embed.softmax_mode)},
              {"min_count", c.embed.min_count}}},
            {"project",
             {{"k_neighbors", c.project.k_neighbors},
              {"min_dist", c.project.min_dist},
              {"spread", c.project.spread},
              {"epochs", c.project.epochs},
              {"negative_rate", c.project.negative_rate},
              {"learning_rate", c.project.learning_rate},
              {"init", to_string(c.project.init)}}},
            {"analysis",
             {{"threshold", c.analysis.threshold},
              {"alpha_sig", c.analysis.alpha_sig},
              {"share_thresholds", c.share_thresholds}}}};
}

void validate(const PipelineConfig& c) {
    try {
        if (c.corpus.empty()) throw Error("corpus path is empty");
        if (c.k_values.empty()) throw Error("sweep.k_values is empty");
        for (int k : c.k_values)
            if (k < 1) throw Error("sweep.k_values entries must be >= 1");
        if (c.runs < 1) throw Error("sweep.runs must be >= 1");
        if (c.vocab_min_count < 1) throw Error("vocab_min_count must be >= 1");
        if (c.label_words < 1) throw Error("label_words must be >= 1");
        if (c.min_token_len < 1) throw Error("min_token_len must be >= 1");
        LdaConfig lda = c.lda;
        lda.k = 1;
        validate(lda);
        validate(c.coherence);
        validate(c.embed);
        validate(c.project);
        validate(c.analysis);
        for (double t : c.share_thresholds)
            if (!(t > 0.0 && t < 1.0)) throw Error("analysis.share_thresholds must lie in (0, 1)");
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

std::string file_tag(const std::string& set_name) {
    std::string out;
    for (char c : set_name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
    return out;
}

std::uint64_t stage_seed(const PipelineConfig& cfg, const std::string& stage, const std::string& set_name) {
    return derive_seed(cfg.seed, stage + "/" + set_name);
}

Ingested ingest(const PipelineConfig& cfg) {
    return stage("ingest", [&] {
        const auto path = cfg.resolve(cfg.corpus);
        Ingested out;
        out.load = load_reviews(path, format_from_path(path));
        auto sets = partition(out.load.set, cfg.language);
        if (cfg.sets.empty()) {
            out.sets = std::move(sets);
        } else {
            for (const auto& want : cfg.sets) {
                const auto it = std::find_if(sets.begin(), sets.end(), [&](const DocumentSet& s) { return s.name() == want; });
                if (it == sets.end()) throw Error("document set '" + want + "' not found in " + path.string());
                out.sets.push_back(*it);
            }
        }
        if (out.sets.empty()) throw Error("no document sets in " + path.string());
        return out;
    });
}

std::vector<TokenDoc> prep_set(const DocumentSet& set, const PrepResources& res) {
    return stage("prep", [&] { return preprocess_set(set, res); });
}

SweepResult sweep_set(const std::vector<TokenDoc>& docs, const PipelineConfig& cfg, const std::string& set_name) {
    return stage("sweep", [&] {
        const auto corpus = make_bow_corpus(docs, cfg.vocab_min_count);
        return sweep_k(corpus, texts(docs), cfg.k_values, cfg.runs, cfg.lda, cfg.coherence, stage_seed(cfg, "sweep", set_name));
    });
}

LdaModel train_set(const std::vector<TokenDoc>& docs, int k, const PipelineConfig& cfg, const std::string& set_name) {
    return stage("train", [&] {
        LdaConfig lda = cfg.lda;
        lda.k = k;
        lda.seed = stage_seed(cfg, "train", set_name);
        return train_lda(make_bow_corpus(docs, cfg.vocab_min_count), lda);
    });
}

EmbeddingModel embed_set(const std::vector<TokenDoc>& docs, const PipelineConfig& cfg, const std::string& set_name) {
    return stage("embed", [&] {
        EmbedConfig e = cfg.embed;
        e.seed = stage_seed(cfg, "embed", set_name);
        e.threads = 1;
        return train_embeddings<float>(texts(docs), e);
    });
}

ProjectionOutput project_set(const LdaModel& model, const EmbeddingModel& embed, const std::vector<TokenDoc>& docs,
                             const PipelineConfig& cfg, const std::string& set_name) {
    return stage("project", [&] {
        if (docs.size() != model.num_docs()) throw Error("token documents do not align with the LDA model");
        ProjectionOutput out;
        std::vector<Eigen::VectorXd> rows;
        for (std::size_t d = 0; d < docs.size(); ++d) {
            if (docs[d].review_id != model.review_ids[d]) throw Error("review " + docs[d].review_id + " is out of order");
            const Eigen::VectorXd theta = doc_topic_dist(model, d);
            const auto topic = representative(theta, cfg.analysis.threshold);
            if (!topic) continue;
            const auto v = review_vector(embed, docs[d].tokens);
            if (v.oov) continue;
            rows.push_back(v.vector.cast<double>());
            out.points.push_back({docs[d].review_id, 0.0, 0.0, *topic, theta[*topic]});
        }
        // Too few points for a neighbor graph: nothing to lay out.
        if (rows.size() < 3) {
            out.points.clear();
            return out;
        }
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), embed.dim());
        for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        ProjectConfig p = cfg.project;
        p.seed = stage_seed(cfg, "project", set_name);
        p.threads = 1;
        p.k_neighbors = std::min<int>(p.k_neighbors, static_cast<int>(rows.size()) - 1);
        out.k_used = p.k_neighbors;
        const auto proj = project(x, p);
        for (std::size_t i = 0; i < out.points.size(); ++i) {
            out.points[i].x = proj.points(static_cast<Eigen::Index>(i), 0);
            out.points[i].y = proj.points(static_cast<Eigen::Index>(i), 1);
        }
        out.trustworthiness = proj.trustworthiness;
        return out;
    });
}

SetAnalysis analyze_set(const LdaModel& model, const std::vector<TokenDoc>& docs, const std::vector<std::string>& hotel_of_doc,
                        const PipelineConfig& cfg) {
    return stage("analyze", [&] {
        if (docs.size() != model.num_docs()) throw Error("token documents do not align with the LDA model");
        SetAnalysis a;
        const double tau = cfg.analysis.threshold;
        a.representative_share = representative_share(model, tau);
        for (double t : cfg.share_thresholds) a.share_curve.emplace_back(t, representative_share(model, t));
        std::vector<double> scores;
        for (const auto& d : docs) scores.push_back(d.score);
        const auto groups = score_groups(model, scores, tau);
        std::vector<std::vector<double>> tested;
        for (std::size_t t = 0; t < groups.size(); ++t) {
            a.representatives.push_back(static_cast<int>(groups[t].size()));
            if (groups[t].empty()) continue;
            a.boxes.push_back(box_stats(groups[t], static_cast<int>(t)));
            tested.push_back(groups[t]);
            a.tested_topics.push_back(static_cast<int>(t));
        }
        std::size_t total = 0;
        for (const auto& g : tested) total += g.size();
        if (tested.size() < 2) {
            a.skipped = "fewer than two topics have representative reviews";
        } else if (total <= tested.size()) {
            a.skipped = "too few representative reviews for a within-group variance";
        } else {
            try {
                a.anova = anova_oneway(tested);
                if (a.anova->ms_within > 0.0)
                    a.tukey = tukey_hsd(tested, cfg.analysis.alpha_sig);
                else
                    a.skipped = "zero within-group variance";
            } catch (const Error& e) {
                a.anova.reset();
                a.skipped = e.what();
            }
        }
        a.magnitudes = hotel_magnitudes(model, hotel_of_doc);
        return a;
    });
}

std::string topic_label(const LdaModel& model, int topic, int words) {
    std::string out;
    for (const auto& w : top_words(model, topic, words)) out += (out.empty() ? "" : " / ") + w.word;
    return out;
}

std::vector<std::string> topic_labels(const LdaModel& model, int words) {
    std::vector<std::string> out;
    for (int t = 0; t < model.num_topics(); ++t) out.push_back(topic_label(model, t, words));
    return out;
}

json analysis_json(const SetAnalysis& a) {
    json curve = json::array();
    for (const auto& [t, s] : a.share_curve) curve.push_back({{"threshold", t}, {"share", s}});
    json boxes = json::array();
    for (const auto& b : a.boxes) boxes.push_back(box_json(b));
    json anova = nullptr, tukey = nullptr;
    if (a.anova)
        anova = {{"f", finite_or_null(a.anova->f)},
                 {"df_between", a.anova->df_between},
                 {"df_within", a.anova->df_within},
                 {"p_value", a.anova->p_value},
                 {"ms_within", a.anova->ms_within},
                 {"topics", a.tested_topics}};
    if (a.tukey) {
        tukey = json::array();
        for (const auto& p : a.tukey->pairs)
            tukey.push_back({{"topic_i", a.tested_topics[static_cast<std::size_t>(p.i)]},
                             {"topic_j", a.tested_topics[static_cast<std::size_t>(p.j)]},
                             {"mean_diff", p.mean_diff},
                             {"q", p.q},
                             {"p_value", p.p_value},
                             {"significant", p.significant}});
    }
    json mags = json::array();
    for (const auto& m : a.magnitudes)
        mags.push_back({{"hotel_id", m.hotel_id}, {"topic", m.topic}, {"magnitude", m.magnitude}, {"reviews", m.reviews}});
    json j = {{"representative_share", a.representative_share},
              {"share_curve", curve},
              {"representatives", a.representatives},
              {"boxes", boxes},
              {"anova", anova},
              {"tukey", tukey},
              {"hotel_magnitudes", mags}};
    if (!a.skipped.empty()) j["tests_skipped"] = a.skipped;
    return j;
}

SetAnalysis analysis_from_json(const json& j) {
    SetAnalysis a;
    a.representative_share = j.at("representative_share").get<double>();
    for (const auto& c : j.at("share_curve")) a.share_curve.emplace_back(c.at("threshold").get<double>(), c.at("share").get<double>());
    a.representatives = j.at("representatives").get<std::vector<int>>();
    for (const auto& b : j.at("boxes")) a.boxes.push_back(box_from_json(b));
    if (!j.at("anova").is_null()) {
        const auto& s = j.at("anova");
        AnovaResult r;
        r.f = number_or_nan(s.at("f"));
        r.df_between = s.at("df_between").get<int>();
        r.df_within = s.at("df_within").get<int>();
        r.p_value = s.at("p_value").get<double>();
        r.ms_within = s.at("ms_within").get<double>();
        a.anova = r;
        a.tested_topics = s.at("topics").get<std::vector<int>>();
    }
    if (!j.at("tukey").is_null()) {
        TukeyResult t;
        for (const auto& p : j.at("tukey")) {
            TukeyPair pair;
            const int ti = p.at("topic_i").get<int>(), tj = p.at("topic_j").get<int>();
            pair.i = static_cast<int>(std::find(a.tested_topics.begin(), a.tested_topics.end(), ti) - a.tested_topics.begin());
            pair.j = static_cast<int>(std::find(a.tested_topics.begin(), a.tested_topics.end(), tj) - a.tested_topics.begin());
            pair.mean_diff = p.at("mean_diff").get<double>();
            pair.q = p.at("q").get<double>();
            pair.p_value = p.at("p_value").get<double>();
            pair.significant = p.at("significant").get<bool>();
            t.pairs.push_back(pair);
        }
        a.tukey = t;
    }
    for (const auto& m : j.at("hotel_magnitudes"))
        a.magnitudes.push_back({m.at("topic").get<int>(), m.at("hotel_id").get<std::string>(), m.at("magnitude").get<double>(),
                                m.at("reviews").get<int>()});
    if (j.contains("tests_skipped")) a.skipped = j.at("tests_skipped").get<std::string>();
    return a;
}

void save_tokens(const std::vector<TokenDoc>& docs, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& d : docs) out << json{{"id", d.review_id}, {"score", d.score}, {"tokens", d.tokens}}.dump() << '\n';
    write_text(path, out.str());
}

std::vector<TokenDoc> load_tokens(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string() + " (run the prep stage first)");
    std::vector<TokenDoc> docs;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            docs.push_back({j.at("id").get<std::string>(), j.at("tokens").get<std::vector<std::string>>(), j.at("score").get<double>()});
        } catch (const json::exception& e) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return docs;
}

SweepResult load_sweep_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string() + " (run the sweep stage first)");
    std::string line;
    std::getline(in, line);
    if (line != "K,mean,std,runs") throw Error(path.string() + ": unexpected header '" + line + "'");
    SweepResult s;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string k, mean, sd, runs;
        if (!std::getline(row, k, ',') || !std::getline(row, mean, ',') || !std::getline(row, sd, ',') || !std::getline(row, runs))
            throw Error(path.string() + ": malformed row '" + line + "'");
        auto parse = [](const std::string& v) { return v == "nan" || v.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(v); };
        s.k_values.push_back(std::stoi(k));
        s.mean_coherence.push_back(parse(mean));
        s.std_coherence.push_back(parse(sd));
        s.runs = std::stoi(runs);
        s.run_coherence.emplace_back();
    }
    if (s.k_values.empty()) throw Error(path.string() + " has no rows");
    s.best_k = select_best_k(s.k_values, s.mean_coherence);
    return s;
}

void save_projection_csv(const std::vector<ScatterPoint>& points, const std::filesystem::path& path) {
    std::ostringstream out;
    out.precision(17);
    out << "review_id,x,y,topic,prob\n";
    for (const auto& p : points) out << p.review_id << ',' << p.x << ',' << p.y << ',' << p.topic << ',' << p.prob << '\n';
    write_text(path, out.str());
}

std::vector<ScatterPoint> load_projection_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string() + " (run the project stage first)");
    std::string line;
    std::getline(in, line);
    if (line != "review_id,x,y,topic,prob") throw Error(path.string() + ": unexpected header '" + line + "'");
    std::vector<ScatterPoint> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string id, x, y, t, p;
        if (!std::getline(row, id, ',') || !std::getline(row, x, ',') || !std::getline(row, y, ',') || !std::getline(row, t, ',') ||
            !std::getline(row, p))
            throw Error(path.string() + ": malformed row '" + line + "'");
        out.push_back({id, std::stod(x), std::stod(y), std::stoi(t), std::stod(p)});
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

json run_pipeline(const PipelineConfig& cfg) {
    validate(cfg);
    const auto res = stage("prep", [&] {
        return load_resources(cfg.resolve(cfg.stopwords), cfg.resolve(cfg.lemmas), cfg.min_token_len);
    });
    const auto in = ingest(cfg);
    std::map<std::string, std::string> hotel_of;
    for (const auto& r : in.load.set.reviews) hotel_of.emplace(r.id, r.hotel_id);
    const auto out_dir = cfg.out_dir();

    std::vector<json> sections(in.sets.size());
    parallel_for(in.sets.size(), cfg.threads, [&](std::size_t i) {
        const auto& set = in.sets[i];
        const std::string name = set.name(), tag = file_tag(name);
        const auto docs = prep_set(set, res);
        save_tokens(docs, out_dir / ("tokens_" + tag + ".jsonl"));

        const auto sweep = sweep_set(docs, cfg, name);
        std::ostringstream csv;
        write_sweep_csv(sweep, csv);
        write_text(out_dir / ("sweep_" + tag + ".csv"), csv.str());

        const auto model = train_set(docs, sweep.best_k, cfg, name);
        save_lda(model, out_dir / ("lda_" + tag + ".json"));
        const auto embed = embed_set(docs, cfg, name);
        save_embeddings(embed, out_dir / ("embed_" + tag + ".bin"));
        const auto proj = project_set(model, embed, docs, cfg, name);
        save_projection_csv(proj.points, out_dir / ("projection_" + tag + ".csv"));

        std::vector<std::string> hotels;
        for (const auto& d : docs) hotels.push_back(hotel_of.at(d.review_id));
        const auto analysis = analyze_set(model, docs, hotels, cfg);
        const auto labels = topic_labels(model, cfg.label_words);

        stage("render", [&] {
            write_text(out_dir / ("sweep_" + tag + ".svg"), render_coherence_curve(sweep, name + " coherence"));
            write_text(out_dir / ("scatter_" + tag + ".svg"), render_scatter(proj.points, labels, name + " representative reviews"));
            if (!analysis.boxes.empty())
                write_text(out_dir / ("boxes_" + tag + ".svg"), render_boxplots(analysis.boxes, labels, name + " scores"));
            return 0;
        });

        const auto shares = topic_shares(model);
        std::vector<std::vector<std::string>> rep_ids(static_cast<std::size_t>(model.num_topics()));
        for (std::size_t d = 0; d < model.num_docs(); ++d)
            if (const auto t = representative(doc_topic_dist(model, d), cfg.analysis.threshold))
                rep_ids[static_cast<std::size_t>(*t)].push_back(model.review_ids[d]);
        json topics = json::array();
        for (int t = 0; t < model.num_topics(); ++t) {
            json words = json::array();
            for (const auto& w : top_words(model, t, cfg.coherence.top_n)) words.push_back({{"word", w.word}, {"prob", w.prob}});
            topics.push_back({{"topic", t},
                              {"label", labels[static_cast<std::size_t>(t)]},
                              {"share", shares[t]},
                              {"salience", salience(model, t, cfg.coherence.top_n)},
                              {"top_words", words},
                              {"representatives", analysis.representatives[static_cast<std::size_t>(t)]},
                              {"representative_ids", rep_ids[static_cast<std::size_t>(t)]}});
        }
        json points = json::array();
        for (const auto& p : proj.points)
            points.push_back({{"review_id", p.review_id}, {"x", p.x}, {"y", p.y}, {"topic", p.topic}, {"prob", p.prob}});
        json projection = {{"k_neighbors", proj.k_used},
                           {"trustworthiness", proj.trustworthiness ? json(*proj.trustworthiness) : json(nullptr)},
                           {"points", points}};
        json files = {"tokens_" + tag + ".jsonl", "sweep_" + tag + ".csv", "sweep_" + tag + ".svg", "lda_" + tag + ".json",
                      "embed_" + tag + ".bin", "projection_" + tag + ".csv", "scatter_" + tag + ".svg"};
        if (!analysis.boxes.empty()) files.push_back("boxes_" + tag + ".svg");
        sections[i] = {{"name", name},
                       {"city", set.city},
                       {"polarity", to_string(set.polarity)},
                       {"documents", docs.size()},
                       {"vocabulary", model.vocab.size()},
                       {"best_k", sweep.best_k},
                       {"coherence", sweep_json(sweep)},
                       {"topics", topics},
                       {"analysis", analysis_json(analysis)},
                       {"projection", projection},
                       {"files", files}};
    });

    json rejected = json::array();
    for (const auto& r : in.load.rejected) rejected.push_back({{"line", r.line}, {"reason", r.reason}});
    json report = {{"format", "qostopics-report"},
                   {"version", 1},
                   {"config", to_json(cfg)},
                   {"corpus", {{"reviews", in.load.set.reviews.size()}, {"rejected", rejected}}},
                   {"sets", sections}};
    write_text(out_dir / "report.json", report.dump(2) + "\n");
    return report;
}

}  // namespace qos
