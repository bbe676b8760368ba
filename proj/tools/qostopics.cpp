#include <CLI11.hpp>

#include "qostopics/pipeline.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string_view>

using namespace qos;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Override the global seed");
    cmd->add_option("--out", c.out, "Override the output directory");
    cmd->add_option("--set", c.sets, "Restrict to document sets (city:polarity); repeatable");
}

PipelineConfig configure(const Common& c) {
    auto cfg = load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.out) cfg.output_dir = *c.out;
    if (!c.sets.empty()) cfg.sets = c.sets;
    return cfg;
}

PrepResources resources(const PipelineConfig& cfg) {
    try {
        return load_resources(cfg.resolve(cfg.stopwords), cfg.resolve(cfg.lemmas), cfg.min_token_len);
    } catch (const std::exception& e) {
        throw StageError("prep", e.what());
    }
}

fs::path artifact(const PipelineConfig& cfg, const std::string& prefix, const std::string& set, const std::string& ext) {
    return cfg.out_dir() / (prefix + "_" + file_tag(set) + ext);
}

// Token documents of a set, from the prep stage's file when present.
std::vector<TokenDoc> docs_for(const PipelineConfig& cfg, const DocumentSet& set) {
    const auto path = artifact(cfg, "tokens", set.name(), ".jsonl");
    if (fs::exists(path)) return load_tokens(path);
    auto docs = prep_set(set, resources(cfg));
    save_tokens(docs, path);
    return docs;
}

template <typename F>
auto at_stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

void cmd_ingest(const PipelineConfig& cfg) {
    const auto in = ingest(cfg);
    nlohmann::json sets = nlohmann::json::array(), rejected = nlohmann::json::array();
    for (const auto& s : in.sets) sets.push_back({{"name", s.name()}, {"documents", s.docs.size()}});
    for (const auto& r : in.load.rejected) rejected.push_back({{"line", r.line}, {"reason", r.reason}});
    write_text(cfg.out_dir() / "ingest.json",
               nlohmann::json{{"reviews", in.load.set.reviews.size()}, {"rejected", rejected}, {"sets", sets}}.dump(2) + "\n");
    std::cout << in.load.set.reviews.size() << " reviews, " << in.load.rejected.size() << " rejected\n";
    for (const auto& s : in.sets) std::cout << "  " << s.name() << ": " << s.docs.size() << " documents\n";
}

void cmd_prep(const PipelineConfig& cfg) {
    const auto res = resources(cfg);
    for (const auto& set : ingest(cfg).sets) {
        const auto docs = prep_set(set, res);
        save_tokens(docs, artifact(cfg, "tokens", set.name(), ".jsonl"));
        std::cout << set.name() << ": " << docs.size() << " documents\n";
    }
}

void cmd_sweep(const PipelineConfig& cfg) {
    for (const auto& set : ingest(cfg).sets) {
        const auto sweep = sweep_set(docs_for(cfg, set), cfg, set.name());
        std::ostringstream csv;
        write_sweep_csv(sweep, csv);
        write_text(artifact(cfg, "sweep", set.name(), ".csv"), csv.str());
        write_text(artifact(cfg, "sweep", set.name(), ".svg"), render_coherence_curve(sweep, set.name() + " coherence"));
        std::cout << set.name() << ": best K = " << sweep.best_k << "\n";
    }
}

void cmd_train(const PipelineConfig& cfg, std::optional<int> k) {
    for (const auto& set : ingest(cfg).sets) {
        const int chosen = k ? *k : at_stage("train", [&] { return load_sweep_csv(artifact(cfg, "sweep", set.name(), ".csv")).best_k; });
        const auto model = train_set(docs_for(cfg, set), chosen, cfg, set.name());
        at_stage("train", [&] {
            save_lda(model, artifact(cfg, "lda", set.name(), ".json"));
            return 0;
        });
        std::cout << set.name() << ": trained K = " << chosen << "\n";
    }
}

void cmd_embed(const PipelineConfig& cfg) {
    for (const auto& set : ingest(cfg).sets) {
        const auto model = embed_set(docs_for(cfg, set), cfg, set.name());
        at_stage("embed", [&] {
            save_embeddings(model, artifact(cfg, "embed", set.name(), ".bin"));
            return 0;
        });
        std::cout << set.name() << ": " << model.words.size() << " words, " << model.chains.size() << " chains\n";
    }
}

void cmd_project(const PipelineConfig& cfg) {
    for (const auto& set : ingest(cfg).sets) {
        const auto docs = docs_for(cfg, set);
        const auto model = at_stage("project", [&] { return load_lda(artifact(cfg, "lda", set.name(), ".json")); });
        const auto embed = at_stage("project", [&] { return load_embeddings(artifact(cfg, "embed", set.name(), ".bin")); });
        const auto proj = project_set(model, embed, docs, cfg, set.name());
        at_stage("project", [&] {
            save_projection_csv(proj.points, artifact(cfg, "projection", set.name(), ".csv"));
            return 0;
        });
        std::cout << set.name() << ": " << proj.points.size() << " points";
        if (proj.trustworthiness) std::cout << ", trustworthiness " << *proj.trustworthiness;
        std::cout << "\n";
    }
}

void cmd_analyze(const PipelineConfig& cfg) {
    const auto in = ingest(cfg);
    std::map<std::string, std::string> hotel_of;
    for (const auto& r : in.load.set.reviews) hotel_of.emplace(r.id, r.hotel_id);
    for (const auto& set : in.sets) {
        const auto docs = docs_for(cfg, set);
        const auto model = at_stage("analyze", [&] { return load_lda(artifact(cfg, "lda", set.name(), ".json")); });
        std::vector<std::string> hotels;
        for (const auto& d : docs) hotels.push_back(hotel_of.at(d.review_id));
        const auto a = analyze_set(model, docs, hotels, cfg);
        at_stage("analyze", [&] {
            write_text(artifact(cfg, "analysis", set.name(), ".json"), analysis_json(a).dump(2) + "\n");
            return 0;
        });
        std::cout << set.name() << ": representative share " << a.representative_share;
        if (a.anova) std::cout << ", ANOVA F " << a.anova->f << " p " << a.anova->p_value;
        std::cout << "\n";
    }
}

void cmd_render(const PipelineConfig& cfg) {
    for (const auto& set : ingest(cfg).sets) {
        at_stage("render", [&] {
            const auto name = set.name();
            const auto sweep = load_sweep_csv(artifact(cfg, "sweep", name, ".csv"));
            write_text(artifact(cfg, "sweep", name, ".svg"), render_coherence_curve(sweep, name + " coherence"));
            const auto labels = topic_labels(load_lda(artifact(cfg, "lda", name, ".json")), cfg.label_words);
            write_text(artifact(cfg, "scatter", name, ".svg"),
                       render_scatter(load_projection_csv(artifact(cfg, "projection", name, ".csv")), labels,
                                      name + " representative reviews"));
            std::ifstream in(artifact(cfg, "analysis", name, ".json"));
            if (!in) throw Error("cannot read " + artifact(cfg, "analysis", name, ".json").string() + " (run analyze first)");
            const auto a = analysis_from_json(nlohmann::json::parse(in));
            if (!a.boxes.empty()) write_text(artifact(cfg, "boxes", name, ".svg"), render_boxplots(a.boxes, labels, name + " scores"));
            return 0;
        });
        std::cout << set.name() << ": rendered\n";
    }
}

void cmd_run(const PipelineConfig& cfg) {
    const auto report = run_pipeline(cfg);
    for (const auto& s : report.at("sets"))
        std::cout << s.at("name").get<std::string>() << ": best K = " << s.at("best_k") << ", representative share "
                  << s.at("analysis").at("representative_share") << "\n";
    std::cout << "report: " << (cfg.out_dir() / "report.json").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Topic extraction and review-mining pipeline for hotel reviews"};
    app.require_subcommand(1);

    Common common;
    std::optional<int> k;
    std::map<std::string, CLI::App*> cmds;
    const std::vector<std::pair<std::string, std::string>> stages = {
        {"ingest", "Load and validate the corpus, list document sets"},
        {"prep", "Tokenize, remove stopwords and lemmatize each set"},
        {"sweep", "Coherence sweep over K per set"},
        {"train", "Train the final LDA model per set"},
        {"embed", "Train subword embeddings per set"},
        {"project", "Project representative reviews to 2D"},
        {"analyze", "Representative shares, score boxes, ANOVA and Tukey HSD"},
        {"render", "Render SVG figures from stage outputs"},
        {"run", "Run every stage and write report.json"}};
    for (const auto& [name, help] : stages) {
        auto* cmd = app.add_subcommand(name, help);
        add_common(cmd, common);
        cmds[name] = cmd;
    }
    cmds["train"]->add_option("--k", k, "Number of topics (default: best K from the sweep)")->check(CLI::PositiveNumber);

    auto* synth = app.add_subcommand("synth", "Write a synthetic review corpus with planted topics");
    ReviewCorpusSpec spec;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output corpus (.jsonl or .csv)")->required();
    synth->add_option("--seed", spec.seed, "Generator seed");
    synth->add_option("--reviews-per-city", spec.reviews_per_city, "Reviews per city");
    synth->add_option("--hotels-per-city", spec.hotels_per_city, "Hotels per city");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const auto set = at_stage("synth", [&] { return synth_review_corpus(spec); });
            at_stage("synth", [&] {
                const fs::path out(synth_out);
                if (out.has_parent_path()) fs::create_directories(out.parent_path());
                save_reviews(set, out, format_from_path(out));
                return 0;
            });
            std::cout << set.reviews.size() << " reviews written to " << synth_out << "\n";
            return 0;
        }
        const auto cfg = at_stage("config", [&] { return configure(common); });
        if (cmds["ingest"]->parsed()) cmd_ingest(cfg);
        if (cmds["prep"]->parsed()) cmd_prep(cfg);
        if (cmds["sweep"]->parsed()) cmd_sweep(cfg);
        if (cmds["train"]->parsed()) cmd_train(cfg, k);
        if (cmds["embed"]->parsed()) cmd_embed(cfg);
        if (cmds["project"]->parsed()) cmd_project(cfg);
        if (cmds["analyze"]->parsed()) cmd_analyze(cfg);
        if (cmds["render"]->parsed()) cmd_render(cfg);
        if (cmds["run"]->parsed()) cmd_run(cfg);
    } catch (const StageError& e) {
        std::cerr << "error [" << e.stage() << "] " << std::string_view(e.what()).substr(e.stage().size() + 2) << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
