#ifndef QOSTOPICS_PIPELINE_HPP
#define QOSTOPICS_PIPELINE_HPP

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qostopics/coherence.hpp"
#include "qostopics/corpus.hpp"
#include "qostopics/embed.hpp"
#include "qostopics/lda.hpp"
#include "qostopics/project.hpp"
#include "qostopics/stats.hpp"
#include "qostopics/svg.hpp"
#include "qostopics/textprep.hpp"

namespace qos {

/// A failure tagged with the pipeline stage it came from.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& cause) : Error(stage + ": " + cause), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// Raised for malformed configuration files, including unknown keys.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct PipelineConfig {
    std::string corpus;  // input paths as written; resolved against base_dir
    std::string stopwords;
    std::string lemmas;
    std::string output_dir = "out";  // relative to the working directory
    std::filesystem::path base_dir;
    int min_token_len = 2;
    std::optional<std::string> language;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::vector<std::string> sets;  // empty = every set in the corpus
    int vocab_min_count = 5;
    int label_words = 3;
    std::vector<int> k_values = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
    int runs = 20;
    LdaConfig lda;
    CoherenceConfig coherence;
    EmbedConfig embed;
    ProjectConfig project;
    AnalysisConfig analysis;
    std::vector<double> share_thresholds = {0.5, 0.6, 0.7, 0.8, 0.9};

    std::filesystem::path resolve(const std::string& p) const;
    std::filesystem::path out_dir() const { return output_dir; }
};

PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& cfg);
void validate(const PipelineConfig& cfg);

/// "bogota:positive" -> "bogota_positive", safe in file names.
std::string file_tag(const std::string& set_name);

/// Stage seed for a set: the global seed hashed with "<stage>/<set>".
std::uint64_t stage_seed(const PipelineConfig& cfg, const std::string& stage, const std::string& set_name);

struct Ingested {
    LoadResult load;
    std::vector<DocumentSet> sets;
};

Ingested ingest(const PipelineConfig& cfg);
std::vector<TokenDoc> prep_set(const DocumentSet& set, const PrepResources& res);
SweepResult sweep_set(const std::vector<TokenDoc>& docs, const PipelineConfig& cfg, const std::string& set_name);
LdaModel train_set(const std::vector<TokenDoc>& docs, int k, const PipelineConfig& cfg, const std::string& set_name);
EmbeddingModel embed_set(const std::vector<TokenDoc>& docs, const PipelineConfig& cfg, const std::string& set_name);

struct ProjectionOutput {
    std::vector<ScatterPoint> points;  // representative reviews with a known word
    std::optional<double> trustworthiness;
    int k_used = 0;
};

ProjectionOutput project_set(const LdaModel& model, const EmbeddingModel& embed, const std::vector<TokenDoc>& docs,
                             const PipelineConfig& cfg, const std::string& set_name);

struct SetAnalysis {
    double representative_share = 0.0;
    std::vector<std::pair<double, double>> share_curve;  // (tau, share)
    std::vector<int> representatives;                    // per topic
    std::vector<ScoreBox> boxes;                         // topics with >= 1 representative
    std::optional<AnovaResult> anova;
    std::optional<TukeyResult> tukey;
    std::vector<int> tested_topics;  // topic of each ANOVA group
    std::string skipped;             // why ANOVA/Tukey were not run
    std::vector<TopicMagnitude> magnitudes;
};

SetAnalysis analyze_set(const LdaModel& model, const std::vector<TokenDoc>& docs,
                        const std::vector<std::string>& hotel_of_doc, const PipelineConfig& cfg);

/// Machine label of a topic: its top words joined by " / ".
std::string topic_label(const LdaModel& model, int topic, int words);
std::vector<std::string> topic_labels(const LdaModel& model, int words);

nlohmann::json analysis_json(const SetAnalysis& a);
SetAnalysis analysis_from_json(const nlohmann::json& j);

void save_tokens(const std::vector<TokenDoc>& docs, const std::filesystem::path& path);
std::vector<TokenDoc> load_tokens(const std::filesystem::path& path);
SweepResult load_sweep_csv(const std::filesystem::path& path);
void save_projection_csv(const std::vector<ScatterPoint>& points, const std::filesystem::path& path);
std::vector<ScatterPoint> load_projection_csv(const std::filesystem::path& path);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Full pipeline: every output file plus report.json. Returns the report.
nlohmann::json run_pipeline(const PipelineConfig& cfg);

}  // namespace qos

#endif  // QOSTOPICS_PIPELINE_HPP
