#include <doctest.h>

#include "qostopics/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace qos;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto at = s.find(needle); at != std::string::npos; at = s.find(needle, at + 1)) ++n;
    return n;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("qostopics_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json small_config_json() {
    return json::parse(R"({
      "corpus": "reviews.jsonl",
      "stopwords": "stop.txt",
      "lemmas": "lemmas.tsv",
      "language": "es",
      "seed": 11,
      "threads": 2,
      "vocab_min_count": 2,
      "sweep": {"k_values": [2, 3, 4], "runs": 2},
      "lda": {"iterations": 60, "burn_in": 40, "sample_lag": 5},
      "coherence": {"top_n": 5},
      "embed": {"dim": 12, "epochs": 2},
      "project": {"k_neighbors": 8, "epochs": 40}
    })");
}

// Writes a small 4-set corpus plus resources and returns the config.
PipelineConfig small_setup(const fs::path& dir) {
    ReviewCorpusSpec spec;
    spec.reviews_per_city = 120;
    spec.hotels_per_city = 4;
    spec.k_true = {3, 3, 2, 3};
    spec.vocab_per_topic = 12;
    spec.seed = 5;
    save_reviews(synth_review_corpus(spec), dir / "reviews.jsonl", CorpusFormat::jsonl);
    write_text(dir / "stop.txt", "el\nla\n");
    write_text(dir / "lemmas.tsv", "");
    auto cfg = config_from_json(small_config_json(), dir);
    cfg.output_dir = (dir / "out").string();
    return cfg;
}

}  // namespace

TEST_CASE("config parsing") {
    const auto cfg = config_from_json(small_config_json(), "/base");
    CHECK(cfg.k_values == std::vector<int>{2, 3, 4});
    CHECK(cfg.runs == 2);
    CHECK(cfg.lda.iterations == 60);
    CHECK(cfg.coherence.top_n == 5);
    CHECK(cfg.resolve(cfg.corpus) == fs::path("/base/reviews.jsonl"));
    CHECK(cfg.resolve("/abs/x") == fs::path("/abs/x"));
    CHECK(cfg.out_dir() == fs::path("out"));

    // to_json round trip.
    const auto again = config_from_json(to_json(cfg), "/base");
    CHECK(to_json(again) == to_json(cfg));

    auto bad = small_config_json();
    bad["seeed"] = 3;
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = small_config_json();
    bad["lda"]["alpah"] = 0.1;
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = small_config_json();
    bad.erase("stopwords");
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = small_config_json();
    bad["sweep"]["runs"] = "two";
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = small_config_json();
    bad["sweep"]["runs"] = 0;
    CHECK_THROWS_AS(validate(config_from_json(bad)), ConfigError);
}

TEST_CASE("file tags and stage seeds") {
    CHECK(file_tag("bogota:positive") == "bogota_positive");
    PipelineConfig cfg;
    cfg.seed = 3;
    CHECK(stage_seed(cfg, "lda", "a:positive") == stage_seed(cfg, "lda", "a:positive"));
    CHECK(stage_seed(cfg, "lda", "a:positive") != stage_seed(cfg, "lda", "a:negative"));
    CHECK(stage_seed(cfg, "lda", "a:positive") != stage_seed(cfg, "embed", "a:positive"));
    auto other = cfg;
    other.seed = 4;
    CHECK(stage_seed(cfg, "lda", "a:positive") != stage_seed(other, "lda", "a:positive"));
}

TEST_CASE("missing stopword file aborts naming the path") {
    const auto dir = scratch("missing");
    auto cfg = small_setup(dir);
    cfg.stopwords = "nowhere/stop.txt";
    try {
        run_pipeline(cfg);
        FAIL("expected a StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "prep");
        CHECK(std::string(e.what()).find("nowhere/stop.txt") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(dir / "out" / "report.json"));
    fs::remove_all(dir);
}

TEST_CASE("unknown set aborts in ingest") {
    const auto dir = scratch("unknown_set");
    auto cfg = small_setup(dir);
    cfg.sets = {"lima:positive"};
    try {
        run_pipeline(cfg);
        FAIL("expected a StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "ingest");
    }
    fs::remove_all(dir);
}

TEST_CASE("end-to-end run") {
    const auto dir = scratch("run");
    const auto cfg = small_setup(dir);
    const auto report = run_pipeline(cfg);
    const auto out = dir / "out";
    const auto first = slurp(out / "report.json");
    REQUIRE_FALSE(first.empty());
    CHECK(json::parse(first) == report);

    SUBCASE("rerun is byte-identical") {
        fs::remove_all(out);
        run_pipeline(cfg);
        CHECK(slurp(out / "report.json") == first);
        auto serial = cfg;
        serial.threads = 1;
        fs::remove_all(out);
        run_pipeline(serial);
        auto a = json::parse(slurp(out / "report.json")), b = json::parse(first);
        a["config"].erase("threads");
        b["config"].erase("threads");
        CHECK(a == b);
    }

    SUBCASE("report sections") {
        const auto ingested = ingest(cfg);
        std::set<std::string> ids;
        std::map<std::string, std::string> hotel_of;
        for (const auto& r : ingested.load.set.reviews) {
            ids.insert(r.id);
            hotel_of[r.id] = r.hotel_id;
        }
        REQUIRE(report["sets"].size() == 4);
        CHECK(report["corpus"]["reviews"] == 240);
        for (const auto& s : report["sets"]) {
            const std::string name = s["name"];
            CAPTURE(name);
            const int best = s["best_k"];
            CHECK(best >= 2);
            CHECK(best <= 4);
            CHECK(s["topics"].size() == static_cast<std::size_t>(best));

            double share_sum = 0.0;
            int reps = 0;
            for (const auto& t : s["topics"]) {
                share_sum += t["share"].get<double>();
                CHECK(t["top_words"].size() == 5);
                CHECK(t["representative_ids"].size() == t["representatives"].get<std::size_t>());
                reps += t["representatives"].get<int>();
                for (const auto& id : t["representative_ids"]) CHECK(ids.count(id.get<std::string>()) == 1);
            }
            CHECK(share_sum == doctest::Approx(100.0).epsilon(0.001));

            const auto& a = s["analysis"];
            const int docs = s["documents"];
            CHECK(a["representative_share"].get<double>() == doctest::Approx(static_cast<double>(reps) / docs));

            // Non-increasing representative share over tau.
            double prev = 2.0;
            for (const auto& p : a["share_curve"]) {
                CHECK(p["share"].get<double>() <= prev);
                prev = p["share"];
            }

            // Topic magnitudes add up to the review count, per hotel and overall.
            std::map<std::string, double> per_hotel;
            std::map<std::string, int> hotel_reviews;
            double total = 0.0;
            for (const auto& m : a["hotel_magnitudes"]) {
                per_hotel[m["hotel_id"]] += m["magnitude"].get<double>();
                hotel_reviews[m["hotel_id"]] = m["reviews"];
                total += m["magnitude"].get<double>();
            }
            CHECK(std::abs(total - docs) < 1e-9);
            for (const auto& [h, sum] : per_hotel) CHECK(std::abs(sum - hotel_reviews[h]) < 1e-9);

            // Files exist; figures are views of report numbers.
            for (const auto& f : s["files"]) CHECK(fs::exists(out / f.get<std::string>()));
            const std::string tag = file_tag(name);
            CHECK(fs::exists(out / ("embed_" + tag + ".bin.json")));
            const auto scatter = slurp(out / ("scatter_" + tag + ".svg"));
            const auto& points = s["projection"]["points"];
            CHECK(count(scatter, "<circle") == points.size());
            CHECK(points.size() <= static_cast<std::size_t>(reps));
            for (const auto& p : points) CHECK(ids.count(p["review_id"].get<std::string>()) == 1);
            const auto projected = load_projection_csv(out / ("projection_" + tag + ".csv"));
            REQUIRE(projected.size() == points.size());
            for (std::size_t i = 0; i < projected.size(); ++i) {
                CHECK(projected[i].review_id == points[i]["review_id"]);
                CHECK(projected[i].x == points[i]["x"].get<double>());
                CHECK(projected[i].y == points[i]["y"].get<double>());
            }

            const auto sweep = load_sweep_csv(out / ("sweep_" + tag + ".csv"));
            CHECK(sweep.best_k == best);
            CHECK(sweep.k_values == s["coherence"]["k_values"].get<std::vector<int>>());
            for (std::size_t i = 0; i < sweep.k_values.size(); ++i)
                CHECK(sweep.mean_coherence[i] == s["coherence"]["mean"][i].get<double>());
            const auto curve = slurp(out / ("sweep_" + tag + ".svg"));
            CHECK(count(curve, "class=\"errorbar\"") == sweep.k_values.size());

            if (!a["boxes"].empty()) {
                const auto boxes = slurp(out / ("boxes_" + tag + ".svg"));
                CHECK(count(boxes, "class=\"box\"") == a["boxes"].size());
            }
            if (!a["anova"].is_null()) {
                const auto df_b = a["anova"]["df_between"].get<int>();
                CHECK(df_b == static_cast<int>(a["anova"]["topics"].size()) - 1);
            }

            const auto tokens = load_tokens(out / ("tokens_" + tag + ".jsonl"));
            CHECK(tokens.size() == static_cast<std::size_t>(docs));
            const auto model = load_lda(out / ("lda_" + tag + ".json"));
            CHECK(model.num_topics() == best);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("analysis json round trip") {
    SetAnalysis a;
    a.representative_share = 0.25;
    a.share_curve = {{0.5, 0.4}, {0.9, 0.1}};
    a.representatives = {2, 1};
    a.boxes = {box_stats({1, 2, 3}, 0), box_stats({9}, 1)};
    a.anova = anova_oneway({{1, 2, 3}, {9, 8}});
    a.tukey = tukey_hsd({{1, 2, 3}, {9, 8}});
    a.tested_topics = {0, 1};
    a.magnitudes = {{0, "h1", 1.5, 2}, {1, "h1", 0.5, 2}};
    const auto j = analysis_json(a);
    CHECK(analysis_json(analysis_from_json(j)) == j);
}
