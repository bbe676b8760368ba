#include <doctest.h>

#include "qostopics/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

using namespace qos;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / ("qos_corpus_" + name);
    std::ofstream(path, std::ios::binary) << content;
    return path;
}

Review make_review(std::string id, std::string city, std::string pos, std::string neg, double score,
                   std::optional<std::string> lang = std::nullopt) {
    Review r;
    r.id = std::move(id);
    r.hotel_id = "h1";
    r.city = std::move(city);
    r.positive_text = std::move(pos);
    r.negative_text = std::move(neg);
    r.score = score;
    r.language = std::move(lang);
    return r;
}

}  // namespace

TEST_CASE("load_reviews parses a one-line JSONL file") {
    const auto path = temp_file("one.jsonl",
                                R"({"id":"r1","hotel_id":"h","city":"bogota","author_country":"Colombia",)"
                                R"("positive_text":"buena cama","negative_text":"","score":8.4,"language":"es"})"
                                "\n");
    const auto result = load_reviews(path, CorpusFormat::jsonl);
    REQUIRE(result.set.reviews.size() == 1);
    CHECK(result.rejected.empty());
    CHECK(result.set.reviews[0].score == doctest::Approx(8.4));
    CHECK(result.set.reviews[0].author_country == std::optional<std::string>("Colombia"));
    CHECK(result.set.provenance.source == path.string());
    CHECK_FALSE(result.set.provenance.loaded_at.empty());
}

TEST_CASE("load_reviews rejects out-of-range scores with their line number") {
    const auto path = temp_file("range.jsonl",
                                R"({"id":"r1","hotel_id":"h","city":"c","positive_text":"x","score":5})"
                                "\n"
                                R"({"id":"r2","hotel_id":"h","city":"c","positive_text":"x","score":11})"
                                "\n"
                                R"({"id":"r3","hotel_id":"h","city":"c","positive_text":"x","score":0.5})"
                                "\n");
    const auto result = load_reviews(path, CorpusFormat::jsonl);
    CHECK(result.set.reviews.size() == 1);
    REQUIRE(result.rejected.size() == 2);
    CHECK(result.rejected[0].line == 2);
    CHECK(result.rejected[0].reason == "score out of range");
    CHECK(result.rejected[1].line == 3);
    CHECK_THROWS_AS(load_reviews_strict(path, CorpusFormat::jsonl), CorpusError);
}

TEST_CASE("load_reviews reports malformed lines and empty reviews") {
    const auto path = temp_file("bad.jsonl",
                                "{not json\n"
                                R"({"id":"r1","hotel_id":"h","city":"c","score":5})"
                                "\n"
                                R"({"id":"r2","hotel_id":"h","city":"c","positive_text":"ok","score":"7.5"})"
                                "\n"
                                R"({"id":"r3","hotel_id":"h","city":"c","positive_text":"ok","score":7,"stars":4})"
                                "\n");
    const auto result = load_reviews(path, CorpusFormat::jsonl);
    REQUIRE(result.set.reviews.size() == 1);
    CHECK(result.set.reviews[0].score == 7.5);
    REQUIRE(result.rejected.size() == 3);
    CHECK(result.rejected[0].line == 1);
    CHECK(result.rejected[0].reason.find("malformed") == 0);
    CHECK(result.rejected[1].reason == "both comments empty");
    CHECK(result.rejected[2].reason.find("unknown field 'stars'") != std::string::npos);
}

TEST_CASE("duplicate ids are a hard error naming the id") {
    std::string content;
    for (const char* id : {"a", "b", "c", "b"})
        content += std::string(R"({"id":")") + id + R"(","hotel_id":"h","city":"c","positive_text":"x","score":5})" + "\n";
    const auto path = temp_file("dup.jsonl", content);
    try {
        load_reviews(path, CorpusFormat::jsonl);
        FAIL("expected CorpusError");
    } catch (const CorpusError& e) {
        CHECK(std::string(e.what()).find("'b'") != std::string::npos);
    }
}

TEST_CASE("missing corpus file throws") {
    CHECK_THROWS_AS(load_reviews("/nonexistent/reviews.jsonl", CorpusFormat::jsonl), CorpusError);
}

TEST_CASE("CSV with quoted fields, embedded newlines and empty optionals") {
    const auto path = temp_file("q.csv",
                                "id,hotel_id,city,author_country,positive_text,negative_text,score,language\n"
                                "r1,h1,madrid,,\"cama, grande\",\"ruido\nde noche\",6.5,es\n"
                                "r2,h1,madrid,Spain,\"dijo \"\"hola\"\"\",,9,\n"
                                "r3,h1,madrid,Spain,x,,abc,es\n");
    const auto result = load_reviews(path, CorpusFormat::csv);
    REQUIRE(result.set.reviews.size() == 2);
    const auto& r1 = result.set.reviews[0];
    CHECK(r1.positive_text == "cama, grande");
    CHECK(r1.negative_text == "ruido\nde noche");
    CHECK_FALSE(r1.author_country.has_value());
    CHECK(result.set.reviews[1].positive_text == "dijo \"hola\"");
    CHECK_FALSE(result.set.reviews[1].language.has_value());
    REQUIRE(result.rejected.size() == 1);
    CHECK(result.rejected[0].line == 5);
}

TEST_CASE("load -> save -> load round-trips in both formats") {
    SyntheticSpec spec;
    spec.docs = 40;
    spec.doc_len = 8;
    auto set = synth_corpus(spec).reviews;
    set.reviews[0].author_country = "Perú";
    set.reviews[1].negative_text = "comma, \"quote\"\nnewline";
    set.reviews[2].language = "es-CO";
    for (auto format : {CorpusFormat::jsonl, CorpusFormat::csv}) {
        const auto path = std::filesystem::temp_directory_path() /
                          (format == CorpusFormat::csv ? "qos_roundtrip.csv" : "qos_roundtrip.jsonl");
        save_reviews(set, path, format);
        const auto first = load_reviews_strict(path, format);
        save_reviews(first, path, format);
        const auto second = load_reviews_strict(path, format);
        CHECK(first.reviews == set.reviews);
        CHECK(second.reviews == first.reviews);
    }
}

TEST_CASE("partition yields one set per city and polarity") {
    ReviewSet set;
    set.reviews = {make_review("1", "bogota", "p1", "n1", 8), make_review("2", "madrid", "p2", "n2", 7),
                   make_review("3", "bogota", "p3", "", 9)};
    const auto parts = partition(set);
    REQUIRE(parts.size() == 4);
    CHECK(parts[0].name() == "bogota:positive");
    CHECK(parts[1].name() == "bogota:negative");
    CHECK(parts[2].name() == "madrid:positive");
    CHECK(parts[3].name() == "madrid:negative");
    CHECK(parts[0].docs.size() == 2);
    CHECK(parts[1].docs.size() == 1);  // review 3 has no negative text
    CHECK(parts[1].docs[0].review_id == "1");
}

TEST_CASE("partition language filter matches on the primary subtag") {
    ReviewSet set;
    set.reviews = {make_review("1", "c", "hola", "", 8, "es"), make_review("2", "c", "hello", "", 7, "en"),
                   make_review("3", "c", "buenas", "", 7, "ES-co"), make_review("4", "c", "sin tag", "", 7)};
    const auto parts = partition(set, std::string("es"));
    REQUIRE(parts.size() == 1);
    std::set<std::string> ids;
    for (const auto& d : parts[0].docs) ids.insert(d.review_id);
    CHECK(ids == std::set<std::string>{"1", "3"});
}

TEST_CASE("partition preserves every non-empty text without a filter") {
    const auto set = synth_review_corpus({});
    std::size_t texts = 0;
    for (const auto& r : set.reviews) texts += !r.positive_text.empty() + !r.negative_text.empty();
    std::size_t docs = 0;
    for (const auto& p : partition(set)) {
        for (const auto& d : p.docs) CHECK_FALSE(d.raw_text.empty());
        docs += p.docs.size();
    }
    CHECK(docs == texts);
}

TEST_CASE("synth_corpus with one topic has unit mixtures") {
    SyntheticSpec spec;
    spec.k_true = 1;
    spec.docs = 20;
    const auto c = synth_corpus(spec);
    CHECK(c.truth.doc_topic.rows() == 20);
    CHECK(c.truth.doc_topic.cols() == 1);
    CHECK((c.truth.doc_topic.array() == 1.0).all());
}

TEST_CASE("synth_corpus is deterministic in the seed") {
    SyntheticSpec spec;
    spec.docs = 30;
    const auto a = synth_corpus(spec);
    const auto b = synth_corpus(spec);
    CHECK(a.reviews.reviews == b.reviews.reviews);
    CHECK(a.truth.doc_topic == b.truth.doc_topic);
    spec.seed = 2;
    CHECK_FALSE(synth_corpus(spec).reviews.reviews == a.reviews.reviews);
}

TEST_CASE("synth_corpus token ownership matches the planted assignment") {
    SyntheticSpec spec;
    spec.k_true = 5;
    spec.docs = 200;
    const auto c = synth_corpus(spec);
    std::map<std::string, int> owner;
    for (int t = 0; t < spec.k_true; ++t)
        for (int j = 0; j < spec.vocab_per_topic; ++j)
            owner[c.truth.words[static_cast<std::size_t>(t * spec.vocab_per_topic + j)]] = t;

    int theta_agree = 0;
    for (int d = 0; d < spec.docs; ++d) {
        // Oracle: recount the text's tokens by owning vocabulary.
        std::vector<int> recount(spec.k_true, 0);
        std::istringstream words(c.reviews.reviews[static_cast<std::size_t>(d)].positive_text);
        for (std::string w; words >> w;) ++recount[owner.at(w)];
        std::vector<int> planted(spec.k_true, 0);
        for (int z : c.truth.token_topics[static_cast<std::size_t>(d)]) ++planted[z];
        CHECK(recount == planted);
        const auto plurality = std::max_element(recount.begin(), recount.end()) - recount.begin();
        Eigen::Index dominant = 0;
        c.truth.doc_topic.row(d).maxCoeff(&dominant);
        theta_agree += plurality == dominant;
    }
    CHECK(theta_agree >= 190);
}

TEST_CASE("synthetic specs reject non-positive counts") {
    SyntheticSpec spec;
    spec.docs = 0;
    CHECK_THROWS_AS(synth_corpus(spec), Error);
    spec = {};
    spec.topic_mixing = 0.0;
    CHECK_THROWS_AS(synth_corpus(spec), Error);
}

TEST_CASE("pseudo words are letters only and unique") {
    CHECK(pseudo_word("w", 0) == "waaa");
    CHECK(pseudo_word("w", 27) == "wabb");
    std::set<std::string> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto w = pseudo_word("p", i);
        CHECK(std::all_of(w.begin(), w.end(), [](char ch) { return ch >= 'a' && ch <= 'z'; }));
        seen.insert(w);
    }
    CHECK(seen.size() == 2000);
}

TEST_CASE("synthetic review corpus has valid reviews in two cities") {
    const auto set = synth_review_corpus({});
    CHECK(set.reviews.size() == 2000);
    for (const auto& r : set.reviews) CHECK_FALSE(validate_review(r).has_value());
    CHECK(partition(set, std::string("es")).size() == 4);
}
