#include <doctest.h>

#include "qostopics/textprep.hpp"

#include <numeric>

using namespace qos;

namespace {

PrepResources english() {
    return load_resources(std::string(QOS_DATA_DIR) + "/en_stopwords.txt", std::string(QOS_DATA_DIR) + "/en_lemmas.tsv");
}

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
    return out;
}

}  // namespace

TEST_CASE("preprocess reproduces the restaurant example") {
    const auto tokens = preprocess("there were always kids playing in the Restaurant!", english());
    CHECK(tokens == std::vector<std::string>{"always", "kid", "play", "restaurant"});
}

TEST_CASE("preprocess edge cases") {
    PrepResources bare;
    CHECK(preprocess("", bare).empty());
    CHECK(preprocess("¡¡HOLA!!", bare) == std::vector<std::string>{"hola"});
    CHECK(preprocess("room 404 was ok", bare) == std::vector<std::string>{"room", "was", "ok"});
    CHECK(preprocess("a b cd", bare) == std::vector<std::string>{"cd"});
}

TEST_CASE("diacritics survive and uppercase accented letters are lowered") {
    PrepResources bare;
    CHECK(preprocess("HABITACIÓN pequeña, BAÑO sucio", bare) ==
          std::vector<std::string>{"habitación", "pequeña", "baño", "sucio"});
    CHECK(lowercase("ÑANDÚ") == "ñandú");
}

TEST_CASE("Spanish resources lemmatise accented surface forms") {
    const auto res = load_resources(std::string(QOS_DATA_DIR) + "/es_stopwords.txt",
                                    std::string(QOS_DATA_DIR) + "/es_lemmas.tsv");
    CHECK(preprocess("Las habitaciones estaban muy limpias y las camas cómodas", res) ==
          std::vector<std::string>{"habitación", "limpio", "cama", "cómodo"});
}

TEST_CASE("utf8 round trip and invalid bytes") {
    const std::string s = "kindness ⟨añ⟩ 日本";
    CHECK(utf8_encode(utf8_decode(s)) == s);
    CHECK(utf8_decode("\xC3") == std::u32string{0xFFFD});
    CHECK(utf8_decode("a\xFF" "b") == std::u32string{U'a', 0xFFFD, U'b'});
}

TEST_CASE("preprocess is idempotent on its own output") {
    const auto res = english();
    const char* texts[] = {"The staff were so KIND, and the rooms were clean!!",
                           "Breakfast: eggs, toast & coffee... walking distance to the metro",
                           "¿Dónde está el baño? ¡Qué ruido!", "nights nights nights"};
    for (const char* text : texts) {
        const auto once = preprocess(text, res);
        // Lemmas in the table map to themselves, so a second pass is a fixpoint.
        CHECK(preprocess(join(once), res) == once);
    }
}

TEST_CASE("missing resource files name the path") {
    try {
        load_stopwords("/nonexistent/stop.txt");
        FAIL("expected Error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("/nonexistent/stop.txt") != std::string::npos);
    }
}

TEST_CASE("build_vocab filters by count and sorts alphabetically") {
    const std::vector<std::vector<std::string>> docs = {{"a", "b"}, {"a"}};
    const auto v2 = build_vocab(docs, 2);
    CHECK(v2.words() == std::vector<std::string>{"a"});
    const auto v1 = build_vocab(docs, 1);
    CHECK(v1.words() == std::vector<std::string>{"a", "b"});
    CHECK(v1.find("a") == 0);
    CHECK(v1.find("b") == 1);
    CHECK(v1.counts() == std::vector<long>{2, 1});
    CHECK_THROWS_AS(build_vocab(docs, 3), EmptyVocabularyError);
    CHECK_THROWS_AS(build_vocab(docs, 0), Error);
}

TEST_CASE("vocabulary index is a sorted bijection") {
    std::vector<std::vector<std::string>> docs = {{"zeta", "árbol", "beta", "alpha"}, {"beta", "ñu", "zeta"}};
    const auto v = build_vocab(docs, 1);
    CHECK(std::is_sorted(v.words().begin(), v.words().end()));
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.find(v.word(i)) == static_cast<int>(i));
    CHECK_FALSE(v.find("gamma").has_value());
}

TEST_CASE("to_bow aggregates counts and drops OOV") {
    const Vocabulary vocab({"a", "b"}, {1, 1});
    CHECK(to_bow({"a", "a", "b"}, vocab) == BowDoc{{0, 2}, {1, 1}});
    CHECK(to_bow({"z"}, vocab).empty());
    CHECK(to_bow({"b", "a", "a"}, vocab) == to_bow({"a", "a", "b"}, vocab));
}

TEST_CASE("to_bow count total equals in-vocabulary tokens") {
    Rng rng(5);
    const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f"};
    const Vocabulary vocab({"a", "c", "e"}, {1, 1, 1});
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> tokens;
        const auto n = uniform_index(rng, 30);
        int in_vocab = 0;
        for (std::size_t i = 0; i < n; ++i) {
            tokens.push_back(pool[uniform_index(rng, pool.size())]);
            in_vocab += vocab.find(tokens.back()).has_value();
        }
        const auto bow = to_bow(tokens, vocab);
        const int total = std::accumulate(bow.begin(), bow.end(), 0, [](int s, const auto& p) { return s + p.second; });
        CHECK(total == in_vocab);
        for (const auto& [w, c] : bow) CHECK(c > 0);
    }
}

TEST_CASE("preprocess_set is deterministic across thread counts") {
    DocumentSet set;
    for (int i = 0; i < 50; ++i) set.docs.push_back({"r" + std::to_string(i), "The Rooms were CLEAN " + std::to_string(i), 5.0});
    const auto res = english();
    const auto a = preprocess_set(set, res, 1);
    const auto b = preprocess_set(set, res, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].tokens == b[i].tokens);
}
