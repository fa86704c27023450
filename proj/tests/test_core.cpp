#include <doctest.h>

#include <random>

#include "prism/answer.hpp"
#include "prism/dataset.hpp"
#include "prism/errors.hpp"
#include "test_support.hpp"

using namespace prism;

TEST_CASE("extract_answer finds the marker line") {
    auto a = extract_answer("step one\n\nstep two\nFINAL ANSWER: 42");
    REQUIRE(a.has_value());
    CHECK(a->canonical == "42");
}

TEST_CASE("extract_answer absent without marker") {
    CHECK_FALSE(extract_answer("no marker anywhere").has_value());
    CHECK_FALSE(extract_answer("").has_value());
}

TEST_CASE("extract_answer last marker wins and canonicalizes") {
    auto a = extract_answer("FINAL ANSWER: 7\nmore text\nFINAL ANSWER:  007 ");
    REQUIRE(a.has_value());
    CHECK(a->canonical == "7");
}

TEST_CASE("extract_answer is case-insensitive and trims leading space") {
    auto a = extract_answer("  final answer: B.");
    REQUIRE(a.has_value());
    CHECK(a->canonical == "B");
}

TEST_CASE("extract_answer treats a bare marker as no answer") {
    CHECK_FALSE(extract_answer("FINAL ANSWER:   ").has_value());
}

TEST_CASE("answers_equal on canonical forms") {
    CHECK(answers_equal(make_answer("42"), make_answer("42")));
    CHECK_FALSE(answers_equal(make_answer("42"), make_answer("43")));
    CHECK(answers_equal(make_answer("0.50"), make_answer("0.5")));
}

TEST_CASE("numeric canonicalization") {
    CHECK(normalize_answer_text("007") == "7");
    CHECK(normalize_answer_text("+42") == "42");
    CHECK(normalize_answer_text("-0") == "0");
    CHECK(normalize_answer_text("-0.000") == "0");
    CHECK(normalize_answer_text(".5") == "0.5");
    CHECK(normalize_answer_text("5.") == "5");
    CHECK(normalize_answer_text("0.50") == "0.5");
    CHECK(normalize_answer_text("-012.3400") == "-12.34");
}

TEST_CASE("multiple-choice letters uppercase") {
    CHECK(normalize_answer_text("b") == "B");
    CHECK(normalize_answer_text("C.") == "C");
    CHECK(normalize_answer_text("d)") == "D");
    // Two letters are plain text, not a choice.
    CHECK(normalize_answer_text("ab") == "ab");
}

TEST_CASE("general text folds case and collapses whitespace") {
    CHECK(normalize_answer_text("  Hello \t  World ") == "hello world");
    CHECK(normalize_answer_text("x = 3") == "x = 3");
}

TEST_CASE("normalization is idempotent on random strings") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 5000; ++i) {
        std::string s = testing::random_text(rng);
        std::string once = normalize_answer_text(s);
        CHECK(normalize_answer_text(once) == once);
    }
}

TEST_CASE("dataset parses JSONL with optional fields") {
    std::string jsonl =
        R"({"id": "a", "statement": "What is 2+2?", "gold_answer": "4"})"
        "\n"
        R"({"id": "b", "statement": "Pick one.", "domain_tag": "chem"})"
        "\n";
    auto problems = parse_dataset(jsonl, "inline");
    REQUIRE(problems.size() == 2);
    CHECK(problems[0].id == "a");
    CHECK(problems[0].gold_answer == "4");
    CHECK_FALSE(problems[0].domain_tag.has_value());
    CHECK(problems[1].domain_tag == "chem");
    CHECK_FALSE(problems[1].gold_answer.has_value());
}

TEST_CASE("dataset rejects duplicates, empties, and bad JSON") {
    CHECK_THROWS_AS(parse_dataset(R"({"id": "a", "statement": "x"})"
                                  "\n"
                                  R"({"id": "a", "statement": "y"})"
                                  "\n",
                                  "inline"),
                    ConfigError);
    CHECK_THROWS_AS(parse_dataset(R"({"id": "a", "statement": ""})"
                                  "\n",
                                  "inline"),
                    ConfigError);
    CHECK_THROWS_AS(parse_dataset("not json\n", "inline"), ConfigError);
    CHECK_THROWS_AS(parse_dataset(R"({"id": "a"})"
                                  "\n",
                                  "inline"),
                    ConfigError);
}

TEST_CASE("dataset write/read round-trip") {
    testing::TempDir dir("dataset");
    std::vector<Problem> problems;
    problems.push_back(testing::sample_problem("p-1", "12"));
    Problem no_gold;
    no_gold.id = "p-2";
    no_gold.statement = "Open question, no gold.";
    no_gold.domain_tag = "math";
    problems.push_back(no_gold);

    auto path = dir.path / "ds.jsonl";
    write_dataset(path, problems);
    auto loaded = load_dataset(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].id == "p-1");
    CHECK(loaded[0].gold_answer == "12");
    CHECK(loaded[1].domain_tag == "math");
    CHECK_FALSE(loaded[1].gold_answer.has_value());
}
