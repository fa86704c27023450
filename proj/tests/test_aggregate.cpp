#include <doctest.h>

#include <algorithm>
#include <random>

#include "prism/aggregate.hpp"
#include "prism/rng.hpp"
#include "test_support.hpp"

using namespace prism;
using prism::testing::FnBackend;

TEST_CASE("majority vote picks the most frequent answer") {
    Population pop = testing::make_population({{"7", 0.1}, {"7", 0.1}, {"3", 0.9}});
    AggregateResult r = majority_vote(pop);
    REQUIRE(r.answer.has_value());
    CHECK(r.answer->canonical == "7");
    CHECK(r.support.at("7") == 2);
    CHECK(r.support.at("3") == 1);
}

TEST_CASE("majority ties break by summed score") {
    Population pop = testing::make_population({{"7", 0.9}, {"3", 0.2}});
    CHECK(majority_vote(pop).answer->canonical == "7");
    Population flipped = testing::make_population({{"7", 0.2}, {"3", 0.9}});
    CHECK(majority_vote(flipped).answer->canonical == "3");
}

TEST_CASE("majority ties with equal scores break by lowest index") {
    Population pop = testing::make_population({{"9", 0.5}, {"4", 0.5}});
    CHECK(majority_vote(pop).answer->canonical == "9");
}

TEST_CASE("no extractable answers yields an absent result") {
    Population pop;
    pop.particles.push_back(testing::make_particle("", 0.9));
    CHECK_FALSE(majority_vote(pop).answer.has_value());
    CHECK_FALSE(prm_score_vote(pop).answer.has_value());
    Population empty;
    CHECK_FALSE(majority_vote(empty).answer.has_value());
}

TEST_CASE("score vote sums scores per answer") {
    Population pop = testing::make_population({{"7", 0.9}, {"7", 0.2}, {"3", 0.8}});
    AggregateResult r = prm_score_vote(pop);
    CHECK(r.answer->canonical == "7");
    CHECK(r.support.at("7") == doctest::Approx(1.1));
    CHECK(r.support.at("3") == doctest::Approx(0.8));
}

TEST_CASE("a minority answer with more score mass wins the score vote") {
    Population pop = testing::make_population({{"3", 0.95}, {"7", 0.3}, {"7", 0.3}});
    CHECK(prm_score_vote(pop).answer->canonical == "3");
    CHECK(majority_vote(pop).answer->canonical == "7");
}

TEST_CASE("single particle wins outright") {
    Population pop = testing::make_population({{"12", 0.4}});
    CHECK(prm_score_vote(pop).answer->canonical == "12");
    CHECK(majority_vote(pop).answer->canonical == "12");
}

TEST_CASE("score vote is invariant to reordering and zero-score duplicates") {
    Population pop = testing::make_population(
        {{"7", 0.9}, {"3", 0.5}, {"7", 0.1}, {"5", 0.45}, {"3", 0.51}});
    std::string baseline = prm_score_vote(pop).answer->canonical;

    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        Population shuffled = pop;
        std::shuffle(shuffled.particles.begin(), shuffled.particles.end(), rng);
        CHECK(prm_score_vote(shuffled).answer->canonical == baseline);
    }

    Population padded = pop;
    padded.particles.push_back(testing::make_particle("99", 0.0));
    CHECK(prm_score_vote(padded).answer->canonical == baseline);
}

TEST_CASE("unanimous populations agree across methods") {
    Population pop = testing::make_population({{"8", 0.2}, {"8", 0.9}, {"8", 0.4}});
    FnBackend backend([](const ChatCall&) { return testing::ok_reply("FINAL ANSWER: 8\n"); });
    TemplateSet tpl = testing::stock_templates();
    RunConfig cfg;
    std::vector<CallRecord> calls;
    Problem problem = testing::sample_problem();
    CHECK(majority_vote(pop).answer->canonical == "8");
    CHECK(prm_score_vote(pop).answer->canonical == "8");
    CHECK(llm_aggregate(problem, pop, backend, tpl.aggregate, cfg, calls).answer->canonical == "8");
}

TEST_CASE("majority and score vote agree when the mode has maximal mass") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        Population pop;
        int n = 3 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) {
            std::string ans = std::to_string(rng() % 3);
            pop.particles.push_back(testing::make_particle(ans, uniform01(rng)));
        }
        AggregateResult maj = majority_vote(pop);
        AggregateResult prm = prm_score_vote(pop);
        REQUIRE(maj.answer.has_value());
        // When the modal answer also carries the largest summed score the two
        // methods must match.
        double mode_mass = prm.support.at(maj.answer->canonical);
        bool modal_has_max_mass = true;
        for (const auto& [ans, mass] : prm.support) {
            if (mass > mode_mass) modal_has_max_mass = false;
        }
        if (modal_has_max_mass) CHECK(prm.answer->canonical == maj.answer->canonical);
    }
}

TEST_CASE("llm aggregation extracts the backend's answer") {
    Population pop = testing::make_population({{"7", 0.5}, {"3", 0.5}});
    std::string seen_prompt;
    FnBackend backend([&](const ChatCall& call) {
        seen_prompt = call.prompt;
        return testing::ok_reply("Reasoning about candidates.\nFINAL ANSWER: 3\n", 40, 15);
    });
    TemplateSet tpl = testing::stock_templates();
    RunConfig cfg;
    std::vector<CallRecord> calls;
    Problem problem = testing::sample_problem();
    AggregateResult r = llm_aggregate(problem, pop, backend, tpl.aggregate, cfg, calls);
    CHECK(r.answer->canonical == "3");
    CHECK(r.aggregator_tokens == 55);
    CHECK_FALSE(r.fell_back);
    CHECK(seen_prompt.find("Candidate 1 answer: 7") != std::string::npos);
    CHECK(seen_prompt.find("Candidate 2 answer: 3") != std::string::npos);
    REQUIRE(calls.size() == 1);
    CHECK(calls[0].purpose == "aggregate");
}

TEST_CASE("unparsable aggregator output falls back to majority") {
    Population pop = testing::make_population({{"7", 0.1}, {"7", 0.1}, {"3", 0.9}});
    FnBackend backend([](const ChatCall&) { return testing::ok_reply("no marker here"); });
    TemplateSet tpl = testing::stock_templates();
    RunConfig cfg;
    std::vector<CallRecord> calls;
    Problem problem = testing::sample_problem();
    AggregateResult r = llm_aggregate(problem, pop, backend, tpl.aggregate, cfg, calls);
    CHECK(r.fell_back);
    CHECK(r.answer->canonical == "7");
    CHECK(r.method == AggregationMethod::llm);
}

TEST_CASE("empty population aggregates to absent without a call") {
    Population empty;
    int called = 0;
    FnBackend backend([&](const ChatCall&) {
        ++called;
        return testing::ok_reply("FINAL ANSWER: 1\n");
    });
    TemplateSet tpl = testing::stock_templates();
    RunConfig cfg;
    std::vector<CallRecord> calls;
    Problem problem = testing::sample_problem();
    AggregateResult r = llm_aggregate(problem, empty, backend, tpl.aggregate, cfg, calls);
    CHECK_FALSE(r.answer.has_value());
    CHECK(called == 0);
}
