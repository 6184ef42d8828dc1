#include "rubricrl/backends.hpp"
#include "rubricrl/error.hpp"
#include "rubricrl/eval_harness.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace rubricrl;

namespace {

using PromptMap = std::map<std::string, std::string, std::less<>>;
using RubricMap = std::map<std::string, Rubric, std::less<>>;

JudgeFn longer_wins() {
    return [](const std::string&, const std::string& a, const std::string& b) {
        return a.size() >= b.size() ? JudgeVerdict::First : JudgeVerdict::Second;
    };
}

JudgeFn position_one() {
    return [](const std::string&, const std::string&, const std::string&) {
        return JudgeVerdict::First;
    };
}

// Grades a single-criterion rubric from a per-(text, vote) table.
VerifierFn table_verifier(std::map<std::string, std::vector<bool>> table) {
    return [table = std::move(table)](const GradeRequest& req) {
        GradeVector g;
        g.rubric_version = req.rubric.version();
        g.verdicts["c1"] = table.at(std::string(req.response))[static_cast<std::size_t>(req.vote_index)];
        return g;
    };
}

RubricMap one_rubric(std::initializer_list<const char*> ids) {
    RubricMap m;
    for (const char* id : ids) {
        m.emplace(id, Rubric::from_drafts(id, 0, {{"good", 1}}));
    }
    return m;
}

} // namespace

TEST_CASE("longer-text judge with longer policy texts gives win rate 1") {
    std::vector<EvalPair> pairs;
    for (int i = 0; i < 50; ++i) {
        pairs.push_back({"p", "a much longer policy answer " + std::to_string(i), "short"});
    }
    const auto rep = winrate_eval(pairs, {{"p", "q"}}, longer_wins(), 3);
    CHECK(rep.win_rate == 1.0);
    CHECK(rep.n_wins == 50);
    CHECK(rep.n_parse_failures == 0);
}

TEST_CASE("position-biased judge over 10^4 pairs lands near one half") {
    std::vector<EvalPair> pairs(10'000, EvalPair{"p", "policy", "reference"});
    const auto rep = winrate_eval(pairs, {{"p", "q"}}, position_one(), 2024, 4);
    CHECK(std::abs(rep.win_rate - 0.5) <= 0.02);
    // The policy wins exactly when it was shown first.
    for (const auto& r : rep.records) {
        CHECK(r.policy_wins == !r.flipped);
        CHECK(r.raw_verdict == "1");
    }
}

TEST_CASE("winrate errors") {
    CHECK_THROWS_AS(winrate_eval({}, {}, position_one(), 1), ProtocolError);
    CHECK_THROWS_AS(winrate_eval({{"missing", "a", "b"}}, {{"p", "q"}}, position_one(), 1),
                    InputError);
    CHECK_THROWS_AS(winrate_eval({{"p", "", "b"}}, {{"p", "q"}}, position_one(), 1), InputError);
}

TEST_CASE("judge parse failures count as flagged losses") {
    JudgeFn flaky = [](const std::string&, const std::string& a, const std::string& b) {
        if (a == "bad" || b == "bad") {
            throw JudgeParseError("no boxed answer", "rambling");
        }
        return JudgeVerdict::First;
    };
    std::vector<EvalPair> pairs = {{"p", "bad", "ref"}, {"p", "x", "y"}};
    const auto rep = winrate_eval(pairs, {{"p", "q"}}, flaky, 5);
    CHECK(rep.n_pairs == 2);
    CHECK(rep.n_parse_failures == 1);
    CHECK(rep.records[0].parse_failed);
    CHECK_FALSE(rep.records[0].policy_wins);
    CHECK(rep.records[0].raw_verdict.empty());
    CHECK(rep.records[0].error.find("no boxed answer") != std::string::npos);
}

TEST_CASE("property: a content-only judge is unaffected by flips") {
    testutil::Gen g(61);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<EvalPair> pairs;
        std::vector<bool> expected;
        const int n = g.integer(1, 60);
        for (int i = 0; i < n; ++i) {
            std::string a(static_cast<std::size_t>(g.integer(1, 40)), 'a');
            std::string b(static_cast<std::size_t>(g.integer(1, 40)), 'b');
            expected.push_back(a.size() >= b.size() ? true : false);
            // Equal lengths would make the longer-wins judge position-dependent.
            if (a.size() == b.size()) {
                a += 'a';
            }
            pairs.push_back({"p", a, b});
        }
        const auto seed = static_cast<std::uint64_t>(g.engine()());
        const auto rep = winrate_eval(pairs, {{"p", "q"}}, longer_wins(), seed, 3);
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            CHECK(rep.records[i].policy_wins == expected[i]);
        }
    }
}

TEST_CASE("property: same seed, same flips; any job count") {
    testutil::Gen g(62);
    std::vector<EvalPair> pairs(300, EvalPair{"p", "pol", "ref"});
    for (int trial = 0; trial < 10; ++trial) {
        const auto seed = static_cast<std::uint64_t>(g.engine()());
        const auto a = winrate_eval(pairs, {{"p", "q"}}, position_one(), seed, 1);
        const auto b = winrate_eval(pairs, {{"p", "q"}}, position_one(), seed, 8);
        CHECK(a.records == b.records);
        CHECK(a.win_rate == b.win_rate);
        const auto c = winrate_eval(pairs, {{"p", "q"}}, position_one(), seed + 1, 1);
        CHECK(c.records != a.records);
    }
}

TEST_CASE("region accuracy: strict preference agreeing with the judge is correct") {
    std::vector<RegionPair> pairs = {{"p", "long answer here", "short", Region::High}};
    const auto res = region_accuracy(
        pairs, {{"p", "q"}}, one_rubric({"p"}),
        table_verifier({{"long answer here", {true, true, true, true, true}},
                        {"short", {false, false, false, false, false}}}),
        longer_wins(), 5, 9);
    REQUIRE(res.reports.size() == 1);
    CHECK(res.reports[0].region == Region::High);
    CHECK(res.reports[0].accuracy == 1.0);
    CHECK(res.reports[0].n_ties == 0);
    CHECK(res.records[0].truth == "first");
    CHECK(res.records[0].rubric == "first");
    CHECK(res.records[0].scores_a.size() == 5);
}

TEST_CASE("region accuracy: ties are counted and never correct") {
    std::vector<RegionPair> pairs = {{"p", "aaaa", "bb", Region::Low}};
    const auto res = region_accuracy(pairs, {{"p", "q"}}, one_rubric({"p"}),
                                     table_verifier({{"aaaa", {true, false, true}},
                                                     {"bb", {true, false, true}}}),
                                     longer_wins(), 3, 9);
    REQUIRE(res.reports.size() == 1);
    CHECK(res.reports[0].region == Region::Low);
    CHECK(res.reports[0].n_ties == 1);
    CHECK(res.reports[0].n_correct == 0);
    CHECK(res.reports[0].accuracy == 0.0);
    CHECK(res.records[0].outcome == "tie");
}

TEST_CASE("region accuracy: mixed schedule over four pairs gives one half") {
    // Judge prefers the longer text in every pair.
    std::vector<RegionPair> pairs = {
        {"p", "AAAA", "b", Region::High},  // rubric prefers a: correct
        {"p", "c", "DDDD", Region::High},  // rubric prefers b: correct
        {"p", "EEEE", "f", Region::High},  // rubric ties
        {"p", "GGGG", "h", Region::High},  // rubric prefers b: wrong
    };
    const std::vector<bool> yes(3, true);
    const std::vector<bool> no(3, false);
    const auto res = region_accuracy(pairs, {{"p", "q"}}, one_rubric({"p"}),
                                     table_verifier({{"AAAA", yes},
                                                     {"b", no},
                                                     {"c", no},
                                                     {"DDDD", yes},
                                                     {"EEEE", yes},
                                                     {"f", yes},
                                                     {"GGGG", no},
                                                     {"h", yes}}),
                                     longer_wins(), 3, 11, 3);
    REQUIRE(res.reports.size() == 1);
    const auto& r = res.reports[0];
    CHECK(r.n_pairs == 4);
    CHECK(r.n_correct == 2);
    CHECK(r.n_ties == 1);
    CHECK(r.n_wrong == 1);
    CHECK(r.accuracy == 0.5);
    CHECK(res.records[3].outcome == "wrong");
}

TEST_CASE("region accuracy errors") {
    std::vector<RegionPair> pairs = {{"p1", "a", "b", Region::High},
                                     {"p2", "a", "b", Region::Low},
                                     {"p3", "a", "b", Region::Low}};
    const PromptMap prompts = {{"p1", "q"}, {"p2", "q"}, {"p3", "q"}};
    int calls = 0;
    VerifierFn counting = [&](const GradeRequest&) -> GradeVector {
        ++calls;
        return {};
    };
    try {
        (void)region_accuracy(pairs, prompts, one_rubric({"p1"}), counting, longer_wins(), 3, 1);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        const std::string what = e.what();
        CHECK(what.find("p2") != std::string::npos);
        CHECK(what.find("p3") != std::string::npos);
    }
    CHECK(calls == 0);
    CHECK_THROWS_AS(region_accuracy(pairs, prompts, one_rubric({"p1", "p2", "p3"}), counting,
                                    longer_wins(), 4, 1),
                    ProtocolError);
    CHECK(region_from_string("high") == Region::High);
    CHECK_THROWS_AS(region_from_string("medium"), InputError);
}

TEST_CASE("property: outcome counts add up") {
    testutil::Gen g(63);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<RegionPair> pairs;
        std::map<std::string, std::vector<bool>> table;
        const int n = g.integer(1, 20);
        for (int i = 0; i < n; ++i) {
            const std::string a = "a" + std::string(static_cast<std::size_t>(i + 1), 'x');
            const std::string b = "b" + std::to_string(i);
            for (const auto& t : {a, b}) {
                std::vector<bool> v;
                for (int k = 0; k < 3; ++k) {
                    v.push_back(g.coin());
                }
                table[t] = v;
            }
            pairs.push_back({"p", a, b, g.coin() ? Region::High : Region::Low});
        }
        const auto seed = static_cast<std::uint64_t>(g.engine()());
        const auto res = region_accuracy(pairs, {{"p", "q"}}, one_rubric({"p"}),
                                         table_verifier(table), longer_wins(), 3, seed, 2);
        std::size_t total = 0;
        for (const auto& r : res.reports) {
            CHECK(r.n_correct + r.n_ties + r.n_wrong == r.n_pairs);
            CHECK(r.accuracy ==
                  doctest::Approx(static_cast<double>(r.n_correct) / static_cast<double>(r.n_pairs)));
            total += r.n_pairs;
        }
        CHECK(total == pairs.size());
        const auto again = region_accuracy(pairs, {{"p", "q"}}, one_rubric({"p"}),
                                           table_verifier(table), longer_wins(), 3, seed, 1);
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            CHECK(again.records[i].outcome == res.records[i].outcome);
            CHECK(again.records[i].flipped == res.records[i].flipped);
        }
    }
}
