#include "rubricrl/backends.hpp"
#include "rubricrl/error.hpp"
#include "rubricrl/llm_gateway.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

using namespace rubricrl;
using nlohmann::json;

namespace {

GatewayOptions no_sleep(std::vector<std::chrono::milliseconds>* sleeps = nullptr) {
    GatewayOptions o;
    o.sleep = [sleeps](std::chrono::milliseconds d) {
        if (sleeps) {
            sleeps->push_back(d);
        }
    };
    return o;
}

BackendConfig config(int retries = 3, int in_flight = 8) {
    BackendConfig c;
    c.model_name = "test-model";
    c.max_retries = retries;
    c.max_in_flight = in_flight;
    return c;
}

const char* kCriteriaReply = "Here you go:\n```json\n[{\"criterion\": \"Mentions X\", \"weight\": 3},"
                             " {\"criterion\": \"Is short\", \"weight\": 1}]\n```\n";

Rubric three() { return Rubric::from_drafts("p", 2, {{"a", 3}, {"b", 2}, {"c", 1}}); }

} // namespace

TEST_CASE("extract_json handles fences, prose and nesting") {
    CHECK(extract_json(kCriteriaReply).size() == 2);
    CHECK(extract_json("Sure. {\"c1\": \"yes\"} trailing } text")["c1"] == "yes");
    CHECK(extract_json("x [1, [2, {\"a\": \"]\"}]] y") == json::parse("[1,[2,{\"a\":\"]\"}]]"));
    CHECK(extract_json("{\"s\": \"quote \\\" and } brace\"}")["s"] == "quote \" and } brace");

    try {
        (void)extract_json("no json here at all");
        FAIL("expected ExtractionError");
    } catch (const ExtractionError& e) {
        CHECK(e.raw_reply() == "no json here at all");
        CHECK(e.end_offset() == 19);
    }
    try {
        (void)extract_json("abc {\"a\": [1, 2}");
        FAIL("expected ExtractionError");
    } catch (const ExtractionError& e) {
        CHECK(e.begin_offset() == 4);
    }
    CHECK_THROWS_AS(extract_json("{\"a\": 1"), ExtractionError);
    CHECK_THROWS_AS(extract_json("{a: 1}"), ExtractionError);
}

TEST_CASE("parse_criteria rounds and clamps weights with warnings") {
    std::vector<std::string> w;
    const auto d = parse_criteria(json::parse(R"([{"criterion":" A ","weight":5},
        {"criterion":"B","weight":0},{"criterion":"C","weight":2.4},{"criterion":"D","weight":2}])"),
                                  w);
    REQUIRE(d.size() == 4);
    CHECK(d[0] == CriterionDraft{"A", 3});
    CHECK(d[1] == CriterionDraft{"B", 1});
    CHECK(d[2] == CriterionDraft{"C", 2});
    CHECK(d[3] == CriterionDraft{"D", 2});
    CHECK(w.size() == 3);

    CHECK_THROWS_AS(parse_criteria(json::array(), w), InvalidRubricError);
    CHECK_THROWS_AS(parse_criteria(json::object(), w), ParseError);
    CHECK_THROWS_AS(parse_criteria(json::parse(R"([{"weight":2}])"), w), ParseError);
    CHECK_THROWS_AS(parse_criteria(json::parse(R"([{"criterion":"x","weight":"high"}])"), w),
                    ParseError);
    CHECK_THROWS_AS(parse_criteria(json::parse(R"([{"criterion":"  ","weight":1}])"), w),
                    ParseError);
}

TEST_CASE("parse_grades") {
    const auto r = three();
    const auto g = parse_grades(json::parse(R"({"c1":"YES","c2":" no ","c3":"Yes"})"), r);
    CHECK(g.rubric_version == 2);
    CHECK(g.verdicts.at("c1"));
    CHECK_FALSE(g.verdicts.at("c2"));
    CHECK(aggregate_score(r, g) == Score{4, 6});
    CHECK_THROWS_AS(parse_grades(json::parse(R"({"c1":"maybe","c2":"no","c3":"no"})"), r),
                    ParseError);
    CHECK_THROWS_AS(parse_grades(json::parse(R"({"c1":true,"c2":"no","c3":"no"})"), r),
                    ParseError);
    CHECK_THROWS_AS(parse_grades(json::parse(R"({"c1":"yes","c2":"no"})"), r),
                    GradingMismatchError);
    CHECK_THROWS_AS(parse_grades(json::parse(R"(["yes"])"), r), ParseError);
}

TEST_CASE("boxed verdict takes the last occurrence") {
    CHECK(parse_boxed_verdict("I think \\boxed{1}") == JudgeVerdict::First);
    CHECK(parse_boxed_verdict("first \\boxed{1} then on reflection \\boxed{ 2 }") ==
          JudgeVerdict::Second);
    CHECK_THROWS_AS(parse_boxed_verdict("Response 2 is better."), JudgeParseError);
    CHECK_THROWS_AS(parse_boxed_verdict("\\boxed{3}"), JudgeParseError);
    CHECK_THROWS_AS(parse_boxed_verdict("\\boxed{1} \\boxed{tie}"), JudgeParseError);
}

TEST_CASE("a malformed first reply is retried and the attempt recorded") {
    std::vector<int> attempts;
    auto backend = std::make_shared<FunctionBackend>([&](const ChatRequest& r) {
        attempts.push_back(r.attempt);
        return r.attempt == 1 ? std::string("I cannot produce JSON today.") : kCriteriaReply;
    });
    Gateway gw(config(), backend, no_sleep());
    const auto res = propose_initial_rubric("p1", "What is X?", gw);
    CHECK(attempts == std::vector<int>{1, 2});
    CHECK(res.exchange.attempt == 2);
    CHECK(res.rubric.criteria().size() == 2);
    CHECK(res.rubric.version() == 0);
    CHECK(res.rubric.prompt_id() == "p1");
}

TEST_CASE("prose every time exhausts the budget with a ParseError") {
    int calls = 0;
    std::vector<std::chrono::milliseconds> sleeps;
    auto backend = std::make_shared<FunctionBackend>([&](const ChatRequest&) {
        ++calls;
        return std::string("Only prose, sorry.");
    });
    Gateway gw(config(2), backend, no_sleep(&sleeps));
    try {
        (void)propose_initial_rubric("p1", "What is X?", gw);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.raw_reply() == "Only prose, sorry.");
    }
    CHECK(calls == 3);
    // Rejected replies retry at once; only transport failures back off.
    CHECK(sleeps.empty());
}

TEST_CASE("transport failures back off exponentially with jitter") {
    int calls = 0;
    std::vector<std::chrono::milliseconds> sleeps;
    auto backend = std::make_shared<FunctionBackend>([&](const ChatRequest&) -> std::string {
        if (++calls < 4) {
            throw BackendError("connection reset");
        }
        return "\\boxed{2}";
    });
    auto opts = no_sleep(&sleeps);
    opts.backoff_base = std::chrono::milliseconds(100);
    opts.backoff_cap = std::chrono::milliseconds(250);
    Gateway gw(config(3), backend, opts);
    CHECK(judge_pair("q", "a", "b", gw) == JudgeVerdict::Second);
    REQUIRE(sleeps.size() == 3);
    CHECK((sleeps[0].count() >= 50 && sleeps[0].count() <= 100));
    CHECK((sleeps[1].count() >= 100 && sleeps[1].count() <= 200));
    CHECK((sleeps[2].count() >= 125 && sleeps[2].count() <= 250));

    calls = 0;
    Gateway tight(config(1), backend, no_sleep());
    CHECK_THROWS_AS(judge_pair("q", "a", "b", tight), BackendError);
    CHECK(calls == 2);
}

TEST_CASE("in-flight requests never exceed the limit") {
    std::atomic<int> now{0};
    std::atomic<int> peak{0};
    auto backend = std::make_shared<FunctionBackend>([&](const ChatRequest&) {
        const int n = ++now;
        int p = peak.load();
        while (n > p && !peak.compare_exchange_weak(p, n)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --now;
        return std::string("\\boxed{1}");
    });
    Gateway gw(config(0, 3), backend, no_sleep());
    std::vector<std::thread> threads;
    for (int t = 0; t < 12; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 4; ++i) {
                (void)judge_pair("q", "a", "b", gw, t * 10 + i);
            }
        });
    }
    for (auto& th : threads) {
        th.join();
    }
    CHECK(peak.load() <= 3);
    CHECK(gw.peak_in_flight() <= 3);
    CHECK(gw.peak_in_flight() >= 2);
}

TEST_CASE("cache: read-write stores, replay-only serves and refuses misses") {
    testutil::TempDir dir("cache");
    int calls = 0;
    auto backend = std::make_shared<FunctionBackend>([&](const ChatRequest& r) {
        ++calls;
        return r.sample == 0 ? std::string("\\boxed{1}") : std::string("\\boxed{2}");
    });
    GatewayOptions rw = no_sleep();
    rw.cache_dir = dir.path();
    rw.cache_mode = CacheMode::ReadWrite;
    Gateway writer(config(), backend, rw);
    CHECK(judge_pair("q", "a", "b", writer, 0) == JudgeVerdict::First);
    CHECK(judge_pair("q", "a", "b", writer, 1) == JudgeVerdict::Second);
    CHECK(judge_pair("q", "a", "b", writer, 0) == JudgeVerdict::First);
    CHECK(calls == 2);

    GatewayOptions ro = no_sleep();
    ro.cache_dir = dir.path();
    ro.cache_mode = CacheMode::ReplayOnly;
    Gateway replay(config(), nullptr, ro);
    CHECK(judge_pair("q", "a", "b", replay, 1) == JudgeVerdict::Second);
    CHECK_THROWS_AS(judge_pair("q", "a", "c", replay, 0), BackendError);
    CHECK(calls == 2);

    // Model and temperature are part of the key.
    auto other = config();
    other.model_name = "other-model";
    Gateway replay_other(other, nullptr, ro);
    CHECK_THROWS_AS(judge_pair("q", "a", "b", replay_other, 0), BackendError);

    GatewayOptions bad;
    bad.cache_mode = CacheMode::ReplayOnly;
    CHECK_THROWS_AS(Gateway(config(), backend, bad), std::invalid_argument);
}

TEST_CASE("cache key covers every request field") {
    ChatRequest base;
    base.template_id = TemplateId::JudgePair;
    base.substitutions = {{"prompt", "q"}, {"response1", "a"}, {"response2", "b"}};
    base.model = "m";
    const auto k = cache_key(base);
    CHECK(k.size() == 64);
    CHECK(cache_key(base) == k);
    auto v = base;
    v.template_id = TemplateId::ScoreResponse;
    CHECK(cache_key(v) != k);
    v = base;
    v.substitutions["response2"] = "c";
    CHECK(cache_key(v) != k);
    v = base;
    v.model = "n";
    CHECK(cache_key(v) != k);
    v = base;
    v.temperature = 0.7;
    CHECK(cache_key(v) != k);
    v = base;
    v.attempt = 2;
    CHECK(cache_key(v) != k);
    v = base;
    v.sample = 3;
    CHECK(cache_key(v) != k);
    v = base;
    v.rendered = "ignored";
    CHECK(cache_key(v) == k);
}

TEST_CASE("transcript logs every attempt") {
    testutil::TempDir dir("transcript");
    auto log = std::make_shared<TranscriptLog>(dir.path() / "t.jsonl");
    auto backend = std::make_shared<FunctionBackend>([](const ChatRequest& r) {
        return r.attempt == 1 ? std::string("no verdict") : std::string("\\boxed{1}");
    });
    GatewayOptions o = no_sleep();
    o.transcript = log;
    Gateway gw(config(), backend, o);
    (void)judge_pair("q", "a", "b", gw);
    const auto text = testutil::slurp(dir.path() / "t.jsonl");
    std::vector<json> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        lines.push_back(json::parse(line));
    }
    REQUIRE(lines.size() == 2);
    CHECK(lines[0]["attempt"] == 1);
    CHECK(lines[0].contains("error"));
    CHECK(lines[1]["attempt"] == 2);
    CHECK_FALSE(lines[1].contains("error"));
    CHECK(lines[1]["template"] == std::string(template_name(TemplateId::JudgePair)));
    CHECK(lines[1]["request"].get<std::string>().find("a") != std::string::npos);
}

TEST_CASE("config validation") {
    auto c = config();
    c.max_retries = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = config();
    c.max_in_flight = 0;
    CHECK_THROWS_AS(Gateway(c, std::make_shared<SimulatedLlm>()), std::invalid_argument);
    c = config();
    c.temperature = -0.1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("simulated model is deterministic and position-blind") {
    auto sim = std::make_shared<SimulatedLlm>(7, 0.1);
    Gateway gw(config(), sim, no_sleep());
    const std::string prompt = "Explain how volcanic eruptions affect global climate.";
    const auto init = propose_initial_rubric("v", prompt, gw);
    CHECK(init.rubric.criteria().size() >= 2);
    CHECK(propose_initial_rubric("v", prompt, gw).rubric == init.rubric);

    const std::string good = "Volcanic eruptions inject sulfate aerosols into the stratosphere, "
                             "reflecting sunlight and cooling the global climate for a few years.";
    const std::string poor = "They are loud.";
    CHECK(judge_pair(prompt, good, poor, gw) == JudgeVerdict::First);
    CHECK(judge_pair(prompt, poor, good, gw) == JudgeVerdict::Second);

    const auto refined = propose_refined_rubric(prompt, init.rubric, good, poor, gw);
    CHECK(refined.criteria.size() == init.rubric.criteria().size() + 1);

    auto verifier = make_verifier(std::make_shared<Gateway>(config(), sim, no_sleep()));
    const auto a = grade_with_votes(prompt, good, init.rubric, verifier, 5, 4);
    const auto b = grade_with_votes(prompt, good, init.rubric, verifier, 5, 1);
    CHECK(a == b);
    bool varied = false;
    for (const auto& g : a) {
        varied = varied || g != a[0];
    }
    CHECK(varied);
}

TEST_CASE("stable hash is fixed across builds") {
    CHECK(stable_hash("", 0) == stable_hash("", 0));
    CHECK(stable_hash("abc", 1) != stable_hash("abc", 2));
    CHECK(keywords("The Volcanic eruption, volcanic ash and the sky") ==
          std::vector<std::string>{"volcanic", "eruption"});
}
