#pragma once

#include "rubricrl/llm_gateway.hpp"
#include "rubricrl/rubric.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace rubricrl {

struct EvalPair {
    std::string prompt_id;
    std::string policy_response;
    std::string reference_response;

    bool operator==(const EvalPair&) const = default;
};

enum class Region { High, Low };

std::string_view to_string(Region r);
// "high" / "low"; throws InputError otherwise.
Region region_from_string(std::string_view s);

struct RegionPair {
    std::string prompt_id;
    std::string response_a;
    std::string response_b;
    Region region = Region::High;

    bool operator==(const RegionPair&) const = default;
};

// (prompt, response shown first, response shown second) -> verdict. Throws
// JudgeParseError (or another ParseError) when no verdict could be read.
using JudgeFn =
    std::function<JudgeVerdict(const std::string&, const std::string&, const std::string&)>;

JudgeFn make_judge(std::shared_ptr<Gateway> judge);

struct PairRecord {
    std::size_t index = 0;
    std::string prompt_id;
    bool flipped = false;          // policy response shown second
    std::string raw_verdict;       // "1", "2", or "" on a parse failure
    bool policy_wins = false;
    bool parse_failed = false;
    std::string error;

    bool operator==(const PairRecord&) const = default;
};

struct WinRateReport {
    std::size_t n_pairs = 0;
    std::size_t n_wins = 0;
    std::size_t n_parse_failures = 0;
    double win_rate = 0.0;
    std::vector<PairRecord> records;
};

// Coin flips come from one mt19937_64 stream drawn in pair order before any
// judging, so the result does not depend on `jobs`. Prompts are looked up
// by prompt_id; a missing entry is an InputError. Throws ProtocolError on
// an empty pair list.
WinRateReport winrate_eval(const std::vector<EvalPair>& pairs,
                           const std::map<std::string, std::string, std::less<>>& prompts,
                           const JudgeFn& judge, std::uint64_t seed, std::size_t jobs = 1);

struct AccuracyReport {
    Region region = Region::High;
    std::size_t n_pairs = 0;
    std::size_t n_correct = 0;
    std::size_t n_ties = 0;
    std::size_t n_wrong = 0;
    double accuracy = 0.0;
};

struct RegionPairRecord {
    std::size_t index = 0;
    std::string prompt_id;
    Region region = Region::High;
    bool flipped = false;
    std::string truth;      // "first" (response_a), "second", or "" if the judge failed
    std::string rubric;     // majority preference: "first", "second", "tie"
    std::vector<Score> scores_a;
    std::vector<Score> scores_b;
    std::string outcome;    // "correct", "tie", "wrong"
    std::string error;
};

struct AccuracyResult {
    std::vector<AccuracyReport> reports; // High then Low, only regions present
    std::vector<RegionPairRecord> records;
};

// Ground truth is one position-flipped judge call; the rubric side is
// majority_preference over `votes` gradings of each response. Ties and
// unreadable judge replies count as incorrect. Every prompt must have a
// rubric and a prompt text; otherwise InputError names all missing ids
// before any call is made.
AccuracyResult region_accuracy(const std::vector<RegionPair>& pairs,
                               const std::map<std::string, std::string, std::less<>>& prompts,
                               const std::map<std::string, Rubric, std::less<>>& rubrics,
                               const VerifierFn& verifier, const JudgeFn& judge, int votes,
                               std::uint64_t seed, std::size_t jobs = 1);

} // namespace rubricrl
