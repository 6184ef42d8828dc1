#pragma once

#include "rubricrl/llm_gateway.hpp"
#include "rubricrl/rubric.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rubricrl {

struct Candidate {
    std::string response_id;
    std::string text;
    std::string source_model;
};

class CandidatePool {
public:
    // Throws PoolTooSmallError below two candidates, InputError on
    // duplicate or empty response ids.
    CandidatePool(std::string prompt_id, std::vector<Candidate> candidates);

    const std::string& prompt_id() const { return prompt_id_; }
    const std::vector<Candidate>& candidates() const { return candidates_; }

private:
    std::string prompt_id_;
    std::vector<Candidate> candidates_;
};

using ScoreMap = std::map<std::string, double, std::less<>>;

// The two best ids, best first. Equal scores go to the lexicographically
// smaller id. Throws PoolTooSmallError with fewer than two entries.
std::pair<std::string, std::string> select_top2(const ScoreMap& scores);

// Full replacement criteria for (prompt, rubric, response a, response b).
using ProposerFn = std::function<RefinedCriteria(const std::string&, const Rubric&,
                                                 const std::string&, const std::string&)>;

// One grading of one candidate under a rubric.
using ScorerFn = std::function<Score(const std::string& prompt, const Rubric&, const Candidate&)>;

ProposerFn make_proposer(std::shared_ptr<Gateway> proposer);

// Single-vote scorer over a verifier.
ScorerFn make_scorer(VerifierFn verifier);

// Asks the proposer for a rubric that separates the two responses. The
// result keeps the prompt id, gets ids c1..cN and version + 1. A reply that
// never parses becomes RefinementFailedError; an empty array stays
// InvalidRubricError. Clamping warnings are appended to `warnings`.
Rubric rtd_step(const std::string& prompt, const Rubric& rubric, const std::string& response_a,
                const std::string& response_b, const ProposerFn& proposer,
                std::vector<std::string>* warnings = nullptr);

struct RoundRecord {
    int round_index = 0; // 1-based
    bool ok = false;
    // Insertion order follows the pool; empty when scoring failed.
    std::vector<std::pair<std::string, double>> scores;
    std::optional<std::pair<std::string, std::string>> selected_pair;
    int rubric_version_before = 0;
    int rubric_version_after = 0;
    std::vector<std::string> warnings;
    std::string error;

    bool operator==(const RoundRecord&) const = default;
};

struct RefinementTrace {
    std::string prompt_id;
    std::vector<RoundRecord> rounds;

    bool operator==(const RefinementTrace&) const = default;
};

struct RefinementResult {
    Rubric rubric;
    RefinementTrace trace;
};

// `rounds` passes of score-all, select_top2, rtd_step. A round
// whose scoring or proposal fails is recorded and the rubric carried
// forward. Throws RefinementFailedError when every round fails.
RefinementResult refine_iterative(const std::string& prompt, const CandidatePool& pool,
                                  const Rubric& rubric, int rounds, const ScorerFn& scorer,
                                  const ProposerFn& proposer, std::size_t jobs = 1);

} // namespace rubricrl
