#include "rubricrl/refinement.hpp"

#include "rubricrl/error.hpp"
#include "rubricrl/parallel.hpp"

#include <algorithm>
#include <set>

namespace rubricrl {

CandidatePool::CandidatePool(std::string prompt_id, std::vector<Candidate> candidates)
    : prompt_id_(std::move(prompt_id)), candidates_(std::move(candidates)) {
    if (candidates_.size() < 2) {
        throw PoolTooSmallError("candidate pool for '" + prompt_id_ + "' has " +
                                std::to_string(candidates_.size()) +
                                " response(s), refinement needs at least 2");
    }
    std::set<std::string, std::less<>> seen;
    for (const auto& c : candidates_) {
        if (c.response_id.empty()) {
            throw InputError("candidate pool for '" + prompt_id_ + "' has an empty response id");
        }
        if (!seen.insert(c.response_id).second) {
            throw InputError("candidate pool for '" + prompt_id_ + "' repeats response id '" +
                             c.response_id + "'");
        }
    }
}

std::pair<std::string, std::string> select_top2(const ScoreMap& scores) {
    if (scores.size() < 2) {
        throw PoolTooSmallError("need at least 2 scored responses to select a pair, got " +
                                std::to_string(scores.size()));
    }
    std::vector<std::pair<std::string, double>> ranked(scores.begin(), scores.end());
    // The map is already id-ordered, so a stable sort on score alone keeps
    // the smaller id first on ties.
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return {ranked[0].first, ranked[1].first};
}

ProposerFn make_proposer(std::shared_ptr<Gateway> proposer) {
    return [proposer = std::move(proposer)](const std::string& prompt, const Rubric& rubric,
                                            const std::string& a, const std::string& b) {
        return propose_refined_rubric(prompt, rubric, a, b, *proposer);
    };
}

ScorerFn make_scorer(VerifierFn verifier) {
    return [verifier = std::move(verifier)](const std::string& prompt, const Rubric& rubric,
                                            const Candidate& c) {
        const auto grades = grade_with_votes(prompt, c.text, rubric, verifier, 1);
        return aggregate_score(rubric, grades.front());
    };
}

Rubric rtd_step(const std::string& prompt, const Rubric& rubric, const std::string& response_a,
                const std::string& response_b, const ProposerFn& proposer,
                std::vector<std::string>* warnings) {
    RefinedCriteria refined;
    try {
        refined = proposer(prompt, rubric, response_a, response_b);
    } catch (const ParseError& e) {
        throw RefinementFailedError(std::string("refinement reply unusable: ") + e.what(),
                                    e.raw_reply());
    }
    if (refined.criteria.empty()) {
        throw InvalidRubricError("proposer returned an empty criteria array");
    }
    if (warnings) {
        warnings->insert(warnings->end(), refined.warnings.begin(), refined.warnings.end());
    }
    return Rubric::from_drafts(rubric.prompt_id(), rubric.version() + 1, refined.criteria);
}

RefinementResult refine_iterative(const std::string& prompt, const CandidatePool& pool,
                                  const Rubric& rubric, int rounds, const ScorerFn& scorer,
                                  const ProposerFn& proposer, std::size_t jobs) {
    if (rounds < 1) {
        throw DomainError("refinement needs at least one round, got " + std::to_string(rounds));
    }
    const auto& cands = pool.candidates();
    RefinementResult out{rubric, {pool.prompt_id(), {}}};
    std::string last_raw;
    std::string last_error;
    int succeeded = 0;

    for (int r = 1; r <= rounds; ++r) {
        RoundRecord rec;
        rec.round_index = r;
        rec.rubric_version_before = out.rubric.version();
        rec.rubric_version_after = out.rubric.version();
        try {
            std::vector<Score> scores(cands.size());
            parallel_for(cands.size(), jobs, [&](std::size_t i) {
                scores[i] = scorer(prompt, out.rubric, cands[i]);
            });
            ScoreMap by_id;
            for (std::size_t i = 0; i < cands.size(); ++i) {
                rec.scores.emplace_back(cands[i].response_id, scores[i].value());
                by_id.emplace(cands[i].response_id, scores[i].value());
            }
            rec.selected_pair = select_top2(by_id);
            const auto text_of = [&](const std::string& id) -> const std::string& {
                return std::find_if(cands.begin(), cands.end(),
                                    [&](const Candidate& c) { return c.response_id == id; })
                    ->text;
            };
            auto next = rtd_step(prompt, out.rubric, text_of(rec.selected_pair->first),
                                 text_of(rec.selected_pair->second), proposer, &rec.warnings);
            out.rubric = std::move(next);
            rec.rubric_version_after = out.rubric.version();
            rec.ok = true;
            ++succeeded;
        } catch (const RefinementFailedError& e) {
            rec.error = e.what();
            last_raw = e.raw_reply();
        } catch (const Error& e) {
            rec.error = e.what();
        }
        if (!rec.ok) {
            last_error = rec.error;
        }
        out.trace.rounds.push_back(std::move(rec));
    }
    if (succeeded == 0) {
        throw RefinementFailedError("all " + std::to_string(rounds) + " refinement rounds for '" +
                                        pool.prompt_id() + "' failed; last error: " + last_error,
                                    last_raw);
    }
    return out;
}

} // namespace rubricrl
