#include "rubricrl/eval_harness.hpp"

#include "rubricrl/error.hpp"
#include "rubricrl/parallel.hpp"

#include <random>
#include <set>

namespace rubricrl {

namespace {

using PromptMap = std::map<std::string, std::string, std::less<>>;

std::vector<bool> draw_flips(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<bool> flips(n);
    for (std::size_t i = 0; i < n; ++i) {
        flips[i] = (rng() >> 63) != 0;
    }
    return flips;
}

std::string join_ids(const std::set<std::string, std::less<>>& ids) {
    std::string out;
    for (const auto& id : ids) {
        out += out.empty() ? "" : ", ";
        out += id;
    }
    return out;
}

template <class Pair>
void require_prompts(const std::vector<Pair>& pairs, const PromptMap& prompts) {
    std::set<std::string, std::less<>> missing;
    for (const auto& p : pairs) {
        if (!prompts.contains(p.prompt_id)) {
            missing.insert(p.prompt_id);
        }
    }
    if (!missing.empty()) {
        throw InputError("no prompt text for: " + join_ids(missing));
    }
}

struct Judged {
    bool ok = false;
    bool first_shown_wins = false;
    std::string error;
};

Judged judge_once(const JudgeFn& judge, const std::string& prompt, const std::string& shown_first,
                  const std::string& shown_second) {
    Judged j;
    try {
        j.first_shown_wins = judge(prompt, shown_first, shown_second) == JudgeVerdict::First;
        j.ok = true;
    } catch (const ParseError& e) {
        j.error = e.what();
    }
    return j;
}

} // namespace

std::string_view to_string(Region r) { return r == Region::High ? "high" : "low"; }

Region region_from_string(std::string_view s) {
    if (s == "high") {
        return Region::High;
    }
    if (s == "low") {
        return Region::Low;
    }
    throw InputError("region must be \"high\" or \"low\", got \"" + std::string(s) + "\"");
}

JudgeFn make_judge(std::shared_ptr<Gateway> judge) {
    return [judge = std::move(judge)](const std::string& prompt, const std::string& first,
                                      const std::string& second) {
        return judge_pair(prompt, first, second, *judge);
    };
}

WinRateReport winrate_eval(const std::vector<EvalPair>& pairs, const PromptMap& prompts,
                           const JudgeFn& judge, std::uint64_t seed, std::size_t jobs) {
    if (pairs.empty()) {
        throw ProtocolError("win-rate evaluation needs at least one pair");
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].policy_response.empty() || pairs[i].reference_response.empty()) {
            throw InputError("evaluation pair " + std::to_string(i) + " ('" + pairs[i].prompt_id +
                             "') has an empty response");
        }
    }
    require_prompts(pairs, prompts);

    const auto flips = draw_flips(pairs.size(), seed);
    WinRateReport report;
    report.n_pairs = pairs.size();
    report.records.resize(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
        const auto& p = pairs[i];
        auto& rec = report.records[i];
        rec.index = i;
        rec.prompt_id = p.prompt_id;
        rec.flipped = flips[i];
        const auto& first = rec.flipped ? p.reference_response : p.policy_response;
        const auto& second = rec.flipped ? p.policy_response : p.reference_response;
        const auto j = judge_once(judge, prompts.find(p.prompt_id)->second, first, second);
        if (!j.ok) {
            rec.parse_failed = true;
            rec.error = j.error;
            return;
        }
        rec.raw_verdict = j.first_shown_wins ? "1" : "2";
        rec.policy_wins = j.first_shown_wins != rec.flipped;
    });
    for (const auto& rec : report.records) {
        report.n_wins += rec.policy_wins;
        report.n_parse_failures += rec.parse_failed;
    }
    report.win_rate = static_cast<double>(report.n_wins) / static_cast<double>(report.n_pairs);
    return report;
}

AccuracyResult region_accuracy(const std::vector<RegionPair>& pairs, const PromptMap& prompts,
                               const std::map<std::string, Rubric, std::less<>>& rubrics,
                               const VerifierFn& verifier, const JudgeFn& judge, int votes,
                               std::uint64_t seed, std::size_t jobs) {
    if (pairs.empty()) {
        throw ProtocolError("accuracy evaluation needs at least one pair");
    }
    if (votes < 1 || votes % 2 == 0) {
        throw ProtocolError("vote count must be odd and positive, got " + std::to_string(votes));
    }
    std::set<std::string, std::less<>> missing;
    for (const auto& p : pairs) {
        if (!rubrics.contains(p.prompt_id)) {
            missing.insert(p.prompt_id);
        }
    }
    if (!missing.empty()) {
        throw InputError("no rubric for: " + join_ids(missing));
    }
    require_prompts(pairs, prompts);

    const auto flips = draw_flips(pairs.size(), seed);
    AccuracyResult result;
    result.records.resize(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
        const auto& p = pairs[i];
        const auto& prompt = prompts.find(p.prompt_id)->second;
        const auto& rubric = rubrics.find(p.prompt_id)->second;
        auto& rec = result.records[i];
        rec.index = i;
        rec.prompt_id = p.prompt_id;
        rec.region = p.region;
        rec.flipped = flips[i];

        const auto& first = rec.flipped ? p.response_b : p.response_a;
        const auto& second = rec.flipped ? p.response_a : p.response_b;
        const auto j = judge_once(judge, prompt, first, second);
        if (j.ok) {
            const bool a_wins = j.first_shown_wins != rec.flipped;
            rec.truth = a_wins ? "first" : "second";
        } else {
            rec.error = j.error;
        }

        for (const auto& g : grade_with_votes(prompt, p.response_a, rubric, verifier, votes)) {
            rec.scores_a.push_back(aggregate_score(rubric, g));
        }
        for (const auto& g : grade_with_votes(prompt, p.response_b, rubric, verifier, votes)) {
            rec.scores_b.push_back(aggregate_score(rubric, g));
        }
        const auto pref = majority_preference(std::span<const Score>(rec.scores_a),
                                              std::span<const Score>(rec.scores_b));
        rec.rubric = std::string(to_string(pref));
        if (pref == Preference::Tie) {
            rec.outcome = "tie";
        } else if (!rec.truth.empty() && rec.rubric == rec.truth) {
            rec.outcome = "correct";
        } else {
            rec.outcome = "wrong";
        }
    });

    for (Region region : {Region::High, Region::Low}) {
        AccuracyReport rep;
        rep.region = region;
        for (const auto& rec : result.records) {
            if (rec.region != region) {
                continue;
            }
            ++rep.n_pairs;
            rep.n_correct += rec.outcome == "correct";
            rep.n_ties += rec.outcome == "tie";
            rep.n_wrong += rec.outcome == "wrong";
        }
        if (rep.n_pairs > 0) {
            rep.accuracy = static_cast<double>(rep.n_correct) / static_cast<double>(rep.n_pairs);
            result.reports.push_back(rep);
        }
    }
    return result;
}

} // namespace rubricrl
