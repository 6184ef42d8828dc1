#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rubricrl {

// Binary criterion weighted 1 (least important) to 3 (most important).
struct Criterion {
    std::string id; // c1, c2, ...
    std::string text;
    int weight = 1;

    bool operator==(const Criterion&) const = default;
};

// Criterion as returned by a proposer, before ids are assigned.
struct CriterionDraft {
    std::string text;
    int weight = 1;

    bool operator==(const CriterionDraft&) const = default;
};

inline constexpr int kMinWeight = 1;
inline constexpr int kMaxWeight = 3;

// Per-prompt rubric. Criterion ids are always c1..cN in list order.
class Rubric {
public:
    // Throws InvalidRubricError if criteria are empty, ids are not c1..cN,
    // a weight is outside [1,3], a text is empty, or version < 0.
    Rubric(std::string prompt_id, int version, std::vector<Criterion> criteria);

    // Assigns ids c1..cN in order.
    static Rubric from_drafts(std::string prompt_id, int version,
                              const std::vector<CriterionDraft>& drafts);

    const std::string& prompt_id() const { return prompt_id_; }
    int version() const { return version_; }
    const std::vector<Criterion>& criteria() const { return criteria_; }
    int total_weight() const { return total_weight_; }

    std::vector<CriterionDraft> drafts() const;
    std::vector<std::string> ids() const;

    bool operator==(const Rubric&) const = default;

private:
    std::string prompt_id_;
    int version_ = 0;
    std::vector<Criterion> criteria_;
    int total_weight_ = 0;
};

std::string criterion_id(std::size_t index); // 0 -> "c1"

// Orders "c2" before "c10"; falls back to lexicographic for other shapes.
bool criterion_id_less(std::string_view a, std::string_view b);

// Verifier verdicts for one response against one rubric version.
struct GradeVector {
    int rubric_version = 0;
    std::map<std::string, bool, std::less<>> verdicts;

    bool operator==(const GradeVector&) const = default;
};

// Exact weighted score numerator / denominator (not reduced).
struct Score {
    std::int64_t numerator = 0;
    std::int64_t denominator = 1;

    double value() const {
        return static_cast<double>(numerator) / static_cast<double>(denominator);
    }

    // Compares the rational values, so 9/10 == 18/20.
    friend bool operator==(const Score& a, const Score& b) {
        return a.numerator * b.denominator == b.numerator * a.denominator;
    }
    friend std::strong_ordering operator<=>(const Score& a, const Score& b) {
        return a.numerator * b.denominator <=> b.numerator * a.denominator;
    }
};

// sum_i w_i V_i / sum_i w_i. Throws GradingMismatchError when the verdict
// keys differ from the rubric ids or the versions disagree.
Score aggregate_score(const Rubric& rubric, const GradeVector& grades);

// Verifies `grades` covers exactly the rubric's ids; throws
// GradingMismatchError naming missing and extra ids otherwise.
void check_grade_keys(const Rubric& rubric, const GradeVector& grades);

enum class Preference { First, Second, Tie };

std::string_view to_string(Preference p);

// Per-index vote (First if a > b, Second if a < b, Tie otherwise); strict
// majority of the non-tie votes wins, equal counts give Tie. Lists must have
// equal odd length and entries in [0,1]; ProtocolError otherwise.
Preference majority_preference(std::span<const double> scores_a, std::span<const double> scores_b);
Preference majority_preference(std::span<const Score> scores_a, std::span<const Score> scores_b);

struct GradeRequest {
    std::string_view prompt;
    std::string_view response;
    const Rubric& rubric;
    int vote_index = 0;
};

// Verifier backend: one independent grading per call.
using VerifierFn = std::function<GradeVector(const GradeRequest&)>;

// Calls the verifier `votes` times (vote_index 0..votes-1) on up to `jobs`
// threads. Results are ordered by vote index. `votes` must be odd and
// positive; ProtocolError otherwise.
std::vector<GradeVector> grade_with_votes(std::string_view prompt, std::string_view response,
                                          const Rubric& rubric, const VerifierFn& verifier,
                                          int votes, std::size_t jobs = 1);

} // namespace rubricrl
