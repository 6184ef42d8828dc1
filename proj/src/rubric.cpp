#include "rubricrl/rubric.hpp"

#include "rubricrl/error.hpp"
#include "rubricrl/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <optional>
#include <sstream>

namespace rubricrl {

namespace {

std::optional<unsigned long> id_number(std::string_view id) {
    if (id.size() < 2 || id[0] != 'c') {
        return std::nullopt;
    }
    unsigned long n = 0;
    const auto* first = id.data() + 1;
    const auto* last = id.data() + id.size();
    auto [ptr, ec] = std::from_chars(first, last, n);
    if (ec != std::errc{} || ptr != last) {
        return std::nullopt;
    }
    return n;
}

std::string join(const std::vector<std::string>& xs) {
    std::string out;
    for (const auto& x : xs) {
        if (!out.empty()) {
            out += ", ";
        }
        out += x;
    }
    return out;
}

template <class T>
Preference majority_impl(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) {
        std::ostringstream os;
        os << "majority vote needs equal-length score lists, got " << a.size() << " and "
           << b.size();
        throw ProtocolError(os.str());
    }
    if (a.size() % 2 == 0) {
        std::ostringstream os;
        os << "majority vote needs an odd number of gradings, got " << a.size();
        throw ProtocolError(os.str());
    }
    int first = 0;
    int second = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) {
            ++first;
        } else if (a[i] < b[i]) {
            ++second;
        }
    }
    if (first > second) {
        return Preference::First;
    }
    if (second > first) {
        return Preference::Second;
    }
    return Preference::Tie;
}

void check_unit_scores(std::span<const double> xs) {
    for (double x : xs) {
        if (!(x >= 0.0 && x <= 1.0)) {
            std::ostringstream os;
            os << "rubric scores must lie in [0,1], got " << x;
            throw ProtocolError(os.str());
        }
    }
}

} // namespace

std::string criterion_id(std::size_t index) { return "c" + std::to_string(index + 1); }

bool criterion_id_less(std::string_view a, std::string_view b) {
    const auto na = id_number(a);
    const auto nb = id_number(b);
    if (na && nb) {
        return *na < *nb;
    }
    if (na != nb) {
        return na.has_value(); // numbered ids first
    }
    return a < b;
}

Rubric::Rubric(std::string prompt_id, int version, std::vector<Criterion> criteria)
    : prompt_id_(std::move(prompt_id)), version_(version), criteria_(std::move(criteria)) {
    if (version_ < 0) {
        throw InvalidRubricError("rubric version must be nonnegative");
    }
    if (criteria_.empty()) {
        throw InvalidRubricError("rubric for '" + prompt_id_ + "' has no criteria");
    }
    for (std::size_t i = 0; i < criteria_.size(); ++i) {
        const auto& c = criteria_[i];
        if (c.id != criterion_id(i)) {
            throw InvalidRubricError("criterion " + std::to_string(i + 1) + " has id '" + c.id +
                                     "', expected '" + criterion_id(i) + "'");
        }
        if (c.text.empty()) {
            throw InvalidRubricError("criterion " + c.id + " has empty text");
        }
        if (c.weight < kMinWeight || c.weight > kMaxWeight) {
            throw InvalidRubricError("criterion " + c.id + " has weight " +
                                     std::to_string(c.weight) + " outside [1,3]");
        }
        total_weight_ += c.weight;
    }
}

Rubric Rubric::from_drafts(std::string prompt_id, int version,
                           const std::vector<CriterionDraft>& drafts) {
    std::vector<Criterion> criteria;
    criteria.reserve(drafts.size());
    for (std::size_t i = 0; i < drafts.size(); ++i) {
        criteria.push_back({criterion_id(i), drafts[i].text, drafts[i].weight});
    }
    return Rubric(std::move(prompt_id), version, std::move(criteria));
}

std::vector<CriterionDraft> Rubric::drafts() const {
    std::vector<CriterionDraft> out;
    out.reserve(criteria_.size());
    for (const auto& c : criteria_) {
        out.push_back({c.text, c.weight});
    }
    return out;
}

std::vector<std::string> Rubric::ids() const {
    std::vector<std::string> out;
    out.reserve(criteria_.size());
    for (const auto& c : criteria_) {
        out.push_back(c.id);
    }
    return out;
}

void check_grade_keys(const Rubric& rubric, const GradeVector& grades) {
    std::vector<std::string> missing;
    std::vector<std::string> extra;
    for (const auto& c : rubric.criteria()) {
        if (!grades.verdicts.contains(c.id)) {
            missing.push_back(c.id);
        }
    }
    for (const auto& [id, verdict] : grades.verdicts) {
        const auto& cs = rubric.criteria();
        const bool known =
            std::any_of(cs.begin(), cs.end(), [&](const Criterion& c) { return c.id == id; });
        if (!known) {
            extra.push_back(id);
        }
    }
    std::sort(extra.begin(), extra.end(), [](const auto& a, const auto& b) {
        return criterion_id_less(a, b);
    });
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "grades do not match rubric '" + rubric.prompt_id() + "'";
        if (!missing.empty()) {
            msg += "; missing: " + join(missing);
        }
        if (!extra.empty()) {
            msg += "; extra: " + join(extra);
        }
        throw GradingMismatchError(msg, std::move(missing), std::move(extra));
    }
}

Score aggregate_score(const Rubric& rubric, const GradeVector& grades) {
    if (grades.rubric_version != rubric.version()) {
        throw GradingMismatchError("grades are for rubric version " +
                                       std::to_string(grades.rubric_version) + ", rubric '" +
                                       rubric.prompt_id() + "' is version " +
                                       std::to_string(rubric.version()),
                                   {}, {});
    }
    check_grade_keys(rubric, grades);
    Score s{0, rubric.total_weight()};
    for (const auto& c : rubric.criteria()) {
        if (grades.verdicts.find(c.id)->second) {
            s.numerator += c.weight;
        }
    }
    return s;
}

std::string_view to_string(Preference p) {
    switch (p) {
    case Preference::First: return "first";
    case Preference::Second: return "second";
    case Preference::Tie: return "tie";
    }
    return "tie";
}

Preference majority_preference(std::span<const double> scores_a,
                               std::span<const double> scores_b) {
    check_unit_scores(scores_a);
    check_unit_scores(scores_b);
    return majority_impl(scores_a, scores_b);
}

Preference majority_preference(std::span<const Score> scores_a, std::span<const Score> scores_b) {
    return majority_impl(scores_a, scores_b);
}

std::vector<GradeVector> grade_with_votes(std::string_view prompt, std::string_view response,
                                          const Rubric& rubric, const VerifierFn& verifier,
                                          int votes, std::size_t jobs) {
    if (votes < 1 || votes % 2 == 0) {
        throw ProtocolError("vote count must be odd and positive, got " + std::to_string(votes));
    }
    std::vector<GradeVector> out(static_cast<std::size_t>(votes));
    parallel_for(out.size(), jobs, [&](std::size_t i) {
        out[i] = verifier(GradeRequest{prompt, response, rubric, static_cast<int>(i)});
        check_grade_keys(rubric, out[i]);
    });
    return out;
}

} // namespace rubricrl
