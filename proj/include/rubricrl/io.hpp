#pragma once

#include "rubricrl/eval_harness.hpp"
#include "rubricrl/refinement.hpp"
#include "rubricrl/reward_theory.hpp"
#include "rubricrl/rubric.hpp"
#include "rubricrl/tilted_sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace rubricrl {

using ordered_json = nlohmann::ordered_json;

struct PromptRecord {
    std::string id;
    std::string prompt;
    std::optional<std::string> domain;

    bool operator==(const PromptRecord&) const = default;
};

struct ResponseRecord {
    std::string prompt_id;
    std::string response_id;
    std::string source_model;
    std::string text;

    bool operator==(const ResponseRecord&) const = default;
};

// One grading of one response.
struct GradeRecord {
    std::string prompt_id;
    std::string response_id;
    int vote = 0;
    GradeVector grades;
    std::optional<Score> score; // filled when written by the scorer

    bool operator==(const GradeRecord&) const = default;
};

// Record <-> JSON. Readers throw InputError on a missing or mistyped field.
ordered_json to_json(const PromptRecord& r);
ordered_json to_json(const ResponseRecord& r);
ordered_json to_json(const Rubric& r);
ordered_json to_json(const GradeRecord& r);
ordered_json to_json(const std::string& prompt_id, const RoundRecord& r);
ordered_json to_json(const EvalPair& r);
ordered_json to_json(const RegionPair& r);
ordered_json to_json(const PairRecord& r);
ordered_json to_json(const RegionPairRecord& r);
ordered_json to_json(const AccuracyReport& r);

PromptRecord prompt_from_json(const ordered_json& j);
ResponseRecord response_from_json(const ordered_json& j);
Rubric rubric_from_json(const ordered_json& j);
GradeRecord grade_from_json(const ordered_json& j);
std::pair<std::string, RoundRecord> round_from_json(const ordered_json& j);
EvalPair eval_pair_from_json(const ordered_json& j);
RegionPair region_pair_from_json(const ordered_json& j);

// "n/d".
std::string format_score(const Score& s);
Score parse_score(std::string_view s);

// Parses every nonblank line; InputError names the file and line.
std::vector<ordered_json> read_jsonl(const std::filesystem::path& path);

[[noreturn]] void throw_record_error(const std::filesystem::path& path, std::size_t record,
                                     const std::string& what);

template <class T, class F>
std::vector<T> read_records(const std::filesystem::path& path, F&& from_json) {
    std::vector<T> out;
    std::size_t line = 0;
    for (const auto& j : read_jsonl(path)) {
        ++line;
        try {
            out.push_back(from_json(j));
        } catch (const std::exception& e) {
            throw_record_error(path, line, e.what());
        }
    }
    return out;
}

std::string to_jsonl_line(const ordered_json& j);

// Writes the whole file through a temporary and a rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

// Appends JSONL lines in sequence order from concurrent producers: line k
// is written only after lines 0..k-1, each flushed as it lands.
class OrderedJsonlWriter {
public:
    OrderedJsonlWriter(const std::filesystem::path& path, bool append);

    // Record for slot `seq`; an empty vector fills the slot without output.
    void put(std::size_t seq, std::vector<ordered_json> lines);

private:
    std::mutex mutex_;
    std::ofstream out_;
    std::size_t next_ = 0;
    std::map<std::size_t, std::vector<ordered_json>> pending_;
};

// CSV header mapping,param_c,beta,kl,win_rate; numbers with 12 significant
// digits.
std::string curve_csv_header();
std::string curve_csv_rows(const MisspecMap& map, const std::vector<TradeoffPoint>& points);

// Two-column CSV gold_reward,prob with a header line.
std::vector<Atom> read_dist_csv(const std::filesystem::path& path);

std::string format_g12(double x);

// Lookup tables with referential checks.
std::map<std::string, PromptRecord, std::less<>>
index_prompts(const std::vector<PromptRecord>& prompts);

// Responses grouped by prompt id in file order. Throws InputError listing
// dangling prompt ids and duplicate (prompt_id, response_id) pairs.
std::map<std::string, std::vector<ResponseRecord>, std::less<>>
index_responses(const std::vector<ResponseRecord>& responses,
                const std::map<std::string, PromptRecord, std::less<>>& prompts);

// One rubric per prompt id; the highest version wins when a file holds
// several. Throws InputError on dangling ids when `prompts` is given.
std::map<std::string, Rubric, std::less<>>
index_rubrics(const std::vector<Rubric>& rubrics,
              const std::map<std::string, PromptRecord, std::less<>>* prompts);

} // namespace rubricrl
