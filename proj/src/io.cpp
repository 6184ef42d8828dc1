#include "rubricrl/io.hpp"

#include "rubricrl/error.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>
#include <sstream>

namespace rubricrl {

namespace {

const ordered_json& field(const ordered_json& j, const char* key) {
    if (!j.is_object()) {
        throw InputError("record is not a JSON object");
    }
    const auto it = j.find(key);
    if (it == j.end()) {
        throw InputError(std::string("missing field \"") + key + "\"");
    }
    return *it;
}

std::string str_field(const ordered_json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_string()) {
        throw InputError(std::string("field \"") + key + "\" must be a string");
    }
    return v.get<std::string>();
}

std::string nonempty_str_field(const ordered_json& j, const char* key) {
    auto s = str_field(j, key);
    if (s.empty()) {
        throw InputError(std::string("field \"") + key + "\" is empty");
    }
    return s;
}

long long int_field(const ordered_json& j, const char* key) {
    const auto& v = field(j, key);
    if (!v.is_number_integer()) {
        throw InputError(std::string("field \"") + key + "\" must be an integer");
    }
    return v.get<long long>();
}

std::string optional_str(const ordered_json& j, const char* key) {
    const auto it = j.find(key);
    return it == j.end() ? std::string{} : it->get<std::string>();
}

ordered_json verdicts_json(const GradeVector& g) {
    std::vector<std::string> ids;
    for (const auto& [id, v] : g.verdicts) {
        ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end(),
              [](const auto& a, const auto& b) { return criterion_id_less(a, b); });
    ordered_json out = ordered_json::object();
    for (const auto& id : ids) {
        out[id] = g.verdicts.find(id)->second ? "yes" : "no";
    }
    return out;
}

std::string join(const std::set<std::string, std::less<>>& xs) {
    std::string out;
    for (const auto& x : xs) {
        out += out.empty() ? "" : ", ";
        out += x;
    }
    return out;
}

} // namespace

ordered_json to_json(const PromptRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["prompt"] = r.prompt;
    if (r.domain) {
        j["domain"] = *r.domain;
    }
    return j;
}

ordered_json to_json(const ResponseRecord& r) {
    ordered_json j;
    j["prompt_id"] = r.prompt_id;
    j["response_id"] = r.response_id;
    j["source_model"] = r.source_model;
    j["text"] = r.text;
    return j;
}

ordered_json to_json(const Rubric& r) {
    ordered_json j;
    j["prompt_id"] = r.prompt_id();
    j["version"] = r.version();
    ordered_json cs = ordered_json::array();
    for (const auto& c : r.criteria()) {
        cs.push_back({{"id", c.id}, {"criterion", c.text}, {"weight", c.weight}});
    }
    j["criteria"] = std::move(cs);
    return j;
}

ordered_json to_json(const GradeRecord& r) {
    ordered_json j;
    j["prompt_id"] = r.prompt_id;
    j["response_id"] = r.response_id;
    j["rubric_version"] = r.grades.rubric_version;
    j["vote"] = r.vote;
    j["verdicts"] = verdicts_json(r.grades);
    if (r.score) {
        j["score"] = format_score(*r.score);
        j["score_value"] = r.score->value();
    }
    return j;
}

ordered_json to_json(const std::string& prompt_id, const RoundRecord& r) {
    ordered_json j;
    j["prompt_id"] = prompt_id;
    j["round"] = r.round_index;
    j["status"] = r.ok ? "ok" : "failed";
    ordered_json scores = ordered_json::object();
    for (const auto& [id, s] : r.scores) {
        scores[id] = s;
    }
    j["scores"] = std::move(scores);
    if (r.selected_pair) {
        j["selected_pair"] = {r.selected_pair->first, r.selected_pair->second};
    } else {
        j["selected_pair"] = nullptr;
    }
    j["rubric_version_before"] = r.rubric_version_before;
    j["rubric_version_after"] = r.rubric_version_after;
    j["warnings"] = r.warnings;
    if (!r.error.empty()) {
        j["error"] = r.error;
    }
    return j;
}

ordered_json to_json(const EvalPair& r) {
    ordered_json j;
    j["prompt_id"] = r.prompt_id;
    j["policy_response"] = r.policy_response;
    j["reference_response"] = r.reference_response;
    return j;
}

ordered_json to_json(const RegionPair& r) {
    ordered_json j;
    j["prompt_id"] = r.prompt_id;
    j["response_a"] = r.response_a;
    j["response_b"] = r.response_b;
    j["region"] = to_string(r.region);
    return j;
}

ordered_json to_json(const PairRecord& r) {
    ordered_json j;
    j["index"] = r.index;
    j["prompt_id"] = r.prompt_id;
    j["flipped"] = r.flipped;
    j["raw_verdict"] = r.raw_verdict;
    j["policy_wins"] = r.policy_wins;
    j["parse_failed"] = r.parse_failed;
    if (!r.error.empty()) {
        j["error"] = r.error;
    }
    return j;
}

ordered_json to_json(const RegionPairRecord& r) {
    ordered_json j;
    j["index"] = r.index;
    j["prompt_id"] = r.prompt_id;
    j["region"] = to_string(r.region);
    j["flipped"] = r.flipped;
    j["judge"] = r.truth.empty() ? ordered_json(nullptr) : ordered_json(r.truth);
    j["rubric"] = r.rubric;
    ordered_json a = ordered_json::array();
    ordered_json b = ordered_json::array();
    for (const auto& s : r.scores_a) {
        a.push_back(format_score(s));
    }
    for (const auto& s : r.scores_b) {
        b.push_back(format_score(s));
    }
    j["scores_a"] = std::move(a);
    j["scores_b"] = std::move(b);
    j["outcome"] = r.outcome;
    if (!r.error.empty()) {
        j["error"] = r.error;
    }
    return j;
}

ordered_json to_json(const AccuracyReport& r) {
    ordered_json j;
    j["region"] = to_string(r.region);
    j["n_pairs"] = r.n_pairs;
    j["n_correct"] = r.n_correct;
    j["n_ties"] = r.n_ties;
    j["n_wrong"] = r.n_wrong;
    j["accuracy"] = r.accuracy;
    return j;
}

PromptRecord prompt_from_json(const ordered_json& j) {
    PromptRecord r;
    r.id = nonempty_str_field(j, "id");
    r.prompt = nonempty_str_field(j, "prompt");
    if (j.contains("domain")) {
        r.domain = str_field(j, "domain");
    }
    return r;
}

ResponseRecord response_from_json(const ordered_json& j) {
    ResponseRecord r;
    r.prompt_id = nonempty_str_field(j, "prompt_id");
    r.response_id = nonempty_str_field(j, "response_id");
    r.source_model = j.contains("source_model") ? str_field(j, "source_model") : "";
    r.text = nonempty_str_field(j, "text");
    return r;
}

Rubric rubric_from_json(const ordered_json& j) {
    const auto& cs = field(j, "criteria");
    if (!cs.is_array()) {
        throw InputError("field \"criteria\" must be an array");
    }
    std::vector<Criterion> criteria;
    for (const auto& c : cs) {
        criteria.push_back({str_field(c, "id"), str_field(c, "criterion"),
                            static_cast<int>(int_field(c, "weight"))});
    }
    try {
        return Rubric(nonempty_str_field(j, "prompt_id"), static_cast<int>(int_field(j, "version")),
                      std::move(criteria));
    } catch (const InvalidRubricError& e) {
        throw InputError(e.what());
    }
}

GradeRecord grade_from_json(const ordered_json& j) {
    GradeRecord r;
    r.prompt_id = nonempty_str_field(j, "prompt_id");
    r.response_id = nonempty_str_field(j, "response_id");
    r.grades.rubric_version = static_cast<int>(int_field(j, "rubric_version"));
    r.vote = j.contains("vote") ? static_cast<int>(int_field(j, "vote")) : 0;
    const auto& v = field(j, "verdicts");
    if (!v.is_object()) {
        throw InputError("field \"verdicts\" must be an object");
    }
    for (const auto& [id, verdict] : v.items()) {
        const auto s = verdict.is_string() ? verdict.get<std::string>() : std::string{};
        if (s != "yes" && s != "no") {
            throw InputError("verdict for " + id + " must be \"yes\" or \"no\"");
        }
        r.grades.verdicts.emplace(id, s == "yes");
    }
    if (j.contains("score")) {
        r.score = parse_score(str_field(j, "score"));
    }
    return r;
}

std::pair<std::string, RoundRecord> round_from_json(const ordered_json& j) {
    RoundRecord r;
    r.round_index = static_cast<int>(int_field(j, "round"));
    const auto status = str_field(j, "status");
    if (status != "ok" && status != "failed") {
        throw InputError("field \"status\" must be \"ok\" or \"failed\"");
    }
    r.ok = status == "ok";
    for (const auto& [id, s] : field(j, "scores").items()) {
        r.scores.emplace_back(id, s.get<double>());
    }
    const auto& sel = field(j, "selected_pair");
    if (!sel.is_null()) {
        r.selected_pair = {sel.at(0).get<std::string>(), sel.at(1).get<std::string>()};
    }
    r.rubric_version_before = static_cast<int>(int_field(j, "rubric_version_before"));
    r.rubric_version_after = static_cast<int>(int_field(j, "rubric_version_after"));
    r.warnings = j.value("warnings", std::vector<std::string>{});
    r.error = optional_str(j, "error");
    return {nonempty_str_field(j, "prompt_id"), std::move(r)};
}

EvalPair eval_pair_from_json(const ordered_json& j) {
    return {nonempty_str_field(j, "prompt_id"), nonempty_str_field(j, "policy_response"),
            nonempty_str_field(j, "reference_response")};
}

RegionPair region_pair_from_json(const ordered_json& j) {
    return {nonempty_str_field(j, "prompt_id"), nonempty_str_field(j, "response_a"),
            nonempty_str_field(j, "response_b"), region_from_string(str_field(j, "region"))};
}

std::string format_score(const Score& s) {
    return std::to_string(s.numerator) + "/" + std::to_string(s.denominator);
}

Score parse_score(std::string_view s) {
    const auto slash = s.find('/');
    Score out{0, 0};
    const auto bad = [&] { return InputError("score must look like n/d, got \"" + std::string(s) + "\""); };
    if (slash == std::string_view::npos) {
        throw bad();
    }
    auto [p1, e1] = std::from_chars(s.data(), s.data() + slash, out.numerator);
    auto [p2, e2] = std::from_chars(s.data() + slash + 1, s.data() + s.size(), out.denominator);
    if (e1 != std::errc{} || e2 != std::errc{} || p1 != s.data() + slash ||
        p2 != s.data() + s.size() || out.denominator <= 0 || out.numerator < 0 ||
        out.numerator > out.denominator) {
        throw bad();
    }
    return out;
}

std::vector<ordered_json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot read " + path.string());
    }
    std::vector<ordered_json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(ordered_json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw InputError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

void throw_record_error(const std::filesystem::path& path, std::size_t record,
                        const std::string& what) {
    throw InputError(path.string() + ": record " + std::to_string(record) + ": " + what);
}

std::string to_jsonl_line(const ordered_json& j) { return j.dump() + "\n"; }

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out.flush()) {
            throw InputError("cannot write " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

OrderedJsonlWriter::OrderedJsonlWriter(const std::filesystem::path& path, bool append) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    out_.open(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    if (!out_) {
        throw InputError("cannot open " + path.string() + " for writing");
    }
}

void OrderedJsonlWriter::put(std::size_t seq, std::vector<ordered_json> lines) {
    std::lock_guard lock(mutex_);
    pending_.emplace(seq, std::move(lines));
    for (auto it = pending_.find(next_); it != pending_.end(); it = pending_.find(next_)) {
        for (const auto& j : it->second) {
            out_ << to_jsonl_line(j);
        }
        out_.flush();
        pending_.erase(it);
        ++next_;
    }
}

std::string format_g12(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

std::string curve_csv_header() { return "mapping,param_c,beta,kl,win_rate\n"; }

std::string curve_csv_rows(const MisspecMap& map, const std::vector<TradeoffPoint>& points) {
    std::string out;
    const auto c = map.param_c();
    for (const auto& p : points) {
        out += map.name();
        out += ',';
        out += c ? format_g12(*c) : "";
        out += ',' + format_g12(p.beta) + ',' + format_g12(p.kl) + ',' + format_g12(p.win_rate) +
               '\n';
    }
    return out;
}

std::vector<Atom> read_dist_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot read " + path.string());
    }
    std::string line;
    std::size_t n = 0;
    std::vector<Atom> atoms;
    bool header = true;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (header) {
            header = false;
            if (line != "gold_reward,prob") {
                throw InputError(path.string() + ":1: expected header gold_reward,prob");
            }
            continue;
        }
        const auto comma = line.find(',');
        Atom a{};
        try {
            std::size_t used1 = 0;
            std::size_t used2 = 0;
            if (comma == std::string::npos) {
                throw std::invalid_argument("no comma");
            }
            const auto left = line.substr(0, comma);
            const auto right = line.substr(comma + 1);
            a.gold_reward = std::stod(left, &used1);
            a.prob = std::stod(right, &used2);
            if (used1 != left.size() || used2 != right.size()) {
                throw std::invalid_argument("trailing text");
            }
        } catch (const std::exception&) {
            throw InputError(path.string() + ":" + std::to_string(n) +
                             ": expected two numbers, got \"" + line + "\"");
        }
        atoms.push_back(a);
    }
    if (atoms.empty()) {
        throw InputError(path.string() + " has no atoms");
    }
    return atoms;
}

std::map<std::string, PromptRecord, std::less<>>
index_prompts(const std::vector<PromptRecord>& prompts) {
    std::map<std::string, PromptRecord, std::less<>> out;
    std::set<std::string, std::less<>> dup;
    for (const auto& p : prompts) {
        if (!out.emplace(p.id, p).second) {
            dup.insert(p.id);
        }
    }
    if (!dup.empty()) {
        throw InputError("duplicate prompt ids: " + join(dup));
    }
    return out;
}

std::map<std::string, std::vector<ResponseRecord>, std::less<>>
index_responses(const std::vector<ResponseRecord>& responses,
                const std::map<std::string, PromptRecord, std::less<>>& prompts) {
    std::map<std::string, std::vector<ResponseRecord>, std::less<>> out;
    std::set<std::string, std::less<>> dangling;
    std::set<std::string, std::less<>> dup;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : responses) {
        if (!prompts.contains(r.prompt_id)) {
            dangling.insert(r.prompt_id);
            continue;
        }
        if (!seen.emplace(r.prompt_id, r.response_id).second) {
            dup.insert(r.prompt_id + "/" + r.response_id);
            continue;
        }
        out[r.prompt_id].push_back(r);
    }
    if (!dangling.empty()) {
        throw InputError("responses reference unknown prompt ids: " + join(dangling));
    }
    if (!dup.empty()) {
        throw InputError("duplicate response ids: " + join(dup));
    }
    return out;
}

std::map<std::string, Rubric, std::less<>>
index_rubrics(const std::vector<Rubric>& rubrics,
              const std::map<std::string, PromptRecord, std::less<>>* prompts) {
    std::map<std::string, Rubric, std::less<>> out;
    std::set<std::string, std::less<>> dangling;
    for (const auto& r : rubrics) {
        if (prompts && !prompts->contains(r.prompt_id())) {
            dangling.insert(r.prompt_id());
            continue;
        }
        auto it = out.find(r.prompt_id());
        if (it == out.end()) {
            out.emplace(r.prompt_id(), r);
        } else if (r.version() >= it->second.version()) {
            it->second = r;
        }
    }
    if (!dangling.empty()) {
        throw InputError("rubrics reference unknown prompt ids: " + join(dangling));
    }
    return out;
}

} // namespace rubricrl
