#include "rubricrl/backends.hpp"

#include "rubricrl/error.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace rubricrl {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::set<std::string, std::less<>> kStopWords = {
    "about", "above", "after",  "again", "also",  "been",  "before", "being", "both",
    "could", "does",  "doing",  "each",  "from",  "have",  "having", "here",  "into",
    "just",  "like",  "more",   "most",  "much",  "only",  "other",  "over",  "same",
    "should", "some", "such",   "than",  "that",  "their", "them",   "then",  "there",
    "these", "they",  "this",   "those", "very",  "what",  "when",   "where", "which",
    "while", "with",  "would",  "your",  "will",  "were",  "make",   "give",  "tell",
    "please", "explain", "describe", "response",
};

const std::string& sub(const ChatRequest& r, const char* key) {
    const auto it = r.substitutions.find(key);
    if (it == r.substitutions.end()) {
        throw BackendError(std::string("simulated model: request lacks {") + key + "}");
    }
    return it->second;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Keyword quoted in a criterion, if any.
std::string quoted_keyword(std::string_view criterion) {
    const auto open = criterion.find('"');
    if (open == std::string_view::npos) {
        return {};
    }
    const auto close = criterion.find('"', open + 1);
    if (close == std::string_view::npos) {
        return {};
    }
    return std::string(criterion.substr(open + 1, close - open - 1));
}

std::size_t word_count(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        const bool w = !std::isspace(c);
        if (w && !in_word) {
            ++n;
        }
        in_word = w;
    }
    return n;
}

std::string fenced(const ordered_json& value) { return "```json\n" + value.dump(2) + "\n```\n"; }

} // namespace

std::uint64_t stable_hash(std::string_view text, std::uint64_t seed) {
    std::uint64_t h = 1469598103934665603ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    // FNV-1a alone barely moves the high bits on a change near the end of
    // the input; finish with the splitmix64 mixer.
    h ^= h >> 30;
    h *= 0xBF58476D1CE4E5B9ULL;
    h ^= h >> 27;
    h *= 0x94D049BB133111EBULL;
    h ^= h >> 31;
    return h;
}

std::vector<std::string> keywords(std::string_view text) {
    std::vector<std::string> out;
    std::set<std::string, std::less<>> seen;
    std::string word;
    auto flush = [&] {
        if (word.size() >= 4 && !kStopWords.contains(word) && seen.insert(word).second) {
            out.push_back(word);
        }
        word.clear();
    };
    for (unsigned char c : text) {
        if (std::isalpha(c)) {
            word += static_cast<char>(std::tolower(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

std::string SimulatedLlm::complete(const ChatRequest& request) {
    switch (request.template_id) {
    case TemplateId::InitialRubric: return initial_rubric(request);
    case TemplateId::RefineRubric: return refine_rubric(request);
    case TemplateId::ScoreResponse: return score_response(request);
    case TemplateId::JudgePair: return judge_pair(request);
    }
    throw BackendError("simulated model: unknown template");
}

std::string SimulatedLlm::initial_rubric(const ChatRequest& r) const {
    const auto kws = keywords(sub(r, "prompt"));
    ordered_json arr = ordered_json::array();
    for (std::size_t i = 0; i < kws.size() && i < 4; ++i) {
        arr.push_back({{"criterion", "The response addresses \"" + kws[i] + "\"."},
                       {"weight", 1 + static_cast<int>(stable_hash(kws[i], seed_) % 3)}});
    }
    arr.push_back({{"criterion", "The response gives a complete, well-supported answer."},
                   {"weight", 3}});
    return fenced(arr);
}

std::string SimulatedLlm::refine_rubric(const ChatRequest& r) const {
    const auto current = json::parse(sub(r, "rubrics"));
    std::set<std::string, std::less<>> used;
    ordered_json arr = ordered_json::array();
    for (const auto& item : current) {
        const auto text = item.at("criterion").get<std::string>();
        used.insert(quoted_keyword(text));
        arr.push_back({{"criterion", text}, {"weight", item.at("weight")}});
    }

    const auto a = keywords(sub(r, "response1"));
    const auto b = keywords(sub(r, "response2"));
    const std::set<std::string, std::less<>> a_set(a.begin(), a.end());
    const std::set<std::string, std::less<>> b_set(b.begin(), b.end());
    std::string pick;
    for (const auto& kw : a) {
        if (!b_set.contains(kw) && !used.contains(kw)) {
            pick = kw;
            break;
        }
    }
    for (std::size_t i = 0; pick.empty() && i < b.size(); ++i) {
        if (!a_set.contains(b[i]) && !used.contains(b[i])) {
            pick = b[i];
        }
    }
    for (std::size_t i = 0; pick.empty() && i < a.size(); ++i) {
        if (!used.contains(a[i])) {
            pick = a[i];
        }
    }
    if (!pick.empty()) {
        arr.push_back({{"criterion", "The response mentions \"" + pick + "\"."}, {"weight", 2}});
    }
    return fenced(arr);
}

std::string SimulatedLlm::score_response(const ChatRequest& r) const {
    const auto rubric = json::parse(sub(r, "rubric"));
    const auto& response = sub(r, "response");
    const auto text = lower(response);
    const bool long_enough = word_count(response) >= 20;
    ordered_json verdicts = ordered_json::object();
    for (const auto& [id, criterion] : rubric.items()) {
        const auto kw = quoted_keyword(criterion.get<std::string>());
        bool yes = kw.empty() ? long_enough : text.find(kw) != std::string::npos;
        const auto h = stable_hash(id + '\x1f' + criterion.get<std::string>() + '\x1f' + response +
                                       '\x1f' + std::to_string(r.sample),
                                   seed_);
        if (static_cast<double>(h >> 11) * 0x1.0p-53 < noise_) {
            yes = !yes;
        }
        verdicts[id] = yes ? "yes" : "no";
    }
    return "Assessment complete.\n" + verdicts.dump() + "\n";
}

std::string SimulatedLlm::judge_pair(const ChatRequest& r) const {
    const auto prompt_kws = keywords(sub(r, "prompt"));
    auto quality = [&](const std::string& response) {
        const auto text = lower(response);
        std::size_t covered = 0;
        for (const auto& kw : prompt_kws) {
            covered += text.find(kw) != std::string::npos;
        }
        return std::make_pair(covered, keywords(response).size());
    };
    const auto& one = sub(r, "response1");
    const auto& two = sub(r, "response2");
    const auto q1 = quality(one);
    const auto q2 = quality(two);
    bool first;
    if (q1 != q2) {
        first = q1 > q2;
    } else {
        const auto h1 = stable_hash(one, seed_);
        const auto h2 = stable_hash(two, seed_);
        first = h1 != h2 ? h1 < h2 : one <= two;
    }
    std::ostringstream os;
    os << "Response 1 covers " << q1.first << " prompt terms, response 2 covers " << q2.first
       << ".\n\\boxed{" << (first ? 1 : 2) << "}\n";
    return os.str();
}

} // namespace rubricrl
