#include "rubricrl/llm_gateway.hpp"

#include "rubricrl/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

namespace rubricrl {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Span of the body of the first ``` fenced block, or the whole reply.
std::pair<std::size_t, std::size_t> fence_body(std::string_view raw) {
    const auto open = raw.find("```");
    if (open == std::string_view::npos) {
        return {0, raw.size()};
    }
    auto body = raw.find('\n', open);
    if (body == std::string_view::npos) {
        return {0, raw.size()};
    }
    ++body;
    const auto close = raw.find("```", body);
    return {body, close == std::string_view::npos ? raw.size() : close};
}

} // namespace

void BackendConfig::validate() const {
    if (max_retries < 0) {
        throw std::invalid_argument("max_retries must be >= 0");
    }
    if (max_in_flight < 1) {
        throw std::invalid_argument("max_in_flight must be >= 1");
    }
    if (!(temperature >= 0.0)) {
        throw std::invalid_argument("temperature must be >= 0");
    }
    if (request_timeout.count() <= 0) {
        throw std::invalid_argument("request_timeout must be positive");
    }
}

TranscriptLog::TranscriptLog(const std::filesystem::path& path)
    : out_(path, std::ios::app | std::ios::binary) {
    if (!out_) {
        throw InputError("cannot open transcript log " + path.string());
    }
}

void TranscriptLog::append(const ordered_json& record) {
    const std::string line = record.dump();
    std::lock_guard lock(mutex_);
    out_ << line << '\n';
    out_.flush();
}

std::string cache_key(const ChatRequest& request) {
    json subs = json::object();
    for (const auto& [k, v] : request.substitutions) {
        subs[k] = v;
    }
    std::string material;
    material += sha256_hex(template_text(request.template_id));
    material += '\n';
    material += sha256_hex(subs.dump());
    material += '\n';
    material += request.model;
    material += '\n';
    material += format_double(request.temperature);
    material += '\n';
    material += std::to_string(request.attempt);
    material += '\n';
    material += std::to_string(request.sample);
    return sha256_hex(material);
}

Gateway::Gateway(BackendConfig config, std::shared_ptr<ChatBackend> backend, GatewayOptions options)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      options_(std::move(options)),
      slots_((config_.validate(), config_.max_in_flight)),
      jitter_state_(std::random_device{}() | 1u) {
    if (!options_.sleep) {
        options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
    if (options_.cache_mode != CacheMode::Off && !options_.cache_dir) {
        throw std::invalid_argument("cache mode needs a cache directory");
    }
    if (options_.cache_mode == CacheMode::Off && options_.cache_dir) {
        options_.cache_mode = CacheMode::ReadWrite;
    }
    if (options_.cache_mode != CacheMode::ReplayOnly && !backend_) {
        throw std::invalid_argument("gateway needs a backend unless replaying from cache");
    }
}

std::filesystem::path Gateway::cache_path(const ChatRequest& request) const {
    const auto key = cache_key(request);
    return *options_.cache_dir / key.substr(0, 2) / (key + ".json");
}

std::string Gateway::fetch(const ChatRequest& request, bool& cached) {
    cached = false;
    std::filesystem::path path;
    if (options_.cache_mode != CacheMode::Off) {
        path = cache_path(request);
        std::ifstream in(path, std::ios::binary);
        if (in) {
            try {
                const json entry = json::parse(in);
                cached = true;
                return entry.at("reply").get<std::string>();
            } catch (const json::exception&) {
                // corrupt entry: refetch below
            }
        }
        if (options_.cache_mode == CacheMode::ReplayOnly) {
            throw BackendError("cache miss for " + std::string(template_name(request.template_id)) +
                               " (key " + path.filename().string() + ")");
        }
    }

    slots_.acquire();
    const int now = ++in_flight_;
    int peak = peak_in_flight_.load();
    while (now > peak && !peak_in_flight_.compare_exchange_weak(peak, now)) {
    }
    std::string reply;
    try {
        reply = backend_->complete(request);
    } catch (...) {
        --in_flight_;
        slots_.release();
        throw;
    }
    --in_flight_;
    slots_.release();

    if (options_.cache_mode == CacheMode::ReadWrite) {
        ordered_json entry;
        entry["template"] = template_name(request.template_id);
        entry["model"] = request.model;
        entry["temperature"] = request.temperature;
        entry["attempt"] = request.attempt;
        entry["sample"] = request.sample;
        entry["reply"] = reply;
        std::filesystem::create_directories(path.parent_path());
        const auto tmp = path.string() + ".tmp" +
                         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << entry.dump();
        }
        std::filesystem::rename(tmp, path);
    }
    return reply;
}

std::chrono::milliseconds Gateway::backoff(int retry) {
    double u;
    {
        std::lock_guard lock(jitter_mutex_);
        // xorshift64
        jitter_state_ ^= jitter_state_ << 13;
        jitter_state_ ^= jitter_state_ >> 7;
        jitter_state_ ^= jitter_state_ << 17;
        u = static_cast<double>(jitter_state_ >> 11) * 0x1.0p-53;
    }
    const double base = static_cast<double>(options_.backoff_base.count());
    const double cap = static_cast<double>(options_.backoff_cap.count());
    const double full = std::min(cap, base * std::ldexp(1.0, retry - 1));
    return std::chrono::milliseconds(static_cast<long long>(full * (0.5 + 0.5 * u)));
}

ChatExchange Gateway::call(TemplateId id, const Substitutions& subs, int sample,
                           const Accept& accept) {
    ChatRequest request;
    request.template_id = id;
    request.substitutions = subs;
    request.rendered = render_template(id, subs);
    request.model = config_.model_name;
    request.temperature = config_.temperature;
    request.sample = sample;

    std::exception_ptr last_error;
    const int attempts = config_.max_retries + 1;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        request.attempt = attempt;
        ChatExchange exchange;
        exchange.request_text = request.rendered;
        exchange.attempt = attempt;
        const auto start = std::chrono::steady_clock::now();
        bool transport_failed = false;
        std::string error_text;
        try {
            exchange.reply_text = fetch(request, exchange.cached);
            exchange.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start);
            accept(exchange);
        } catch (const BackendError& e) {
            last_error = std::current_exception();
            transport_failed = true;
            error_text = e.what();
        } catch (const Error& e) {
            last_error = std::current_exception();
            error_text = e.what();
        }

        if (options_.transcript) {
            ordered_json rec;
            rec["template"] = template_name(id);
            rec["model"] = request.model;
            rec["temperature"] = request.temperature;
            rec["sample"] = sample;
            rec["attempt"] = attempt;
            rec["cached"] = exchange.cached;
            rec["latency_ms"] = exchange.latency.count();
            rec["request"] = request.rendered;
            rec["reply"] = exchange.reply_text;
            if (!error_text.empty()) {
                rec["error"] = error_text;
            }
            options_.transcript->append(rec);
        }

        if (error_text.empty()) {
            return exchange;
        }
        if (transport_failed && attempt < attempts &&
            options_.cache_mode != CacheMode::ReplayOnly) {
            options_.sleep(backoff(attempt));
        }
    }
    std::rethrow_exception(last_error);
}

json extract_json(std::string_view raw) {
    const auto [body_begin, body_end] = fence_body(raw);
    std::size_t start = std::string_view::npos;
    for (std::size_t i = body_begin; i < body_end; ++i) {
        if (raw[i] == '[' || raw[i] == '{') {
            start = i;
            break;
        }
    }
    if (start == std::string_view::npos) {
        throw ExtractionError("no JSON array or object in reply (searched bytes " +
                                  std::to_string(body_begin) + ".." + std::to_string(body_end) +
                                  ")",
                              std::string(raw), body_begin, body_end);
    }

    std::vector<char> stack;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string_view::npos;
    for (std::size_t i = start; i < body_end; ++i) {
        const char c = raw[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '[' || c == '{') {
            stack.push_back(c == '[' ? ']' : '}');
        } else if (c == ']' || c == '}') {
            if (stack.empty() || stack.back() != c) {
                throw ExtractionError("mismatched '" + std::string(1, c) + "' at byte " +
                                          std::to_string(i),
                                      std::string(raw), start, i);
            }
            stack.pop_back();
            if (stack.empty()) {
                end = i + 1;
                break;
            }
        }
    }
    if (end == std::string_view::npos) {
        throw ExtractionError("unbalanced JSON starting at byte " + std::to_string(start),
                              std::string(raw), start, body_end);
    }
    try {
        return json::parse(raw.substr(start, end - start));
    } catch (const json::parse_error& e) {
        throw ExtractionError(std::string("invalid JSON in bytes ") + std::to_string(start) + ".." +
                                  std::to_string(end) + ": " + e.what(),
                              std::string(raw), start, end);
    }
}

std::string rubric_for_refinement(const Rubric& rubric) {
    ordered_json arr = ordered_json::array();
    for (const auto& c : rubric.criteria()) {
        ordered_json item;
        item["criterion"] = c.text;
        item["weight"] = c.weight;
        arr.push_back(std::move(item));
    }
    return arr.dump(2);
}

std::string rubric_for_scoring(const Rubric& rubric) {
    ordered_json obj = ordered_json::object();
    for (const auto& c : rubric.criteria()) {
        obj[c.id] = c.text;
    }
    return obj.dump(2);
}

std::vector<CriterionDraft> parse_criteria(const json& value, std::vector<std::string>& warnings) {
    if (!value.is_array()) {
        throw ParseError("expected a JSON array of criteria, got " + std::string(value.type_name()));
    }
    if (value.empty()) {
        throw InvalidRubricError("proposer returned an empty criteria array");
    }
    std::vector<CriterionDraft> out;
    out.reserve(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
        const auto& item = value[i];
        const auto where = "criterion " + std::to_string(i + 1);
        if (!item.is_object()) {
            throw ParseError(where + " is not an object");
        }
        const auto text_it = item.find("criterion");
        if (text_it == item.end() || !text_it->is_string() ||
            trim(text_it->get<std::string>()).empty()) {
            throw ParseError(where + " has no criterion text");
        }
        const auto weight_it = item.find("weight");
        if (weight_it == item.end() || !weight_it->is_number()) {
            throw ParseError(where + " has no numeric weight");
        }
        const double raw_weight = weight_it->get<double>();
        double w = std::round(raw_weight);
        if (w != raw_weight) {
            warnings.push_back(where + ": weight " + format_double(raw_weight) + " rounded to " +
                               format_double(w));
        }
        if (w < kMinWeight || w > kMaxWeight) {
            const double clamped = std::clamp<double>(w, kMinWeight, kMaxWeight);
            warnings.push_back(where + ": weight " + format_double(w) + " clamped to " +
                               format_double(clamped));
            w = clamped;
        }
        out.push_back({trim(text_it->get<std::string>()), static_cast<int>(w)});
    }
    return out;
}

GradeVector parse_grades(const json& value, const Rubric& rubric) {
    if (!value.is_object()) {
        throw ParseError("expected a JSON object of verdicts, got " + std::string(value.type_name()));
    }
    GradeVector g;
    g.rubric_version = rubric.version();
    for (const auto& [key, v] : value.items()) {
        if (!v.is_string()) {
            throw ParseError("verdict for " + key + " is not a string");
        }
        const auto verdict = lower(trim(v.get<std::string>()));
        if (verdict != "yes" && verdict != "no") {
            throw ParseError("verdict for " + key + " is '" + v.get<std::string>() +
                             "', expected yes or no");
        }
        g.verdicts[trim(key)] = verdict == "yes";
    }
    check_grade_keys(rubric, g);
    return g;
}

JudgeVerdict parse_boxed_verdict(std::string_view reply) {
    static const std::regex boxed(R"(\\boxed\{([^{}]*)\})");
    std::string last;
    bool found = false;
    const std::string text(reply);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), boxed);
         it != std::sregex_iterator(); ++it) {
        last = (*it)[1].str();
        found = true;
    }
    if (!found) {
        throw JudgeParseError("judge reply has no \\boxed{} answer", text);
    }
    const auto v = trim(last);
    if (v == "1") {
        return JudgeVerdict::First;
    }
    if (v == "2") {
        return JudgeVerdict::Second;
    }
    throw JudgeParseError("judge answered \\boxed{" + last + "}, expected 1 or 2", text);
}

namespace {

std::vector<CriterionDraft> criteria_from_reply(const std::string& reply,
                                                std::vector<std::string>& warnings) {
    const auto value = extract_json(reply);
    try {
        return parse_criteria(value, warnings);
    } catch (const ParseError& e) {
        throw ParseError(e.what(), reply);
    }
}

} // namespace

InitialRubricResult propose_initial_rubric(const std::string& prompt_id, const std::string& prompt,
                                           Gateway& proposer) {
    if (trim(prompt).empty()) {
        throw InvalidRubricError("cannot propose a rubric for an empty prompt");
    }
    std::vector<CriterionDraft> drafts;
    std::vector<std::string> warnings;
    auto exchange = proposer.call(TemplateId::InitialRubric, {{"prompt", prompt}}, 0,
                                  [&](const ChatExchange& ex) {
                                      std::vector<std::string> w;
                                      drafts = criteria_from_reply(ex.reply_text, w);
                                      warnings = std::move(w);
                                  });
    return {Rubric::from_drafts(prompt_id, 0, drafts), std::move(warnings), std::move(exchange)};
}

RefinedCriteria propose_refined_rubric(const std::string& prompt, const Rubric& rubric,
                                       const std::string& response_a,
                                       const std::string& response_b, Gateway& proposer) {
    if (trim(prompt).empty() || trim(response_a).empty() || trim(response_b).empty()) {
        throw InvalidRubricError("refinement needs a prompt and two nonempty responses");
    }
    RefinedCriteria out;
    out.exchange = proposer.call(TemplateId::RefineRubric,
                                 {{"prompt", prompt},
                                  {"rubrics", rubric_for_refinement(rubric)},
                                  {"response1", response_a},
                                  {"response2", response_b}},
                                 0, [&](const ChatExchange& ex) {
                                     std::vector<std::string> w;
                                     out.criteria = criteria_from_reply(ex.reply_text, w);
                                     out.warnings = std::move(w);
                                 });
    return out;
}

GradeVector grade_response(const std::string& prompt, const std::string& response,
                           const Rubric& rubric, Gateway& verifier, int sample) {
    GradeVector out;
    verifier.call(TemplateId::ScoreResponse,
                  {{"prompt", prompt}, {"response", response}, {"rubric", rubric_for_scoring(rubric)}},
                  sample, [&](const ChatExchange& ex) {
                      const auto value = extract_json(ex.reply_text);
                      try {
                          out = parse_grades(value, rubric);
                      } catch (const ParseError& e) {
                          throw ParseError(e.what(), ex.reply_text);
                      }
                  });
    return out;
}

JudgeVerdict judge_pair(const std::string& prompt, const std::string& first,
                        const std::string& second, Gateway& judge, int sample) {
    if (trim(first).empty() || trim(second).empty()) {
        throw ProtocolError("judge needs two nonempty responses");
    }
    JudgeVerdict verdict = JudgeVerdict::First;
    judge.call(TemplateId::JudgePair,
               {{"prompt", prompt}, {"response1", first}, {"response2", second}}, sample,
               [&](const ChatExchange& ex) { verdict = parse_boxed_verdict(ex.reply_text); });
    return verdict;
}

VerifierFn make_verifier(std::shared_ptr<Gateway> verifier) {
    return [verifier = std::move(verifier)](const GradeRequest& req) {
        return grade_response(std::string(req.prompt), std::string(req.response), req.rubric,
                              *verifier, req.vote_index);
    };
}

} // namespace rubricrl
