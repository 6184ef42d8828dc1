#pragma once

#include "rubricrl/rubric.hpp"
#include "rubricrl/templates.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

namespace rubricrl {

struct BackendConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model_name = "gpt-4.1";
    std::string api_key_env = "LLM_API_KEY";
    double temperature = 0.0;
    int max_retries = 3;
    std::chrono::milliseconds request_timeout{120'000};
    int max_in_flight = 8;

    // Throws std::invalid_argument on negative retries / temperature or a
    // non-positive in-flight limit.
    void validate() const;
};

// Everything a backend may look at. Live backends only send `rendered`;
// deterministic mocks key their reply on the structured fields.
struct ChatRequest {
    TemplateId template_id = TemplateId::InitialRubric;
    Substitutions substitutions;
    std::string rendered;
    std::string model;
    double temperature = 0.0;
    int attempt = 1; // 1-based
    int sample = 0;  // independent draw index (vote number)
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    // Returns the raw completion text; throws BackendError on transport
    // failure.
    virtual std::string complete(const ChatRequest& request) = 0;
};

struct ChatExchange {
    std::string request_text;
    std::string reply_text;
    int attempt = 1;
    std::chrono::milliseconds latency{0};
    bool cached = false;
};

enum class CacheMode { Off, ReadWrite, ReplayOnly };

struct GatewayOptions {
    std::optional<std::filesystem::path> cache_dir;
    CacheMode cache_mode = CacheMode::Off;
    // JSONL audit log of every attempt; shared across gateways writing to
    // the same file.
    std::shared_ptr<class TranscriptLog> transcript;
    // Retry backoff sleeper; tests pass a no-op.
    std::function<void(std::chrono::milliseconds)> sleep;
    std::chrono::milliseconds backoff_base{1000};
    std::chrono::milliseconds backoff_cap{30'000};
};

// Thread-safe JSONL writer.
class TranscriptLog {
public:
    explicit TranscriptLog(const std::filesystem::path& path);
    void append(const nlohmann::ordered_json& record);

private:
    std::mutex mutex_;
    std::ofstream out_;
};

// One model role (proposer, verifier or judge) bound to a backend. Owns the
// retry loop, the in-flight limiter and the response cache. Shareable
// across threads.
class Gateway {
public:
    Gateway(BackendConfig config, std::shared_ptr<ChatBackend> backend, GatewayOptions options = {});

    const BackendConfig& config() const { return config_; }

    // Validates a reply. Throws (typically ParseError) to request a retry.
    using Accept = std::function<void(const ChatExchange&)>;

    // Renders the template and performs up to max_retries + 1 attempts,
    // each with the identical prompt. Transport errors back off before
    // retrying; rejected replies retry immediately. The last error is
    // rethrown when the budget is exhausted.
    ChatExchange call(TemplateId id, const Substitutions& subs, int sample, const Accept& accept);

    // Largest number of concurrent backend requests seen so far.
    int peak_in_flight() const { return peak_in_flight_.load(); }

private:
    std::string fetch(const ChatRequest& request, bool& cached);
    std::filesystem::path cache_path(const ChatRequest& request) const;
    std::chrono::milliseconds backoff(int retry);

    BackendConfig config_;
    std::shared_ptr<ChatBackend> backend_;
    GatewayOptions options_;
    std::counting_semaphore<1 << 20> slots_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_in_flight_{0};
    std::mutex jitter_mutex_;
    std::uint64_t jitter_state_;
};

// Cache key over (template text, substitutions, model, temperature,
// attempt, sample), hex SHA-256.
std::string cache_key(const ChatRequest& request);

// Strips markdown fences, then parses the first balanced [...] or {...}
// span (string-literal aware). Throws ExtractionError with byte offsets.
nlohmann::json extract_json(std::string_view raw);

// Rubric as shown to the proposer: [{"criterion": ..., "weight": ...}, ...].
std::string rubric_for_refinement(const Rubric& rubric);

// Rubric as shown to the verifier: {"c1": "...", "c2": "...", ...}.
std::string rubric_for_scoring(const Rubric& rubric);

// Parses a criteria array. Weights outside [1,3] are clamped and
// non-integral weights rounded, each with a warning appended. Throws
// ParseError on a malformed entry and InvalidRubricError on an empty array.
std::vector<CriterionDraft> parse_criteria(const nlohmann::json& value,
                                           std::vector<std::string>& warnings);

// Parses {"c1": "yes", ...} against the rubric ids, case-insensitively.
GradeVector parse_grades(const nlohmann::json& value, const Rubric& rubric);

enum class JudgeVerdict { First, Second };

// Last \boxed{...} in the reply; must hold 1 or 2. Throws JudgeParseError.
JudgeVerdict parse_boxed_verdict(std::string_view reply);

struct InitialRubricResult {
    Rubric rubric;
    std::vector<std::string> warnings;
    ChatExchange exchange;
};

// Version-0 rubric from the initial-rubric template.
InitialRubricResult propose_initial_rubric(const std::string& prompt_id, const std::string& prompt,
                                           Gateway& proposer);

struct RefinedCriteria {
    std::vector<CriterionDraft> criteria;
    std::vector<std::string> warnings;
    ChatExchange exchange;
};

// Full replacement criteria list from the refinement template. Ids are
// assigned by the caller.
RefinedCriteria propose_refined_rubric(const std::string& prompt, const Rubric& rubric,
                                       const std::string& response_a,
                                       const std::string& response_b, Gateway& proposer);

GradeVector grade_response(const std::string& prompt, const std::string& response,
                           const Rubric& rubric, Gateway& verifier, int sample = 0);

JudgeVerdict judge_pair(const std::string& prompt, const std::string& first,
                        const std::string& second, Gateway& judge, int sample = 0);

// Adapts a verifier gateway to the VerifierFn interface; the vote index
// becomes the request's sample index.
VerifierFn make_verifier(std::shared_ptr<Gateway> verifier);

} // namespace rubricrl
