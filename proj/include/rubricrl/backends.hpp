#pragma once

#include "rubricrl/llm_gateway.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace rubricrl {

// OpenAI-compatible chat-completions client: POST {base_url}/chat/completions
// with a single user message. The API key is read from the environment
// variable named in the config at construction.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(BackendConfig config);
    std::string complete(const ChatRequest& request) override;

private:
    BackendConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
    std::string api_key_;
};

// Reply computed by a callable; the usual way tests script a backend.
class FunctionBackend : public ChatBackend {
public:
    using Fn = std::function<std::string(const ChatRequest&)>;
    explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const ChatRequest& request) override { return fn_(request); }

private:
    Fn fn_;
};

// Deterministic stand-in for a proposer / verifier / judge model. Replies
// depend only on request content, the seed and the sample index, never on
// arrival order, so concurrent use is reproducible.
//
//  - initial rubric: one criterion per salient prompt keyword
//    ("The response addresses \"kw\".") plus a completeness criterion;
//  - refinement: the current criteria plus one criterion quoting a keyword
//    that separates response 1 from response 2;
//  - scoring: a quoted-keyword criterion is met when the response contains
//    the keyword, others when the response has at least 20 words; each
//    verdict flips with probability `noise` (hashed on sample index);
//  - judging: prefers the response covering more prompt keywords, then more
//    distinct words, then the smaller content hash. Position never matters.
class SimulatedLlm : public ChatBackend {
public:
    explicit SimulatedLlm(std::uint64_t seed = 0, double noise = 0.1)
        : seed_(seed), noise_(noise) {}
    std::string complete(const ChatRequest& request) override;

private:
    std::string initial_rubric(const ChatRequest& r) const;
    std::string refine_rubric(const ChatRequest& r) const;
    std::string score_response(const ChatRequest& r) const;
    std::string judge_pair(const ChatRequest& r) const;

    std::uint64_t seed_;
    double noise_;
};

// FNV-1a with a splitmix64 finish; stable across platforms.
std::uint64_t stable_hash(std::string_view text, std::uint64_t seed = 0);

// Lower-cased alphabetic words of length >= 4, minus common stop words, in
// order of first appearance without repeats.
std::vector<std::string> keywords(std::string_view text);

} // namespace rubricrl
