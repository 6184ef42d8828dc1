#include "rubricrl/templates.hpp"

#include <stdexcept>

namespace rubricrl {

namespace {

constexpr std::string_view kInitialRubric = R"TMPL(You're a skilled judge evaluating the quality of LLM responses to a user prompt. Your first task is to create a comprehensive rubric for grading these responses across multiple dimensions.

Given a user prompt, generate a list of binary (yes/no) criteria. These criteria should assess how well the LLM answered the prompt. Only write rubrics you are confident about.

Here are tips for writing good rubrics:

i. MECE:
    - Mutually Exclusive, Collectively Exhaustive

ii. Completeness:
    - Consider all the elements you would want to include to create a perfect response and put them into the rubric. This means including not only the facts and statements directly requested by the prompt, but also the supporting details that provide justification, reasoning, and logic for your response. Each of these elements should have a criterion because each criterion helps to develop the answer to the question from a slightly different angle.

iii. No overlapping:
    - the same error from a model shouldn’t be punished multiple times.

iv. Diversity:
    - The rubric items should include variable types of information.
    - If all criteria are like “the response mentions A”, “the response mentions B”, then this is not a good rubric.

v: How many rubric items for each prompt
    - There is no golden standard, and the desired number of rubrics varies by accounts and task types.
    - Write rubrics that cover all aspects of an ideal response.

vi: How many rubric items to fail
    - A good rule of thumb is that the model fails on 50% of rubrics items

vii: Atomicity / Non-stacked
    - Each rubric criterion should evaluate exactly one distinct aspect. Avoid bundling multiple criteria into a single rubric. Most stacked criteria with the word “and” can be broken up into multiple pieces.
    ✗ Response identifies George Washington as the first U.S. president and mentions he served two terms.
    ✓ Response identifies George Washington as the first U.S. president.
    ✓ Response mentions that George Washington served two terms.

viii: Specificity
    - Criteria should be binary (true or false) and objective.
    - Avoid vague descriptions (e.g., "the response must be accurate" is vague).
    - Example: "The response should list exactly three examples."

ix: Self-contained
    - Each criterion should contain all the information needed to evaluate a response, e.g.
    ✗ Mentions the capital city of Canada.
    ✓ Mentions the capital city of Canada is Ottawa.

x: Criterion should be verifiable without requiring external search.
    ✗ Response names any of the Nobel Prize winners in Physics in 2023
    ✓ Response names any of the following Nobel Prize winners in Physics in 2023: Pierre Agostini, Ferenc Krausz, or Anne L’Huillier.

xi. The binary criteria should be phrased so that yes means the model response is good and no means the model response is bad.

Finally, we want to assign different weight for each question. Give a weight on a scale of 1 (least important) to 3 (most important) for each question based on
1. the question's alignment with user demand (3 if user would be frustrated if the answer is no; 1 if user would not be bothered at all if the answer is no)
2. the question's importance in terms of determining quality/correctness (3 if the response would be completely incorrect if the answer is no; 1 if an extreme edge case would be missed and the overall quality won't be affected if the answer is no)

Here is the user prompt for which we want to generate a rubric:

PROMPT:
{prompt}

Return ONLY the JSON array of the rubrics, no other text. For example:

[
  {{"criterion": "Does the response provide a list of songs?", "weight": 3}},
  {{"criterion": "The response explicitly state it is listing French romantic songs.", "weight": 2}}
]

Note: Local IDs will be automatically assigned to each criterion (c1, c2, c3, etc.), so don't include IDs into outputed criterion.
)TMPL";

constexpr std::string_view kRefineRubric = R"TMPL(You're a skilled judge assessing the quality of LLM responses to a user prompt. The current rubric isn't good enough to effectively differentiate between high-quality responses.

Your goal is to improve the current rurbics to address this (adding new creteria, rewriting, decomposing, and deleting the current creteria). The updated rubric must be comprehensive and consistently applicable for grading LLM responses. These criteria should specifically assess how well the LLM answered the given prompt. Only write rubrics you are confident about.

Here are tips for writing good rubrics:

i. MECE:
    - Mutually Exclusive, Collectively Exhaustive

ii. Completeness:
    - Consider all the elements you would want to include to create a perfect response and put them into the rubric. This means including not only the facts and statements directly requested by the prompt, but also the supporting details that provide justification, reasoning, and logic for your response. Each of these elements should have a criterion because each criterion helps to develop the answer to the question from a slightly different angle.

iii. No overlapping:
    - the same error from a model shouldn’t be punished multiple times.

iv. Diversity:
    - The rubric items should include variable types of information.
    - If all criteria are like “the response mentions A”, “the response mentions B”, then this is not a good rubric.

v: How many rubric items for each prompt
    - There is no golden standard, and the desired number of rubrics varies by accounts and task types.
    - Write rubrics that cover all aspects of an ideal response.

vi: How many rubric items to fail
    - A good rule of thumb is that the model fails on 50% of rubrics items

vii: Atomicity / Non-stacked
    - Each rubric criterion should evaluate exactly one distinct aspect. Avoid bundling multiple criteria into a single rubric. Most stacked criteria with the word “and” can be broken up into multiple pieces.
    ✗ Response identifies George Washington as the first U.S. president and mentions he served two terms.
    ✓ Response identifies George Washington as the first U.S. president.
    ✓ Response mentions that George Washington served two terms.

viii: Specificity
    - Criteria should be binary (true or false) and objective.
    - Avoid vague descriptions (e.g., "the response must be accurate" is vague).
    - Example: "The response should list exactly three examples."

ix: Self-contained
    - Each criterion should contain all the information needed to evaluate a response, e.g.
    ✗ Mentions the capital city of Canada.
    ✓ Mentions the capital city of Canada is Ottawa.

x: Criterion should be verifiable without requiring external search.
    ✗ Response names any of the Nobel Prize winners in Physics in 2023
    ✓ Response names any of the following Nobel Prize winners in Physics in 2023: Pierre Agostini, Ferenc Krausz, or Anne L’Huillier.

xi. The binary criteria should be phrased so that yes means the model response is good and no means the model response is bad.

Finally, we want to assign different weight for each criterion. Give a weight on a scale of 1 (least important) to 3 (most important) for each question based on
1. the question's alignment with user demand (3 if user would be frustrated if the answer is no; 1 if user would not be bothered at all if the answer is no)
2. the question's importance in terms of determining quality/correctness (3 if the response would be completely incorrect if the answer is no; 1 if an extreme edge case would be missed and the overall quality won't be affected if the answer is no)

Here is the user prompt for which we want to improve the rubric:

PROMPT:
{prompt}

The existing rubrics we are using is:
{rubrics}

The two reference responses are:

Reponse 1:
{response1}

Reponse 2:
{response2}

Return ONLY the JSON array of the full rubrics, no other text. For example:

[
  {{"criterion": "Does the response provide specific release years for each song?", "weight": 2}},
  {{"criterion": "The response includes artist names for each song mentioned", "weight": 1}}
]

Note: Local IDs will be automatically assigned to each criterion, so don't include IDs in your output.
)TMPL";

constexpr std::string_view kScoreResponse = R"TMPL(You are a skilled judge who will be assessing the quality of LLM responses to a user prompt.

Given a user prompt, LLM response, and a rubric, your task is evalauting the performance of the model response by seeing whether or not it meets the rubric dimension.

Answer the each of the given rubric dimension in either "yes" or "no". Do not output any response other than "yes" or "no".

Keep in mind that you will be grading industry-leading LLMs. Make sure to have high expectation for grading the responses.

Make sure your evaluation is as objective and consistent as it could be. By consistent we mean that a different evaluator's assessment of the task should agree with yours.

Think carefully before you make the decision. After you make the decision, explicitly output which dimension receives "yes" and which dimension receives "no".

Input:

* PROMPT: {prompt}

* RESPONSE: {response}

* RUBRIC: {rubric}

Return ONLY the JSON array, no other text. For example:

{{"c1":"yes", "c2":"no", "c3":"yes"}}
)TMPL";

constexpr std::string_view kJudgePair = R"TMPL(You are a skilled judge who will be assessing the quality of LLM responses to a user prompt.

Avoid any position biases and ensure that the order in which the responses were presented does not influence your decision.
Do not allow the length of the responses to influence your evaluation.

Here is the user prompt:

PROMPT:
{prompt}

The two responses are:

Response 1:
{response1}

Response 2:
{response2}

Which reponse would you prefer? Enclose your final answer (1 or 2) in \boxed{{...}}.
)TMPL";
} // namespace

std::string_view template_text(TemplateId id) {
    switch (id) {
    case TemplateId::InitialRubric: return kInitialRubric;
    case TemplateId::RefineRubric: return kRefineRubric;
    case TemplateId::ScoreResponse: return kScoreResponse;
    case TemplateId::JudgePair: return kJudgePair;
    }
    return {};
}

std::string_view template_name(TemplateId id) {
    switch (id) {
    case TemplateId::InitialRubric: return "initial_rubric";
    case TemplateId::RefineRubric: return "refine_rubric";
    case TemplateId::ScoreResponse: return "score_response";
    case TemplateId::JudgePair: return "judge_pair";
    }
    return {};
}

std::string render_template(std::string_view tmpl, const Substitutions& subs) {
    std::string out;
    out.reserve(tmpl.size() + 256);
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        const char ch = tmpl[i];
        if (ch == '{') {
            if (i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
                out += '{';
                ++i;
                continue;
            }
            const auto close = tmpl.find('}', i + 1);
            if (close == std::string_view::npos) {
                throw std::invalid_argument("unmatched '{' in template at offset " +
                                            std::to_string(i));
            }
            const auto name = tmpl.substr(i + 1, close - i - 1);
            const auto it = subs.find(name);
            if (it == subs.end()) {
                throw std::invalid_argument("no substitution for placeholder {" +
                                            std::string(name) + "}");
            }
            out += it->second;
            i = close;
        } else if (ch == '}') {
            if (i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
                out += '}';
                ++i;
                continue;
            }
            throw std::invalid_argument("unmatched '}' in template at offset " +
                                        std::to_string(i));
        } else {
            out += ch;
        }
    }
    return out;
}

} // namespace rubricrl
