#pragma once

#include <map>
#include <string>
#include <string_view>

namespace rubricrl {

enum class TemplateId { InitialRubric, RefineRubric, ScoreResponse, JudgePair };

// Prompt templates in str.format syntax: `{name}` is a placeholder and
// `{{` / `}}` are literal braces.
std::string_view template_text(TemplateId id);

// Short stable name used in cache keys and transcripts.
std::string_view template_name(TemplateId id);

using Substitutions = std::map<std::string, std::string, std::less<>>;

// Replaces every `{name}` with its substitution and unescapes doubled
// braces. Substituted values are inserted verbatim. Throws
// std::invalid_argument for an unknown placeholder, a placeholder with no
// substitution, or an unmatched single brace.
std::string render_template(std::string_view tmpl, const Substitutions& subs);

inline std::string render_template(TemplateId id, const Substitutions& subs) {
    return render_template(template_text(id), subs);
}

} // namespace rubricrl
