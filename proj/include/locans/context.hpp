#pragma once

#include <string>
#include <vector>

namespace locans {

enum class ContextKind { localization, qa };

// A rendered language context: question, options, and the instantiated
// prompt template the scoring heads consume.
struct LanguageContext {
    ContextKind kind = ContextKind::localization;
    std::string question;
    std::vector<std::string> options;
    std::string prompt_template_id;
    std::string rendered;
};

struct PromptTemplate {
    std::string id;
    ContextKind kind;
    std::string sentence;
};

const std::vector<PromptTemplate>& registered_templates();
const PromptTemplate& find_template(const std::string& id);

inline constexpr const char* kDefaultLocTemplate = "loc-3";
inline constexpr const char* kDefaultQaTemplate = "qa-1";

LanguageContext build_loc_context(const std::string& question, const std::vector<std::string>& options,
                                  const std::string& template_id = kDefaultLocTemplate);
LanguageContext build_qa_context(const std::string& question, const std::vector<std::string>& options,
                                 const std::string& template_id = kDefaultQaTemplate);

std::string option_label(int index);  // "A", "B", ...

}  // namespace locans
