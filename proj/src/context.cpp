#include "locans/context.hpp"

#include <sstream>

#include "locans/common.hpp"

namespace locans {

const std::vector<PromptTemplate>& registered_templates() {
    static const std::vector<PromptTemplate> kTemplates = {
        {"loc-1", ContextKind::localization,
         "Does the frame have the information needed to answer the question correctly?"},
        {"loc-2", ContextKind::localization,
         "Does the provided frame contain the necessary information to accurately answer the given question?"},
        {"loc-3", ContextKind::localization,
         "Does the information within the frame provide the necessary details to accurately answer the given "
         "question?"},
        {"qa-1", ContextKind::qa, "Answer with the option letter."},
    };
    return kTemplates;
}

const PromptTemplate& find_template(const std::string& id) {
    for (const auto& t : registered_templates())
        if (t.id == id) return t;
    std::ostringstream msg;
    msg << "unknown prompt template '" << id << "' (registered:";
    for (const auto& t : registered_templates()) msg << " " << t.id;
    msg << ")";
    throw ConfigError(msg.str());
}

std::string option_label(int index) {
    if (index < 0 || index >= 26) throw ArgumentError("option index out of range for letter labels");
    return std::string(1, static_cast<char>('A' + index));
}

namespace {

LanguageContext build(ContextKind kind, const std::string& question, const std::vector<std::string>& options,
                      const std::string& template_id) {
    const PromptTemplate& tmpl = find_template(template_id);
    if (tmpl.kind != kind) throw ConfigError("prompt template '" + template_id + "' has the wrong kind");

    std::ostringstream out;
    out << "Question: " << question;
    for (size_t i = 0; i < options.size(); ++i)
        out << " Option " << option_label(static_cast<int>(i)) << ": " << options[i];
    out << " " << tmpl.sentence;

    LanguageContext ctx;
    ctx.kind = kind;
    ctx.question = question;
    ctx.options = options;
    ctx.prompt_template_id = template_id;
    ctx.rendered = out.str();
    return ctx;
}

}  // namespace

LanguageContext build_loc_context(const std::string& question, const std::vector<std::string>& options,
                                  const std::string& template_id) {
    return build(ContextKind::localization, question, options, template_id);
}

LanguageContext build_qa_context(const std::string& question, const std::vector<std::string>& options,
                                 const std::string& template_id) {
    return build(ContextKind::qa, question, options, template_id);
}

}  // namespace locans
