#include "kgcot/prompts.hpp"

#include "kgcot/errors.hpp"
#include "kgcot/text.hpp"

#include <fstream>
#include <sstream>
#include <vector>

namespace kgcot {

namespace {

struct SlotSpec {
    const char* name;
    bool must_be_non_empty;
};

// Declared slots per template. Rendering rejects anything outside this list,
// which keeps the eval prompt free of the gold answer by construction.
const std::vector<SlotSpec>& slots_for(TemplateId id) {
    static const std::vector<SlotSpec> extraction = {{"question", true}, {"answer", false}};
    static const std::vector<SlotSpec> select = {
        {"entity", true}, {"candidates", true}, {"question", true}, {"answer", false}};
    static const std::vector<SlotSpec> prune = {{"paths", true}, {"question", true}, {"k", true}};
    static const std::vector<SlotSpec> generate = {{"question", true}, {"answer", true}, {"paths", true}};
    static const std::vector<SlotSpec> eval = {{"question", true}, {"cot", true}};
    static const std::vector<SlotSpec> judge = {{"question", true}, {"reference", true}, {"candidate", true}};
    switch (id) {
        case TemplateId::extraction: return extraction;
        case TemplateId::select: return select;
        case TemplateId::prune: return prune;
        case TemplateId::generate: return generate;
        case TemplateId::eval: return eval;
        case TemplateId::judge: return judge;
    }
    throw Error("unknown template id");
}

constexpr const char* kExtractionTemplate =
    R"(You are a careful medical entity extractor.

Identify the medical entities (diseases, symptoms, findings, drugs, anatomy,
procedures, organisms, and similar concepts) that appear in the question and
in the answer below.

Question: {{question}}
Answer: {{answer}}

Respond with a single line in exactly this format and nothing else:
<entities from the question, separated by '; '> ∥ <entities from the answer, separated by '; '>
Keep each entity short and verbatim where possible. If one side contains no
medical entity, leave that side empty but keep the '∥' separator.)";

constexpr const char* kSelectTemplate =
    R"(You are mapping a medical entity mention onto a knowledge-graph node.

Entity mention: {{entity}}

Candidate nodes:
{{candidates}}

Question: {{question}}
Answer: {{answer}}

Analyze the question-answer context and the entity name, then choose the
single candidate node that is most relevant to the mention.
Respond with that candidate node name exactly as written above, and nothing else.)";

constexpr const char* kPruneTemplate =
    R"(You are selecting knowledge-graph reasoning paths for a medical question.

Question: {{question}}

Numbered candidate paths:
{{paths}}

Select at most {{k}} paths that are most correlated with the question and
discard the irrelevant ones.
Respond with the selected path numbers separated by commas (for example: 1, 3),
and nothing else.)";

constexpr const char* kGenerateTemplate =
    R"(You are writing a step-by-step clinical reasoning explanation.

Question: {{question}}
Answer: {{answer}}

Knowledge-graph reasoning paths connecting entities in the question to
entities in the answer:
{{paths}}

Analyze the reasoning paths, elaborate on the ones relevant to the question,
and write a numbered chain of thought that starts from the findings in the
question and leads to the answer. Ground every step in the path evidence and
in established medical knowledge. End with a sentence stating the final answer.)";

constexpr const char* kEvalTemplate =
    R"(Answer the question below using only the information contained in the
reasoning provided. Do not use any other knowledge.

Question: {{question}}

Reasoning: {{cot}}

If the question is multiple choice, respond with the label of the chosen
option; otherwise respond with the answer text. Respond with the answer only.)";

constexpr const char* kJudgeTemplate =
    R"(You are checking whether a candidate answer matches a reference answer.

Question: {{question}}
Reference answer: {{reference}}
Candidate answer: {{candidate}}

Respond with exactly "yes" if the candidate answer means the same as the
reference answer, otherwise respond with exactly "no".)";

} // namespace

std::string_view template_name(TemplateId id) {
    switch (id) {
        case TemplateId::extraction: return "extraction";
        case TemplateId::select: return "select";
        case TemplateId::prune: return "prune";
        case TemplateId::generate: return "generate";
        case TemplateId::eval: return "eval";
        case TemplateId::judge: return "judge";
    }
    return "unknown";
}

std::optional<TemplateId> template_from_name(std::string_view name) {
    if (name == "extraction") return TemplateId::extraction;
    if (name == "select") return TemplateId::select;
    if (name == "prune") return TemplateId::prune;
    if (name == "generate") return TemplateId::generate;
    if (name == "eval") return TemplateId::eval;
    if (name == "judge") return TemplateId::judge;
    return std::nullopt;
}

PromptLibrary::PromptLibrary() {
    templates_[TemplateId::extraction] = kExtractionTemplate;
    templates_[TemplateId::select] = kSelectTemplate;
    templates_[TemplateId::prune] = kPruneTemplate;
    templates_[TemplateId::generate] = kGenerateTemplate;
    templates_[TemplateId::eval] = kEvalTemplate;
    templates_[TemplateId::judge] = kJudgeTemplate;
}

void PromptLibrary::set_template(TemplateId id, std::string text) {
    templates_[id] = std::move(text);
}

void PromptLibrary::load_override(TemplateId id, const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open template override file: " + file.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    set_template(id, buf.str());
}

const std::string& PromptLibrary::text(TemplateId id) const {
    return templates_.at(id);
}

std::string PromptLibrary::render(TemplateId id, const std::map<std::string, std::string>& slots) const {
    const auto& spec = slots_for(id);
    const std::string tname(template_name(id));

    for (const SlotSpec& s : spec) {
        auto it = slots.find(s.name);
        if (it == slots.end()) {
            throw TemplateError("template '" + tname + "': missing slot '" + s.name + "'");
        }
        if (s.must_be_non_empty && trim(it->second).empty()) {
            throw TemplateError("template '" + tname + "': slot '" + s.name + "' must not be empty");
        }
    }
    for (const auto& [key, value] : slots) {
        bool declared = false;
        for (const SlotSpec& s : spec) {
            if (key == s.name) {
                declared = true;
                break;
            }
        }
        if (!declared) {
            throw TemplateError("template '" + tname + "' does not accept slot '" + key + "'");
        }
    }

    std::string out = templates_.at(id);
    for (const auto& [key, value] : slots) {
        const std::string placeholder = "{{" + key + "}}";
        std::size_t pos = 0;
        while ((pos = out.find(placeholder, pos)) != std::string::npos) {
            out.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    }
    if (auto pos = out.find("{{"); pos != std::string::npos) {
        auto end = out.find("}}", pos);
        const std::string leftover =
            end == std::string::npos ? out.substr(pos, 24) : out.substr(pos, end + 2 - pos);
        throw TemplateError("template '" + tname + "': unresolved placeholder " + leftover);
    }
    return out;
}

} // namespace kgcot
