#pragma once
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace kgcot {

/// Prompt templates used by the pipeline. The first five drive the data
/// generation stages; `judge` backs the optional open-answer judging mode
/// and is never used unless that mode is switched on.
enum class TemplateId { extraction, select, prune, generate, eval, judge };

std::string_view template_name(TemplateId id);
std::optional<TemplateId> template_from_name(std::string_view name);

/// Versioned prompt assets with {{slot}} placeholders. Ships built-in
/// defaults; individual templates can be overridden from files.
///
/// Rendering is byte-deterministic and strict: every declared slot must be
/// provided, undeclared slots are rejected, and slots marked non-empty must
/// carry text. The eval template declares only {question, cot}, so a rendered
/// eval prompt structurally cannot contain the gold answer.
class PromptLibrary {
public:
    static constexpr std::string_view kVersion = "v1";

    PromptLibrary(); // built-in defaults

    /// Replace one template's text (e.g. from a config override file).
    void set_template(TemplateId id, std::string text);
    void load_override(TemplateId id, const std::filesystem::path& file);

    const std::string& text(TemplateId id) const;

    /// Renders the template with the given slots. Throws TemplateError on a
    /// missing slot (naming it), an undeclared slot, an empty slot that must
    /// be non-empty, or an unresolved placeholder in the template text.
    std::string render(TemplateId id, const std::map<std::string, std::string>& slots) const;

private:
    std::map<TemplateId, std::string> templates_;
};

} // namespace kgcot
