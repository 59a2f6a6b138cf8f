#pragma once
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kgcot {

struct QaOption {
    std::string label;
    std::string text;
};

/// Gold answer: a choice label, free text, or both.
struct GoldAnswer {
    std::string label;
    std::string text;
};

/// Version of the label-extraction rule table below. Bump when rules change.
constexpr int kAnswerRuleVersion = 1;

/// Case fold + strip punctuation + collapse whitespace, for open-answer
/// equality checks.
std::string normalize_answer_text(std::string_view text);

/// Multiple-choice label extraction, ordered rules:
///   1. the whole reply, stripped of surrounding punctuation, is a label;
///   2. "answer is X" with X a label (all occurrences must agree);
///   3. exactly one option's text occurs in the reply (two or more matches
///      are ambiguous and extract nothing).
/// Labels compare case-insensitively. Returns the canonical option label.
std::optional<std::string> extract_choice_label(const std::string& predicted,
                                                const std::vector<QaOption>& options);

/// Multiple-choice mode when options are present (label extraction, then
/// label comparison); open-answer mode otherwise (normalized exact equality).
/// Unmatchable input is false, never an error.
bool match_answer(const std::string& predicted, const GoldAnswer& gold,
                  const std::vector<QaOption>& options);

} // namespace kgcot
