#include "kgcot/answer_match.hpp"

#include "kgcot/text.hpp"

#include <algorithm>
#include <cctype>

namespace kgcot {

namespace {

bool is_punct_or_space(unsigned char c) {
    return std::isspace(c) || std::ispunct(c);
}

std::string strip_surrounding_punctuation(std::string_view s) {
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && is_punct_or_space(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && is_punct_or_space(static_cast<unsigned char>(s[end - 1]))) --end;
    return std::string(s.substr(begin, end - begin));
}

bool equals_fold(std::string_view a, std::string_view b) {
    return fold_name(a) == fold_name(b);
}

const QaOption* option_for_label(std::string_view token, const std::vector<QaOption>& options) {
    for (const QaOption& opt : options) {
        if (equals_fold(token, opt.label)) return &opt;
    }
    return nullptr;
}

// Rule 2: every "answer is X" occurrence whose X is a label; they must agree.
std::optional<std::string> answer_is_rule(const std::string& predicted,
                                          const std::vector<QaOption>& options) {
    const std::string haystack = lower_ascii(predicted);
    static const std::string needle = "answer is";
    std::optional<std::string> agreed;
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        std::size_t i = pos + needle.size();
        while (i < haystack.size() && is_punct_or_space(static_cast<unsigned char>(haystack[i]))) {
            ++i;
        }
        std::size_t tok_end = i;
        while (tok_end < haystack.size() &&
               !is_punct_or_space(static_cast<unsigned char>(haystack[tok_end]))) {
            ++tok_end;
        }
        const std::string token = haystack.substr(i, tok_end - i);
        if (const QaOption* opt = option_for_label(token, options)) {
            if (agreed && *agreed != opt->label) {
                return std::nullopt; // conflicting extractions are ambiguous
            }
            agreed = opt->label;
        }
        pos += needle.size();
    }
    return agreed;
}

// Rule 3: exactly one option text occurs in the reply.
std::optional<std::string> option_text_rule(const std::string& predicted,
                                            const std::vector<QaOption>& options) {
    const std::string folded = fold_name(predicted);
    const QaOption* found = nullptr;
    for (const QaOption& opt : options) {
        const std::string opt_text = fold_name(opt.text);
        if (opt_text.empty()) continue;
        if (folded.find(opt_text) == std::string::npos) continue;
        if (found) return std::nullopt; // two matches: ambiguous, reject
        found = &opt;
    }
    if (!found) return std::nullopt;
    return found->label;
}

} // namespace

std::string normalize_answer_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c) || std::ispunct(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::optional<std::string> extract_choice_label(const std::string& predicted,
                                                const std::vector<QaOption>& options) {
    // Rule 1: standalone label, e.g. "B", "(b).", "C)".
    const std::string stripped = strip_surrounding_punctuation(predicted);
    if (const QaOption* opt = option_for_label(stripped, options)) {
        return opt->label;
    }
    if (auto label = answer_is_rule(predicted, options)) {
        return label;
    }
    return option_text_rule(predicted, options);
}

bool match_answer(const std::string& predicted, const GoldAnswer& gold,
                  const std::vector<QaOption>& options) {
    if (!options.empty()) {
        auto label = extract_choice_label(predicted, options);
        return label && equals_fold(*label, gold.label);
    }
    if (gold.text.empty()) {
        return false;
    }
    return normalize_answer_text(predicted) == normalize_answer_text(gold.text);
}

} // namespace kgcot
