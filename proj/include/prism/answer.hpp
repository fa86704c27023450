#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace prism {

// Canonical form of an extracted final answer. Normalization is idempotent:
// trim, collapse internal whitespace, then either (a) a lone letter with
// optional trailing punctuation becomes the uppercase letter (multiple-choice
// convention), (b) a plain decimal number is reduced to canonical form
// (leading/trailing zeros stripped, '+' dropped, "-0" -> "0"), or (c) the
// text is case-folded to lowercase. No symbolic equivalence is attempted.
struct Answer {
    std::string canonical;

    bool operator==(const Answer&) const = default;
};

std::string normalize_answer_text(std::string_view raw);

inline Answer make_answer(std::string_view raw) { return Answer{normalize_answer_text(raw)}; }

// Scans for the last line beginning (after leading whitespace) with the
// marker "FINAL ANSWER:" (case-insensitive) and returns its normalized
// content. A marker line with empty content counts as no answer.
std::optional<Answer> extract_answer(std::string_view raw_text);

inline bool answers_equal(const Answer& a, const Answer& b) { return a.canonical == b.canonical; }

}  // namespace prism
