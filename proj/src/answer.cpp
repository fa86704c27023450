#include "prism/answer.hpp"

#include <cctype>
#include <algorithm>

namespace prism {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim_collapse(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

// A lone letter optionally followed by punctuation, e.g. "b", "C.", "d)".
bool is_choice_letter(const std::string& s, char& letter) {
    if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (!is_punct(s[i])) return false;
    }
    letter = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return true;
}

// Plain decimal: optional sign, digits with at most one '.', at least one digit.
bool is_plain_decimal(const std::string& s) {
    std::size_t i = 0;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    bool digit = false;
    bool dot = false;
    for (; i < s.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(s[i]))) {
            digit = true;
        } else if (s[i] == '.' && !dot) {
            dot = true;
        } else {
            return false;
        }
    }
    return digit;
}

std::string canonical_decimal(const std::string& s) {
    std::size_t i = 0;
    bool negative = false;
    if (s[i] == '+' || s[i] == '-') {
        negative = s[i] == '-';
        ++i;
    }
    std::string int_part, frac_part;
    bool in_frac = false;
    for (; i < s.size(); ++i) {
        if (s[i] == '.') {
            in_frac = true;
        } else {
            (in_frac ? frac_part : int_part).push_back(s[i]);
        }
    }
    // Strip leading zeros of the integer part and trailing zeros of the fraction.
    std::size_t first = int_part.find_first_not_of('0');
    int_part = first == std::string::npos ? "" : int_part.substr(first);
    std::size_t last = frac_part.find_last_not_of('0');
    frac_part = last == std::string::npos ? "" : frac_part.substr(0, last + 1);
    if (int_part.empty()) int_part = "0";

    std::string out = int_part;
    if (!frac_part.empty()) {
        out.push_back('.');
        out += frac_part;
    }
    if (negative && out != "0") out.insert(out.begin(), '-');
    return out;
}

}  // namespace

std::string normalize_answer_text(std::string_view raw) {
    std::string s = trim_collapse(raw);
    char letter = 0;
    if (is_choice_letter(s, letter)) return std::string(1, letter);
    if (is_plain_decimal(s)) return canonical_decimal(s);
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::optional<Answer> extract_answer(std::string_view raw_text) {
    static constexpr std::string_view kMarker = "final answer:";
    std::optional<Answer> result;
    std::size_t pos = 0;
    while (pos <= raw_text.size()) {
        std::size_t eol = raw_text.find('\n', pos);
        std::string_view line = raw_text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? raw_text.size() + 1 : eol + 1;

        std::size_t start = 0;
        while (start < line.size() && is_space(line[start])) ++start;
        line.remove_prefix(start);
        if (line.size() < kMarker.size()) continue;
        bool match = true;
        for (std::size_t i = 0; i < kMarker.size(); ++i) {
            if (std::tolower(static_cast<unsigned char>(line[i])) != kMarker[i]) {
                match = false;
                break;
            }
        }
        if (!match) continue;
        std::string canonical = normalize_answer_text(line.substr(kMarker.size()));
        if (canonical.empty()) {
            result.reset();  // a bare marker overrides earlier ones but carries no answer
        } else {
            result = Answer{std::move(canonical)};
        }
    }
    return result;
}

}  // namespace prism
