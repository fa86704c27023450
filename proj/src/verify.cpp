#include "prism/verify.hpp"

#include <cctype>
#include <sstream>

#include "prism/errors.hpp"

namespace prism {

const char* to_string(MoveKind kind) {
    switch (kind) {
        case MoveKind::init: return "init";
        case MoveKind::clone: return "clone";
        case MoveKind::local_refine: return "local_refine";
        case MoveKind::explore: return "explore";
        case MoveKind::no_op: return "no_op";
    }
    return "?";
}

const char* to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::correct: return "CORRECT";
        case Verdict::incorrect: return "INCORRECT";
        case Verdict::neutral: return "NEUTRAL";
        case Verdict::missing: return "MISSING";
        case Verdict::verification_failed: return "VERIFICATION_FAILED";
    }
    return "?";
}

MoveKind move_kind_from_string(const std::string& s) {
    if (s == "init") return MoveKind::init;
    if (s == "clone") return MoveKind::clone;
    if (s == "local_refine") return MoveKind::local_refine;
    if (s == "explore") return MoveKind::explore;
    if (s == "no_op") return MoveKind::no_op;
    throw ConfigError("unknown move kind: " + s);
}

Verdict verdict_from_string(const std::string& s) {
    if (s == "CORRECT") return Verdict::correct;
    if (s == "INCORRECT") return Verdict::incorrect;
    if (s == "NEUTRAL") return Verdict::neutral;
    if (s == "MISSING") return Verdict::missing;
    if (s == "VERIFICATION_FAILED") return Verdict::verification_failed;
    throw ConfigError("unknown verdict: " + s);
}

namespace {

bool is_blank(std::string_view line) {
    for (char c : line) {
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, eol - pos));
        pos = eol + 1;
    }
    return lines;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

// Attempts to parse the <step ...>content</step> sequence. Returns false on
// missing, nested, or unbalanced tags so the caller can fall back.
bool parse_step_tags(std::string_view text, std::vector<std::string>& steps) {
    static constexpr std::string_view kOpen = "<step";
    static constexpr std::string_view kClose = "</step>";
    std::size_t pos = 0;
    bool any = false;
    while (true) {
        std::size_t open = text.find(kOpen, pos);
        if (open == std::string_view::npos) break;
        std::size_t gt = text.find('>', open + kOpen.size());
        if (gt == std::string_view::npos) return false;  // unbalanced open tag
        // Attribute region must not contain another tag delimiter.
        std::string_view attrs = text.substr(open + kOpen.size(), gt - open - kOpen.size());
        if (attrs.find('<') != std::string_view::npos) return false;
        std::size_t close = text.find(kClose, gt + 1);
        if (close == std::string_view::npos) return false;  // no closing tag
        std::string_view content = text.substr(gt + 1, close - gt - 1);
        if (content.find(kOpen) != std::string_view::npos) return false;  // nested
        std::string body = trim(content);
        if (!body.empty()) steps.push_back(std::move(body));
        any = true;
        pos = close + kClose.size();
    }
    if (!any) return false;
    // A stray closer after the last parsed block means unbalanced structure.
    if (text.find(kClose, pos) != std::string_view::npos) return false;
    return !steps.empty();
}

void split_blank_lines(std::string_view text, std::vector<std::string>& steps) {
    std::vector<std::string> current;
    auto flush = [&]() {
        if (current.empty()) return;
        std::string joined;
        for (std::size_t i = 0; i < current.size(); ++i) {
            if (i) joined.push_back('\n');
            joined += current[i];
        }
        joined = trim(joined);
        if (!joined.empty()) steps.push_back(std::move(joined));
        current.clear();
    };
    for (std::string_view line : split_lines(text)) {
        if (is_blank(line)) {
            flush();
        } else {
            current.emplace_back(line);
        }
    }
    flush();
}

std::string serialize_steps(const std::vector<std::string>& steps) {
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i) out.push_back('\n');
        out += "<step i=\"" + std::to_string(i + 1) + "\">" + steps[i] + "</step>";
    }
    return out;
}

// Trailing token of a line: the last whitespace-delimited word, which must
// be exactly "+1", "0", or "-1". Notes are everything before it.
bool split_score_token(std::string_view line, StepLabel& label, std::string& note) {
    std::size_t end = line.size();
    while (end > 0 && std::isspace(static_cast<unsigned char>(line[end - 1]))) --end;
    if (end == 0) return false;
    std::size_t begin = end;
    while (begin > 0 && !std::isspace(static_cast<unsigned char>(line[begin - 1]))) --begin;
    std::string_view token = line.substr(begin, end - begin);
    if (token == "+1") {
        label = StepLabel::correct;
    } else if (token == "0") {
        label = StepLabel::neutral;
    } else if (token == "-1") {
        label = StepLabel::incorrect;
    } else {
        return false;
    }
    note = trim(line.substr(0, begin));
    return true;
}

}  // namespace

Trace stepwise_normalize(std::string_view raw_text) {
    std::vector<std::string> steps;
    if (!parse_step_tags(raw_text, steps)) {
        steps.clear();
        split_blank_lines(raw_text, steps);
    }
    if (steps.empty()) throw EmptyTraceError("generation normalized to zero steps");
    Trace trace;
    trace.steps = std::move(steps);
    trace.raw_text = serialize_steps(trace.steps);
    trace.answer = extract_answer(raw_text);
    return trace;
}

std::string build_verifier_input(const Problem& problem, const Trace& trace, const Template& tpl) {
    return tpl.render({{"problem", problem.statement},
                       {"tagged_steps", trace.raw_text},
                       {"final_answer", trace.answer ? trace.answer->canonical : "NONE"}});
}

Feedback parse_verifier_output(std::string_view text, int n_steps) {
    static constexpr std::string_view kFinalMarker = "final answer check";
    Feedback failed;
    failed.final_verdict = Verdict::verification_failed;
    if (n_steps < 1) return failed;

    std::vector<std::string_view> lines;
    for (std::string_view line : split_lines(text)) {
        if (!is_blank(line)) lines.push_back(line);
    }

    // Locate the final check line, if any; it must be last and in position.
    std::size_t check_idx = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string t = trim(lines[i]);
        if (starts_with_ci(t, kFinalMarker)) {
            check_idx = i;
            break;
        }
    }

    Feedback fb;
    auto parse_steps = [&](std::size_t count) {
        if (count != static_cast<std::size_t>(n_steps)) return false;
        for (std::size_t i = 0; i < count; ++i) {
            StepLabel label;
            std::string note;
            if (!split_score_token(lines[i], label, note)) return false;
            fb.step_labels.push_back(label);
            fb.notes.push_back(std::move(note));
        }
        return true;
    };

    if (check_idx == lines.size()) {
        // No final line: all lines must be well-formed step lines.
        if (!parse_steps(lines.size())) return failed;
        fb.final_verdict = Verdict::missing;
        return fb;
    }

    if (check_idx != static_cast<std::size_t>(n_steps) || check_idx + 1 != lines.size()) return failed;
    if (!parse_steps(check_idx)) return failed;
    StepLabel final_label;
    std::string ignored;
    if (!split_score_token(lines[check_idx], final_label, ignored)) return failed;
    switch (final_label) {
        case StepLabel::correct: fb.final_verdict = Verdict::correct; break;
        case StepLabel::incorrect: fb.final_verdict = Verdict::incorrect; break;
        case StepLabel::neutral: fb.final_verdict = Verdict::neutral; break;
    }
    return fb;
}

std::string serialize_feedback(const Feedback& feedback) {
    std::ostringstream out;
    for (std::size_t i = 0; i < feedback.step_labels.size(); ++i) {
        std::string note = i < feedback.notes.size() ? feedback.notes[i] : std::string();
        if (!note.empty()) out << note << ' ';
        switch (feedback.step_labels[i]) {
            case StepLabel::correct: out << "+1"; break;
            case StepLabel::neutral: out << "0"; break;
            case StepLabel::incorrect: out << "-1"; break;
        }
        out << '\n';
    }
    switch (feedback.final_verdict) {
        case Verdict::correct: out << "FINAL ANSWER CHECK: +1\n"; break;
        case Verdict::incorrect: out << "FINAL ANSWER CHECK: -1\n"; break;
        case Verdict::neutral: out << "FINAL ANSWER CHECK: 0\n"; break;
        case Verdict::missing: break;  // absent by definition
        case Verdict::verification_failed:
            throw Error("verification_failed feedback has no serial form");
    }
    return out.str();
}

double step_ratio(const Feedback& feedback) {
    ScoreBreakdown b = score_breakdown(feedback);
    return b.step_ratio;
}

double scalar_score(const Feedback& feedback) {
    return score_breakdown(feedback).score;
}

ScoreBreakdown score_breakdown(const Feedback& feedback) {
    ScoreBreakdown b;
    b.verdict = feedback.final_verdict;
    if (feedback.final_verdict == Verdict::verification_failed) {
        b.score = 0.0;
        return b;
    }
    for (StepLabel label : feedback.step_labels) {
        switch (label) {
            case StepLabel::correct: ++b.n_correct; break;
            case StepLabel::neutral: ++b.n_neutral; break;
            case StepLabel::incorrect: ++b.n_incorrect; break;
        }
    }
    int total = b.n_correct + b.n_neutral + b.n_incorrect;
    if (total == 0) throw DegenerateTraceError("step ratio over zero steps");
    b.step_ratio = (b.n_correct + 0.5 * b.n_neutral) / total;
    switch (feedback.final_verdict) {
        case Verdict::incorrect: b.score = 0.3 * b.step_ratio; break;
        case Verdict::correct: b.score = 0.5 + 0.5 * b.step_ratio; break;
        case Verdict::neutral: b.score = 0.6 * b.step_ratio; break;
        case Verdict::missing: b.score = 0.8 * b.step_ratio; break;
        case Verdict::verification_failed: b.score = 0.0; break;
    }
    return b;
}

std::string render_feedback(const Feedback& feedback) {
    std::ostringstream out;
    if (feedback.final_verdict == Verdict::verification_failed) {
        out << "Verification failed; no step feedback is available.\n";
        return out.str();
    }
    for (std::size_t i = 0; i < feedback.step_labels.size(); ++i) {
        out << "Step " << (i + 1) << " [";
        switch (feedback.step_labels[i]) {
            case StepLabel::correct: out << "+1"; break;
            case StepLabel::neutral: out << "0"; break;
            case StepLabel::incorrect: out << "-1"; break;
        }
        out << "]";
        if (i < feedback.notes.size() && !feedback.notes[i].empty()) {
            out << ": " << feedback.notes[i];
        }
        out << '\n';
    }
    out << "Final answer verdict: " << to_string(feedback.final_verdict) << '\n';
    return out.str();
}

}  // namespace prism
