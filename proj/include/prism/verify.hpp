#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "prism/templates.hpp"
#include "prism/types.hpp"

namespace prism {

// Parsed verifier output: one label per non-final step plus a final verdict.
// On verification_failed the labels are empty; otherwise their count equals
// the number of input steps.
struct Feedback {
    std::vector<StepLabel> step_labels;
    Verdict final_verdict = Verdict::verification_failed;
    std::vector<std::string> notes;  // unparsed free text, kept for iterator prompts
};

struct ScoreBreakdown {
    int n_correct = 0;
    int n_neutral = 0;
    int n_incorrect = 0;
    double step_ratio = 0.0;
    Verdict verdict = Verdict::verification_failed;
    double score = 0.0;
};

// Coerces a raw generation into an explicit stepwise representation: parses
// well-formed <step> blocks when present (attribute variations tolerated,
// nesting rejected), otherwise splits on runs of blank lines. The result is
// re-serialized with 1-indexed <step i="k"> tags and the final answer is
// extracted from the original text. Throws EmptyTraceError when nothing
// usable remains.
Trace stepwise_normalize(std::string_view raw_text);

// Renders the verifier template with {problem}, {tagged_steps} and
// {final_answer} (the literal NONE when the trace has no answer).
std::string build_verifier_input(const Problem& problem, const Trace& trace, const Template& tpl);

// Total parser for verifier output. Succeeds iff exactly n_steps lines with
// a trailing token in {+1, 0, -1} appear in order, optionally followed by a
// FINAL ANSWER CHECK line with such a token. A missing final line with
// well-formed step lines yields verdict missing; any other violation yields
// verification_failed with empty labels. Never throws.
Feedback parse_verifier_output(std::string_view text, int n_steps);

// Emits the line-oriented form parse_verifier_output reads back. Verdict
// missing omits the final line; verification_failed is not serializable.
std::string serialize_feedback(const Feedback& feedback);

// (n_correct + 0.5 * n_neutral) / total over the step labels. Requires at
// least one label; throws DegenerateTraceError otherwise.
double step_ratio(const Feedback& feedback);

// Verdict-conditioned affine transform of the step ratio:
//   incorrect: 0.3 * r      correct: 0.5 + 0.5 * r   neutral: 0.6 * r
//   missing:   0.8 * r      verification_failed: exactly 0
double scalar_score(const Feedback& feedback);

ScoreBreakdown score_breakdown(const Feedback& feedback);

// Scores are clamped to a small positive floor before any ratio or weight use.
inline double clamp_score(double score, double floor) { return score < floor ? floor : score; }

// Human-readable feedback block for iterator prompts: one line per step with
// its note and label, then the final verdict.
std::string render_feedback(const Feedback& feedback);

}  // namespace prism
