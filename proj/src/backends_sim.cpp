#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "prism/answer.hpp"
#include "prism/backends.hpp"
#include "prism/errors.hpp"
#include "prism/rng.hpp"
#include "prism/verify.hpp"

namespace prism {

using nlohmann::json;

const char* to_string(Role role) {
    switch (role) {
        case Role::generator: return "generator";
        case Role::verifier: return "verifier";
        case Role::iterator: return "iterator";
        case Role::comparator: return "comparator";
    }
    return "?";
}

ChatCall make_call(Role role, std::string prompt, const RunConfig& cfg, CallMeta meta) {
    ChatCall call;
    call.role = role;
    call.prompt = std::move(prompt);
    call.meta = std::move(meta);
    switch (role) {
        case Role::generator: call.decoding = cfg.generator_decoding; break;
        case Role::iterator: call.decoding = cfg.iterator_decoding; break;
        case Role::verifier:
        case Role::comparator:
            call.decoding = Decoding{0.0, 1.0, cfg.generator_decoding.max_tokens};
            break;
    }
    return call;
}

Backend& BackendSet::for_role(Role role) const {
    Backend* b = nullptr;
    switch (role) {
        case Role::generator: b = generator; break;
        case Role::verifier: b = verifier; break;
        case Role::iterator: b = iterator; break;
        case Role::comparator: b = comparator; break;
    }
    if (!b) throw Error(std::string("no backend configured for role ") + to_string(role));
    return *b;
}

RoleTokenCost ScriptedWorld::cost_for(Role role) const {
    auto it = token_cost.find(to_string(role));
    if (it != token_cost.end()) return it->second;
    switch (role) {
        case Role::generator: return {150, 420};
        case Role::verifier: return {260, 80};
        case Role::iterator: return {320, 400};
        case Role::comparator: return {200, 12};
    }
    return {0, 0};
}

std::string ScriptedWorld::true_answer(const std::string& problem_id) const {
    auto it = answers.find(problem_id);
    if (it != answers.end()) return it->second;
    return std::to_string(100 + fnv1a(problem_id) % 900);
}

ScriptedWorld ScriptedWorld::from_json(const json& j) {
    static const std::vector<std::string> known = {
        "seed", "p_init_correct", "p_fix", "p_break", "rho", "final_verdict_noise",
        "attractor_share", "wrong_pool", "steps_min", "steps_max", "token_cost", "answers"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw ConfigError("unknown world key: " + it.key());
        }
    }
    ScriptedWorld w;
    w.seed = j.value("seed", w.seed);
    w.p_init_correct = j.value("p_init_correct", w.p_init_correct);
    w.p_fix = j.value("p_fix", w.p_fix);
    w.p_break = j.value("p_break", w.p_break);
    w.rho = j.value("rho", w.rho);
    if (j.contains("final_verdict_noise") && !j.at("final_verdict_noise").is_null()) {
        w.final_verdict_noise = j.at("final_verdict_noise").get<double>();
    }
    w.attractor_share = j.value("attractor_share", w.attractor_share);
    w.wrong_pool = j.value("wrong_pool", w.wrong_pool);
    w.steps_min = j.value("steps_min", w.steps_min);
    w.steps_max = j.value("steps_max", w.steps_max);
    if (j.contains("token_cost")) {
        for (auto it = j.at("token_cost").begin(); it != j.at("token_cost").end(); ++it) {
            w.token_cost[it.key()] = RoleTokenCost{it.value().at(0).get<std::int64_t>(),
                                                   it.value().at(1).get<std::int64_t>()};
        }
    }
    if (j.contains("answers")) {
        for (auto it = j.at("answers").begin(); it != j.at("answers").end(); ++it) {
            w.answers[it.key()] = it.value().get<std::string>();
        }
    }
    for (double p : {w.p_init_correct, w.p_fix, w.p_break, w.rho, w.effective_final_noise(),
                     w.attractor_share}) {
        if (p < 0.0 || p > 1.0) throw ConfigError("world probabilities must lie in [0, 1]");
    }
    if (w.steps_min < 1 || w.steps_max < w.steps_min) throw ConfigError("bad steps_min/steps_max");
    if (w.wrong_pool < 1) throw ConfigError("wrong_pool must be >= 1");
    return w;
}

ScriptedWorld ScriptedWorld::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open world file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("invalid world JSON in " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

json ScriptedWorld::to_json() const {
    json j{{"seed", seed},
           {"p_init_correct", p_init_correct},
           {"p_fix", p_fix},
           {"p_break", p_break},
           {"rho", rho},
           {"attractor_share", attractor_share},
           {"wrong_pool", wrong_pool},
           {"steps_min", steps_min},
           {"steps_max", steps_max}};
    if (final_verdict_noise) j["final_verdict_noise"] = *final_verdict_noise;
    if (!token_cost.empty()) {
        json costs;
        for (const auto& [k, v] : token_cost) costs[k] = json::array({v.input, v.output});
        j["token_cost"] = costs;
    }
    if (!answers.empty()) j["answers"] = answers;
    return j;
}

bool simulate_iterate(const ScriptedWorld& world, bool correct, IterateMode mode,
                      std::mt19937_64& rng) {
    double u = uniform01(rng);
    if (mode == IterateMode::explore) return u < world.p_init_correct;
    if (correct) return !(u < world.p_break);
    return u < world.p_fix;
}

namespace {

std::string trim_copy(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// First line of the prompt starting with `marker`, content after it.
std::optional<std::string> scan_marker(std::string_view prompt, std::string_view marker) {
    std::size_t pos = 0;
    while (pos <= prompt.size()) {
        std::size_t eol = prompt.find('\n', pos);
        std::string_view line =
            prompt.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        std::string t = trim_copy(line);
        if (t.size() >= marker.size() && std::string_view(t).substr(0, marker.size()) == marker) {
            return trim_copy(std::string_view(t).substr(marker.size()));
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    return std::nullopt;
}

std::vector<std::string> scan_all_markers(std::string_view prompt, std::string_view prefix) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= prompt.size()) {
        std::size_t eol = prompt.find('\n', pos);
        std::string_view line =
            prompt.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        std::string t = trim_copy(line);
        if (t.size() > prefix.size() && std::string_view(t).substr(0, prefix.size()) == prefix) {
            std::size_t colon = t.find(':', prefix.size());
            if (colon != std::string::npos) out.push_back(trim_copy(std::string_view(t).substr(colon + 1)));
        }
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    return out;
}

int count_occurrences(std::string_view text, std::string_view needle) {
    int n = 0;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

constexpr std::string_view kStepPhrases[] = {
    "Set up the governing relation and restate the given quantities.",
    "Introduce a substitution that isolates the unknown of interest.",
    "Apply the constraint to eliminate one degree of freedom.",
    "Simplify the resulting expression and collect terms.",
    "Check the boundary cases against the derived expression.",
    "Evaluate the closed form and reduce it to a single value.",
    "Cross-check the value by plugging it back into the original relation.",
};

constexpr std::string_view kNotePhrases[] = {
    "algebra checks out",
    "restates the problem",
    "substitution is valid",
    "sign handling is questionable",
    "bound applied correctly",
    "this step does not follow",
    "arithmetic verified",
};

std::string wrong_answer(const ScriptedWorld& world, const std::string& truth,
                         std::mt19937_64& rng) {
    int j;
    if (uniform01(rng) < world.attractor_share || world.wrong_pool == 1) {
        j = 1;
    } else {
        j = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(world.wrong_pool - 1));
    }
    // Numeric answers get nearby wrong values; anything else gets tagged variants.
    try {
        std::size_t consumed = 0;
        long v = std::stol(truth, &consumed);
        if (consumed == truth.size()) return std::to_string(v + j);
    } catch (...) {
    }
    return truth + "_alt" + std::to_string(j);
}

std::string synthesize_trace_text(const ScriptedWorld& world, const std::string& answer,
                                  std::mt19937_64& rng) {
    int span = world.steps_max - world.steps_min + 1;
    int k = world.steps_min + static_cast<int>(rng() % static_cast<std::uint64_t>(span));
    bool tagged = uniform01(rng) < 0.5;
    std::ostringstream out;
    for (int i = 0; i < k; ++i) {
        std::string_view phrase = kStepPhrases[rng() % std::size(kStepPhrases)];
        if (tagged) {
            out << "<step i=\"" << (i + 1) << "\">" << phrase << "</step>\n";
        } else {
            out << phrase << "\n\n";
        }
    }
    out << "FINAL ANSWER: " << answer << "\n";
    return out.str();
}

StepLabel flip_label(StepLabel label, std::mt19937_64& rng) {
    // Replace with a uniform draw over the other two values.
    StepLabel others[2];
    int n = 0;
    for (StepLabel cand : {StepLabel::correct, StepLabel::neutral, StepLabel::incorrect}) {
        if (cand != label) others[n++] = cand;
    }
    return others[rng() % 2];
}

}  // namespace

ChatReply SimulatorBackend::call(const ChatCall& call) {
    std::uint64_t h = mix(world_.seed, fnv1a(to_string(call.role)));
    h = mix(h, fnv1a(call.meta.purpose));
    h = mix(h, stream_seed(0, call.meta.problem_id, call.meta.iteration,
                           call.meta.particle_index, "sim"));
    h = mix(h, fnv1a(call.prompt));
    std::mt19937_64 rng(h);

    const std::string truth = world_.true_answer(call.meta.problem_id);
    const std::string& purpose = call.meta.purpose;

    ChatReply reply;
    RoleTokenCost cost = world_.cost_for(call.role);
    reply.usage = Usage{cost.input, cost.output, false};

    if (call.role == Role::verifier) {
        int n_steps = count_occurrences(call.prompt, "<step");
        auto proposed = scan_marker(call.prompt, "Proposed final answer:");
        bool correct = proposed && *proposed != "NONE" &&
                       answers_equal(make_answer(*proposed), make_answer(truth));
        Feedback fb;
        for (int i = 0; i < std::max(1, n_steps); ++i) {
            StepLabel label = correct ? StepLabel::correct : StepLabel::incorrect;
            if (uniform01(rng) < world_.rho) label = flip_label(label, rng);
            fb.step_labels.push_back(label);
            fb.notes.emplace_back(kNotePhrases[rng() % std::size(kNotePhrases)]);
        }
        bool verdict_correct = correct;
        if (uniform01(rng) < world_.effective_final_noise()) verdict_correct = !verdict_correct;
        fb.final_verdict = verdict_correct ? Verdict::correct : Verdict::incorrect;
        reply.text = serialize_feedback(fb);
        return reply;
    }

    if (call.role == Role::comparator) {
        auto a = scan_marker(call.prompt, "Answer A:");
        auto b = scan_marker(call.prompt, "Answer B:");
        bool a_correct = a && answers_equal(make_answer(*a), make_answer(truth));
        bool b_correct = b && answers_equal(make_answer(*b), make_answer(truth));
        if (a_correct && !b_correct) {
            reply.text = "<verdict>A</verdict>";
        } else if (b_correct && !a_correct) {
            reply.text = "<verdict>B</verdict>";
        } else {
            reply.text = "<verdict>NEITHER</verdict>";
        }
        return reply;
    }

    // Generator / iterator family: synthesize a trace whose correctness
    // evolves under the scripted dynamics.
    if (purpose == "critique") {
        reply.text = "The middle derivation deserves a second look; re-check the final computation "
                     "and make sure every substitution is justified.";
        return reply;
    }

    std::string answer;
    if (purpose == "conform" || purpose == "adopt_majority") {
        auto target = scan_marker(call.prompt, "Target answer:");
        answer = target.value_or(truth);
    } else if (purpose == "synthesize" || purpose == "aggregate") {
        // Mode of the candidate answers presented in the prompt (first-seen wins ties).
        std::vector<std::string> cands = scan_all_markers(call.prompt, "Candidate ");
        std::string best;
        int best_count = 0;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            int c = 0;
            for (const std::string& other : cands) {
                if (answers_equal(make_answer(other), make_answer(cands[i]))) ++c;
            }
            if (c > best_count) {
                best_count = c;
                best = cands[i];
            }
        }
        answer = best_count > 0 ? best : truth;
        if (purpose == "aggregate") {
            reply.text = "Weighing the candidates against each other, the most consistent "
                         "derivation leads to the following result.\nFINAL ANSWER: " + answer + "\n";
            return reply;
        }
    } else if (purpose == "local_refine") {
        auto current = scan_marker(call.prompt, "Current answer:");
        bool was_correct = current && *current != "NONE" &&
                           answers_equal(make_answer(*current), make_answer(truth));
        bool now_correct = simulate_iterate(world_, was_correct, IterateMode::local_refine, rng);
        if (now_correct) {
            answer = truth;
        } else if (current && !was_correct && *current != "NONE") {
            answer = *current;  // a failed local fix keeps the same wrong answer
        } else {
            answer = wrong_answer(world_, truth, rng);
        }
    } else {
        // generate / explore / rewrite / debate: a fresh attempt.
        bool correct = uniform01(rng) < world_.p_init_correct;
        answer = correct ? truth : wrong_answer(world_, truth, rng);
    }

    reply.text = synthesize_trace_text(world_, answer, rng);
    return reply;
}

}  // namespace prism
