#include "prism/records.hpp"

#include "prism/errors.hpp"

namespace prism {

using nlohmann::json;

json to_json(const Usage& u) {
    return json{{"in", u.input_tokens}, {"out", u.output_tokens}, {"estimated", u.estimated}};
}

Usage usage_from_json(const json& j) {
    return Usage{j.at("in").get<std::int64_t>(), j.at("out").get<std::int64_t>(),
                 j.value("estimated", false)};
}

json to_json(const Trace& t) {
    json j{{"steps", t.steps},
           {"raw_text", t.raw_text},
           {"parent_index", t.provenance.parent_index},
           {"iteration", t.provenance.iteration},
           {"move_kind", to_string(t.provenance.move_kind)}};
    if (t.answer) j["answer"] = t.answer->canonical;
    return j;
}

Trace trace_from_json(const json& j) {
    Trace t;
    t.steps = j.at("steps").get<std::vector<std::string>>();
    t.raw_text = j.at("raw_text").get<std::string>();
    if (j.contains("answer")) t.answer = Answer{j.at("answer").get<std::string>()};
    t.provenance.parent_index = j.at("parent_index").get<int>();
    t.provenance.iteration = j.at("iteration").get<int>();
    t.provenance.move_kind = move_kind_from_string(j.at("move_kind").get<std::string>());
    return t;
}

json to_json(const Feedback& f) {
    json labels = json::array();
    for (StepLabel l : f.step_labels) labels.push_back(static_cast<int>(l));
    return json{{"labels", labels}, {"verdict", to_string(f.final_verdict)}, {"notes", f.notes}};
}

Feedback feedback_from_json(const json& j) {
    Feedback f;
    for (const auto& l : j.at("labels")) f.step_labels.push_back(static_cast<StepLabel>(l.get<int>()));
    f.final_verdict = verdict_from_string(j.at("verdict").get<std::string>());
    f.notes = j.at("notes").get<std::vector<std::string>>();
    return f;
}

json to_json(const Particle& p) {
    return json{{"trace", to_json(p.trace)},
                {"feedback", to_json(p.feedback)},
                {"score", p.score},
                {"weight", p.weight}};
}

Particle particle_from_json(const json& j) {
    Particle p;
    p.trace = trace_from_json(j.at("trace"));
    p.feedback = feedback_from_json(j.at("feedback"));
    p.score = j.at("score").get<double>();
    p.weight = j.at("weight").get<double>();
    return p;
}

json to_json(const CallRecord& c) {
    json j{{"role", to_string(c.role)},
           {"purpose", c.purpose},
           {"iteration", c.iteration},
           {"particle_index", c.particle_index},
           {"usage", to_json(c.usage)},
           {"degraded", c.degraded}};
    if (!c.retry_usage.empty()) {
        json retries = json::array();
        for (const Usage& u : c.retry_usage) retries.push_back(to_json(u));
        j["retry_usage"] = retries;
    }
    return j;
}

namespace {

Role role_from_string(const std::string& s) {
    if (s == "generator") return Role::generator;
    if (s == "verifier") return Role::verifier;
    if (s == "iterator") return Role::iterator;
    if (s == "comparator") return Role::comparator;
    throw ConfigError("unknown role: " + s);
}

}  // namespace

CallRecord call_record_from_json(const json& j) {
    CallRecord c;
    c.role = role_from_string(j.at("role").get<std::string>());
    c.purpose = j.at("purpose").get<std::string>();
    c.iteration = j.at("iteration").get<int>();
    c.particle_index = j.at("particle_index").get<int>();
    c.usage = usage_from_json(j.at("usage"));
    if (j.contains("retry_usage")) {
        for (const auto& u : j.at("retry_usage")) c.retry_usage.push_back(usage_from_json(u));
    }
    c.degraded = j.value("degraded", false);
    return c;
}

json to_json(const IterationRecord& r) {
    json slots = json::array();
    for (const SlotRecord& s : r.slots) {
        json slot{{"score", s.score},
                  {"weight", s.weight},
                  {"verdict", to_string(s.verdict)},
                  {"move_kind", to_string(s.move_kind)}};
        if (s.answer) slot["answer"] = *s.answer;
        if (s.correct) slot["correct"] = *s.correct;
        if (s.proposal) {
            slot["proposal"] = json{{"kind", to_string(s.proposal->kind)},
                                    {"score_old", s.proposal->score_old},
                                    {"score_new", s.proposal->score_new},
                                    {"accepted", s.proposal->accepted},
                                    {"downhill", s.proposal->downhill}};
        }
        slots.push_back(std::move(slot));
    }
    json calls = json::array();
    for (const CallRecord& c : r.calls) calls.push_back(to_json(c));
    json j{{"iteration", r.iteration}, {"slots", slots}, {"calls", calls}};
    if (r.engine) {
        json events = json::array();
        for (const ArbitrationEvent& e : r.engine->arbitration_events) {
            events.push_back(json{{"answer_a", e.answer_a},
                                  {"answer_b", e.answer_b},
                                  {"verdict", e.verdict},
                                  {"transport_failed", e.transport_failed}});
        }
        j["engine"] = json{{"ess", r.engine->ess},
                           {"resampled", r.engine->resampled},
                           {"offspring_counts", r.engine->offspring_counts},
                           {"offspring_counts_capped", r.engine->offspring_counts_capped},
                           {"arbitration_events", events}};
    }
    return j;
}

IterationRecord iteration_record_from_json(const json& j) {
    IterationRecord r;
    r.iteration = j.at("iteration").get<int>();
    for (const auto& slot : j.at("slots")) {
        SlotRecord s;
        s.score = slot.at("score").get<double>();
        s.weight = slot.at("weight").get<double>();
        s.verdict = verdict_from_string(slot.at("verdict").get<std::string>());
        s.move_kind = move_kind_from_string(slot.at("move_kind").get<std::string>());
        if (slot.contains("answer")) s.answer = slot.at("answer").get<std::string>();
        if (slot.contains("correct")) s.correct = slot.at("correct").get<bool>();
        if (slot.contains("proposal")) {
            const auto& p = slot.at("proposal");
            ProposalRecord pr;
            pr.kind = move_kind_from_string(p.at("kind").get<std::string>());
            pr.score_old = p.at("score_old").get<double>();
            pr.score_new = p.at("score_new").get<double>();
            pr.accepted = p.at("accepted").get<bool>();
            pr.downhill = p.at("downhill").get<bool>();
            s.proposal = pr;
        }
        r.slots.push_back(std::move(s));
    }
    for (const auto& c : j.at("calls")) r.calls.push_back(call_record_from_json(c));
    if (j.contains("engine")) {
        const auto& e = j.at("engine");
        EngineDiagnostics d;
        d.ess = e.at("ess").get<double>();
        d.resampled = e.at("resampled").get<bool>();
        d.offspring_counts = e.at("offspring_counts").get<std::vector<int>>();
        d.offspring_counts_capped = e.at("offspring_counts_capped").get<std::vector<int>>();
        for (const auto& ev : e.at("arbitration_events")) {
            d.arbitration_events.push_back(ArbitrationEvent{
                ev.at("answer_a").get<std::string>(), ev.at("answer_b").get<std::string>(),
                ev.at("verdict").get<std::string>(), ev.value("transport_failed", false)});
        }
        r.engine = std::move(d);
    }
    return r;
}

json population_to_json(const Population& pop) {
    json arr = json::array();
    for (const Particle& p : pop.particles) arr.push_back(to_json(p));
    return arr;
}

Population population_from_json(const json& j) {
    Population pop;
    for (const auto& p : j) pop.particles.push_back(particle_from_json(p));
    return pop;
}

}  // namespace prism
