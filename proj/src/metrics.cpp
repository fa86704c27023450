#include "prism/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "prism/errors.hpp"

namespace prism {

using nlohmann::json;

double pop_acc(const Population& population, const Answer& gold) {
    if (population.width() == 0) return 0.0;
    int correct = 0;
    for (const Particle& p : population.particles) {
        if (p.trace.answer && answers_equal(*p.trace.answer, gold)) ++correct;
    }
    return static_cast<double>(correct) / population.width();
}

double pop_acc(const std::vector<SlotRecord>& slots) {
    if (slots.empty()) return 0.0;
    int correct = 0;
    for (const SlotRecord& s : slots) {
        if (s.correct.value_or(false)) ++correct;
    }
    return static_cast<double>(correct) / slots.size();
}

std::vector<int> net_flip_per_step(const std::vector<std::vector<bool>>& correctness_history) {
    if (correctness_history.empty()) return {};
    const std::size_t len = correctness_history.front().size();
    for (const auto& h : correctness_history) {
        if (h.size() != len) throw MalformedHistoryError("ragged correctness histories");
    }
    if (len == 0) throw MalformedHistoryError("empty correctness histories");
    std::vector<int> per_step(len - 1, 0);
    for (const auto& h : correctness_history) {
        for (std::size_t t = 1; t < len; ++t) {
            if (!h[t - 1] && h[t]) ++per_step[t - 1];
            if (h[t - 1] && !h[t]) --per_step[t - 1];
        }
    }
    return per_step;
}

int net_flip(const std::vector<std::vector<bool>>& correctness_history) {
    int total = 0;
    for (int v : net_flip_per_step(correctness_history)) total += v;
    return total;
}

DominanceStats dominance_stats(const std::vector<std::vector<int>>& offspring_counts, int n) {
    DominanceStats stats;
    for (const auto& counts : offspring_counts) {
        int max_count = 0;
        for (int c : counts) max_count = std::max(max_count, c);
        ++stats.events;
        if (static_cast<double>(max_count) / n > 0.3) stats.p_max_share_gt_03 += 1.0;
        if (max_count == n) stats.p_takeover += 1.0;
    }
    if (stats.events > 0) {
        stats.p_max_share_gt_03 /= stats.events;
        stats.p_takeover /= stats.events;
    }
    return stats;
}

AcceptanceDiagnostics acceptance_diagnostics(const std::vector<IterationRecord>& records) {
    AcceptanceDiagnostics d;
    int downhill_accepted = 0;
    double sum_accepted = 0.0, sum_rejected = 0.0;
    int n_accepted = 0, n_rejected = 0;
    for (const IterationRecord& r : records) {
        for (const SlotRecord& s : r.slots) {
            if (!s.proposal) continue;
            const ProposalRecord& p = *s.proposal;
            if (p.kind != MoveKind::local_refine && p.kind != MoveKind::explore) continue;
            ++d.proposals;
            if (p.downhill) {
                ++d.downhill;
                if (p.accepted) ++downhill_accepted;
            }
            if (p.accepted) {
                sum_accepted += p.score_new;
                ++n_accepted;
            } else {
                sum_rejected += p.score_new;
                ++n_rejected;
            }
        }
    }
    if (d.downhill > 0) d.p_downhill_accept = static_cast<double>(downhill_accepted) / d.downhill;
    if (n_accepted > 0) d.mean_score_accepted = sum_accepted / n_accepted;
    if (n_rejected > 0) d.mean_score_rejected = sum_rejected / n_rejected;
    return d;
}

double cost_estimate(const TokenTotals& totals, const Pricing& pricing) {
    if (totals.input_tokens < 0 || totals.output_tokens < 0 || totals.retry_input_tokens < 0 ||
        totals.retry_output_tokens < 0) {
        throw AccountingError("negative token counts");
    }
    return totals.input_tokens / 1e6 * pricing.input_per_mtok +
           totals.output_tokens / 1e6 * pricing.output_per_mtok;
}

double cost_estimate_from_total(std::int64_t total_tokens, const Pricing& pricing) {
    if (total_tokens < 0) throw AccountingError("negative token counts");
    return total_tokens * 0.6 / 1e6 * pricing.input_per_mtok +
           total_tokens * 0.4 / 1e6 * pricing.output_per_mtok;
}

TokenTotals fold_usage(const std::vector<CallRecord>& calls) {
    TokenTotals t;
    for (const CallRecord& c : calls) {
        if (c.usage.input_tokens < 0 || c.usage.output_tokens < 0) {
            throw AccountingError("negative token counts in call record");
        }
        t.input_tokens += c.usage.input_tokens;
        t.output_tokens += c.usage.output_tokens;
        for (const Usage& u : c.retry_usage) {
            t.retry_input_tokens += u.input_tokens;
            t.retry_output_tokens += u.output_tokens;
        }
    }
    return t;
}

std::map<std::string, TokenTotals> fold_usage_by_role(const std::vector<CallRecord>& calls) {
    std::map<std::string, TokenTotals> by_role;
    for (const CallRecord& c : calls) {
        TokenTotals& t = by_role[to_string(c.role)];
        t.input_tokens += c.usage.input_tokens;
        t.output_tokens += c.usage.output_tokens;
        for (const Usage& u : c.retry_usage) {
            t.retry_input_tokens += u.input_tokens;
            t.retry_output_tokens += u.output_tokens;
        }
    }
    return by_role;
}

namespace {

json totals_to_json(const TokenTotals& t) {
    return json{{"input_tokens", t.input_tokens},
                {"output_tokens", t.output_tokens},
                {"retry_input_tokens", t.retry_input_tokens},
                {"retry_output_tokens", t.retry_output_tokens}};
}

std::optional<bool> method_correct(const AggregateResult& result, const std::optional<Answer>& gold) {
    if (!gold) return std::nullopt;
    return result.answer && answers_equal(*result.answer, *gold);
}

}  // namespace

json build_report(const ReportSettings& settings, const std::vector<ProblemRunData>& problems) {
    json report;
    report["schema_version"] = 1;
    report["settings"] = json{{"strategy", settings.strategy},
                              {"aggregation", settings.aggregation_methods},
                              {"backend", settings.backend_kind},
                              {"N", settings.run.population_width},
                              {"T", settings.run.refinement_depth},
                              {"T_smc", settings.run.smc_temperature},
                              {"alpha", settings.run.ess_threshold},
                              {"eta", settings.run.explore_prob},
                              {"c", settings.run.arbitration_clamp},
                              {"kappa", settings.run.clone_cap_fraction},
                              {"epsilon", settings.run.score_floor},
                              {"seed", settings.run.seed},
                              {"pricing", json{{"input_per_mtok", settings.pricing.input_per_mtok},
                                               {"output_per_mtok", settings.pricing.output_per_mtok}}}};

    json per_problem = json::array();
    std::vector<CallRecord> all_calls;
    std::vector<IterationRecord> all_records;
    std::vector<std::vector<int>> all_offspring;
    std::map<std::string, int> method_correct_counts;
    std::map<std::string, int> method_graded_counts;
    std::vector<double> mean_pop_acc_by_t;  // running sums, averaged below
    std::vector<double> mean_ess_over_n_by_t;
    std::vector<int> ess_count_by_t;
    std::vector<int> resample_count_by_t;
    std::vector<int> pop_acc_count_by_t;
    long long netflip_total = 0;
    int netflip_problems = 0;
    int resampled_iterations = 0;
    int engine_iterations = 0;
    int failed_problems = 0;

    for (const ProblemRunData& prob : problems) {
        json entry;
        entry["id"] = prob.problem.id;
        if (prob.problem.gold_answer) entry["gold"] = normalize_answer_text(*prob.problem.gold_answer);
        entry["failed"] = prob.failed;
        if (prob.failed) {
            entry["failure"] = prob.failure;
            ++failed_problems;
            per_problem.push_back(std::move(entry));
            continue;
        }

        std::optional<Answer> gold;
        if (prob.problem.gold_answer) gold = make_answer(*prob.problem.gold_answer);

        // Per-iteration population accuracy and slot correctness histories.
        json pop_acc_arr = json::array();
        std::vector<std::vector<bool>> histories;
        if (!prob.records.empty()) {
            histories.assign(prob.records.front().slots.size(),
                             std::vector<bool>(prob.records.size(), false));
        }
        for (std::size_t t = 0; t < prob.records.size(); ++t) {
            const IterationRecord& rec = prob.records[t];
            if (gold) {
                double pa = pop_acc(rec.slots);
                pop_acc_arr.push_back(pa);
                if (mean_pop_acc_by_t.size() <= t) {
                    mean_pop_acc_by_t.resize(t + 1, 0.0);
                    pop_acc_count_by_t.resize(t + 1, 0);
                }
                mean_pop_acc_by_t[t] += pa;
                ++pop_acc_count_by_t[t];
            } else {
                pop_acc_arr.push_back(nullptr);
            }
            for (std::size_t i = 0; i < rec.slots.size() && i < histories.size(); ++i) {
                histories[i][t] = rec.slots[i].correct.value_or(false);
            }
            if (rec.engine) {
                ++engine_iterations;
                if (rec.engine->resampled) {
                    ++resampled_iterations;
                    all_offspring.push_back(rec.engine->offspring_counts);
                }
                std::size_t ti = t;  // engine records start at t=1
                if (mean_ess_over_n_by_t.size() <= ti) {
                    mean_ess_over_n_by_t.resize(ti + 1, 0.0);
                    ess_count_by_t.resize(ti + 1, 0);
                    resample_count_by_t.resize(ti + 1, 0);
                }
                mean_ess_over_n_by_t[ti] += rec.engine->ess / rec.slots.size();
                ++ess_count_by_t[ti];
                if (rec.engine->resampled) ++resample_count_by_t[ti];
            }
            all_records.push_back(rec);
            all_calls.insert(all_calls.end(), rec.calls.begin(), rec.calls.end());
        }
        entry["pop_acc"] = pop_acc_arr;

        if (gold && !histories.empty()) {
            entry["net_flip"] = net_flip(histories);
            entry["net_flip_per_step"] = net_flip_per_step(histories);
            netflip_total += net_flip(histories);
            ++netflip_problems;
        }

        json methods;
        for (const auto& [name, result] : prob.aggregation.results) {
            json m;
            if (result.answer) m["answer"] = result.answer->canonical;
            m["support"] = result.support;
            m["fell_back"] = result.fell_back;
            m["aggregator_tokens"] = result.aggregator_tokens;
            auto correct = method_correct(result, gold);
            if (correct) {
                m["correct"] = *correct;
                ++method_graded_counts[name];
                if (*correct) ++method_correct_counts[name];
            }
            methods[name] = std::move(m);
        }
        entry["aggregation"] = std::move(methods);
        all_calls.insert(all_calls.end(), prob.aggregation.calls.begin(),
                         prob.aggregation.calls.end());

        std::vector<CallRecord> problem_calls;
        for (const IterationRecord& rec : prob.records) {
            problem_calls.insert(problem_calls.end(), rec.calls.begin(), rec.calls.end());
        }
        problem_calls.insert(problem_calls.end(), prob.aggregation.calls.begin(),
                             prob.aggregation.calls.end());
        TokenTotals totals = fold_usage(problem_calls);
        entry["tokens"] = totals_to_json(totals);
        entry["cost"] = cost_estimate(totals, settings.pricing);
        per_problem.push_back(std::move(entry));
    }
    report["per_problem"] = std::move(per_problem);

    json summary;
    summary["problems"] = problems.size();
    summary["failed_problems"] = failed_problems;

    json accuracy;
    for (const auto& [name, graded] : method_graded_counts) {
        accuracy[name] = json{{"correct", method_correct_counts[name]},
                              {"graded", graded},
                              {"accuracy", graded > 0
                                               ? static_cast<double>(method_correct_counts[name]) / graded
                                               : 0.0}};
    }
    summary["accuracy"] = std::move(accuracy);

    json pop_acc_mean = json::array();
    for (std::size_t t = 0; t < mean_pop_acc_by_t.size(); ++t) {
        pop_acc_mean.push_back(pop_acc_count_by_t[t] > 0 ? json(mean_pop_acc_by_t[t] / pop_acc_count_by_t[t])
                                                         : json(nullptr));
    }
    summary["mean_pop_acc_by_t"] = std::move(pop_acc_mean);

    json ess_mean = json::array();
    json resample_rate_by_t = json::array();
    for (std::size_t t = 0; t < mean_ess_over_n_by_t.size(); ++t) {
        if (ess_count_by_t[t] > 0) {
            ess_mean.push_back(mean_ess_over_n_by_t[t] / ess_count_by_t[t]);
            resample_rate_by_t.push_back(static_cast<double>(resample_count_by_t[t]) /
                                         ess_count_by_t[t]);
        } else {
            ess_mean.push_back(nullptr);
            resample_rate_by_t.push_back(nullptr);
        }
    }
    summary["mean_ess_over_n_by_t"] = std::move(ess_mean);
    summary["resampling_rate_by_t"] = std::move(resample_rate_by_t);
    summary["resampling_rate"] =
        engine_iterations > 0 ? json(static_cast<double>(resampled_iterations) / engine_iterations)
                              : json(nullptr);

    if (netflip_problems > 0) {
        summary["net_flip_total"] = netflip_total;
        summary["net_flip_mean_per_problem"] =
            static_cast<double>(netflip_total) / netflip_problems;
    }

    DominanceStats dom = dominance_stats(all_offspring, settings.run.population_width);
    summary["dominance_pre_cap"] = json{{"p_max_share_gt_03", dom.p_max_share_gt_03},
                                        {"p_takeover", dom.p_takeover},
                                        {"events", dom.events}};

    AcceptanceDiagnostics acc = acceptance_diagnostics(all_records);
    json acc_json{{"proposals", acc.proposals}, {"downhill", acc.downhill}};
    acc_json["p_downhill_accept"] =
        acc.p_downhill_accept ? json(*acc.p_downhill_accept) : json(nullptr);
    acc_json["mean_score_accepted"] =
        acc.mean_score_accepted ? json(*acc.mean_score_accepted) : json(nullptr);
    acc_json["mean_score_rejected"] =
        acc.mean_score_rejected ? json(*acc.mean_score_rejected) : json(nullptr);
    summary["acceptance"] = std::move(acc_json);

    TokenTotals totals = fold_usage(all_calls);
    summary["tokens"] = totals_to_json(totals);
    json by_role;
    for (const auto& [role, t] : fold_usage_by_role(all_calls)) by_role[role] = totals_to_json(t);
    summary["tokens_by_role"] = std::move(by_role);
    summary["cost"] = cost_estimate(totals, settings.pricing);
    report["summary"] = std::move(summary);
    return report;
}

namespace {

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string csv_cell(const json& j) {
    if (j.is_null()) return "";
    if (j.is_number_float()) return fmt_double(j.get<double>());
    if (j.is_boolean()) return j.get<bool>() ? "1" : "0";
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        bool quote = s.find_first_of(",\"\n") != std::string::npos;
        if (!quote) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += "\"\"";
            else out.push_back(c);
        }
        out += "\"";
        return out;
    }
    return j.dump();
}

}  // namespace

std::string report_per_problem_csv(const json& report) {
    std::ostringstream out;
    out << "# prism-report-csv v1\n";
    out << "problem_id,failed,gold,majority_answer,majority_correct,prm_score_answer,"
           "prm_score_correct,llm_answer,llm_correct,net_flip,input_tokens,output_tokens,cost\n";
    for (const auto& p : report.at("per_problem")) {
        auto method_field = [&](const std::string& method, const std::string& field) -> json {
            if (!p.contains("aggregation")) return nullptr;
            const auto& agg = p.at("aggregation");
            if (!agg.contains(method) || !agg.at(method).contains(field)) return nullptr;
            return agg.at(method).at(field);
        };
        out << csv_cell(p.at("id")) << ',' << csv_cell(p.at("failed")) << ','
            << csv_cell(p.value("gold", json(nullptr))) << ','
            << csv_cell(method_field("majority", "answer")) << ','
            << csv_cell(method_field("majority", "correct")) << ','
            << csv_cell(method_field("prm_score", "answer")) << ','
            << csv_cell(method_field("prm_score", "correct")) << ','
            << csv_cell(method_field("llm", "answer")) << ','
            << csv_cell(method_field("llm", "correct")) << ','
            << csv_cell(p.value("net_flip", json(nullptr))) << ','
            << csv_cell(p.contains("tokens") ? p.at("tokens").at("input_tokens") : json(nullptr))
            << ','
            << csv_cell(p.contains("tokens") ? p.at("tokens").at("output_tokens") : json(nullptr))
            << ',' << csv_cell(p.value("cost", json(nullptr))) << '\n';
    }
    return out.str();
}

std::string report_per_iteration_csv(const json& report) {
    std::ostringstream out;
    out << "# prism-report-csv v1\n";
    out << "problem_id,iteration,pop_acc\n";
    for (const auto& p : report.at("per_problem")) {
        if (!p.contains("pop_acc")) continue;
        const auto& arr = p.at("pop_acc");
        for (std::size_t t = 0; t < arr.size(); ++t) {
            out << csv_cell(p.at("id")) << ',' << t << ',' << csv_cell(arr.at(t)) << '\n';
        }
    }
    return out.str();
}

}  // namespace prism
