#include "prism/harness.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "prism/dataset.hpp"
#include "prism/engine.hpp"
#include "prism/errors.hpp"
#include "prism/parallel.hpp"
#include "prism/rng.hpp"

namespace prism {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                         const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
        }
    }
}

Decoding decoding_from_json(const json& j, const Decoding& defaults) {
    reject_unknown_keys(j, {"temperature", "top_p", "max_tokens"}, "decoding");
    Decoding d = defaults;
    d.temperature = j.value("temperature", d.temperature);
    d.top_p = j.value("top_p", d.top_p);
    d.max_tokens = j.value("max_tokens", d.max_tokens);
    return d;
}

RunConfig run_config_from_json(const json& j) {
    reject_unknown_keys(j,
                        {"N", "T", "T_smc", "alpha", "eta", "c", "kappa", "epsilon", "theta_hi",
                         "delta_tie", "seed", "max_parallel", "decoding"},
                        "run");
    RunConfig r;
    r.population_width = j.value("N", r.population_width);
    r.refinement_depth = j.value("T", r.refinement_depth);
    r.smc_temperature = j.value("T_smc", r.smc_temperature);
    r.ess_threshold = j.value("alpha", r.ess_threshold);
    r.explore_prob = j.value("eta", r.explore_prob);
    r.arbitration_clamp = j.value("c", r.arbitration_clamp);
    r.clone_cap_fraction = j.value("kappa", r.clone_cap_fraction);
    r.score_floor = j.value("epsilon", r.score_floor);
    r.arbitration_theta_hi = j.value("theta_hi", r.arbitration_theta_hi);
    r.arbitration_delta_tie = j.value("delta_tie", r.arbitration_delta_tie);
    r.seed = j.value("seed", r.seed);
    r.max_parallel = j.value("max_parallel", r.max_parallel);
    if (j.contains("decoding")) {
        reject_unknown_keys(j.at("decoding"), {"generator", "iterator"}, "run.decoding");
        if (j.at("decoding").contains("generator")) {
            r.generator_decoding = decoding_from_json(j.at("decoding").at("generator"),
                                                      r.generator_decoding);
        }
        if (j.at("decoding").contains("iterator")) {
            r.iterator_decoding = decoding_from_json(j.at("decoding").at("iterator"),
                                                     r.iterator_decoding);
        }
    }
    return r;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
    if (p.is_absolute()) return p;
    return base / p;
}

std::string sanitize_for_path(const std::string& id) {
    std::string out;
    for (char c : id) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') {
            out.push_back(c);
        } else {
            out.push_back('_');
        }
    }
    char suffix[24];
    std::snprintf(suffix, sizeof(suffix), "__%08llx",
                  static_cast<unsigned long long>(fnv1a(id) & 0xffffffffULL));
    return out.substr(0, 64) + suffix;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

HarnessConfig HarnessConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    reject_unknown_keys(j,
                        {"dataset", "strategy", "aggregation", "run", "backend", "pricing",
                         "templates", "output_dir", "checkpoints", "limit", "offset",
                         "problem_parallel", "save_initial", "load_initial"},
                        "config");
    HarnessConfig c;
    if (j.contains("dataset")) c.dataset = resolve(base_dir, j.at("dataset").get<std::string>());

    if (j.contains("strategy")) {
        const json& s = j.at("strategy");
        if (s.is_string()) {
            c.strategy = s.get<std::string>();
        } else {
            reject_unknown_keys(s, {"name", "params"}, "strategy");
            c.strategy = s.at("name").get<std::string>();
            if (s.contains("params")) {
                reject_unknown_keys(s.at("params"), {"follower_fraction", "rsa_group_size"},
                                    "strategy.params");
                c.strategy_params.follower_fraction =
                    s.at("params").value("follower_fraction", c.strategy_params.follower_fraction);
                c.strategy_params.rsa_group_size =
                    s.at("params").value("rsa_group_size", c.strategy_params.rsa_group_size);
            }
        }
    }

    if (j.contains("aggregation")) {
        c.aggregation.clear();
        for (const auto& a : j.at("aggregation")) {
            std::string name = a.get<std::string>();
            aggregation_method_from_string(name);  // validates
            c.aggregation.push_back(name);
        }
    }

    if (j.contains("run")) c.run = run_config_from_json(j.at("run"));

    if (j.contains("backend")) {
        const json& b = j.at("backend");
        reject_unknown_keys(b, {"kind", "sim_world", "wire"}, "backend");
        c.backend_kind = b.value("kind", c.backend_kind);
        if (c.backend_kind != "sim" && c.backend_kind != "wire") {
            throw ConfigError("backend.kind must be 'sim' or 'wire'");
        }
        if (b.contains("sim_world")) {
            c.sim_world = resolve(base_dir, b.at("sim_world").get<std::string>());
        }
        if (b.contains("wire")) c.wire = WireConfig::from_json(b.at("wire"));
    }

    if (j.contains("pricing")) {
        reject_unknown_keys(j.at("pricing"), {"input_per_mtok", "output_per_mtok"}, "pricing");
        c.pricing.input_per_mtok = j.at("pricing").value("input_per_mtok", c.pricing.input_per_mtok);
        c.pricing.output_per_mtok =
            j.at("pricing").value("output_per_mtok", c.pricing.output_per_mtok);
    }

    if (j.contains("templates")) {
        const json& t = j.at("templates");
        reject_unknown_keys(t, {"prompt_dir", "overrides"}, "templates");
        if (t.contains("prompt_dir")) {
            c.prompt_dir = resolve(base_dir, t.at("prompt_dir").get<std::string>());
        }
        if (t.contains("overrides")) {
            for (auto it = t.at("overrides").begin(); it != t.at("overrides").end(); ++it) {
                c.template_overrides[it.key()] = resolve(base_dir, it.value().get<std::string>());
            }
        }
    }

    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    c.checkpoints = j.value("checkpoints", c.checkpoints);
    if (j.contains("limit") && !j.at("limit").is_null()) c.limit = j.at("limit").get<int>();
    c.offset = j.value("offset", c.offset);
    c.problem_parallel = j.value("problem_parallel", c.problem_parallel);
    if (j.contains("save_initial") && !j.at("save_initial").is_null()) {
        c.save_initial = resolve(base_dir, j.at("save_initial").get<std::string>());
    }
    if (j.contains("load_initial") && !j.at("load_initial").is_null()) {
        c.load_initial = resolve(base_dir, j.at("load_initial").get<std::string>());
    }
    return c;
}

HarnessConfig HarnessConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("invalid config JSON in " + path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

void HarnessConfig::finalize() {
    run.validate();
    if (dataset.empty()) throw ConfigError("no dataset configured");
    if (!std::filesystem::exists(dataset)) {
        throw ConfigError("dataset does not exist: " + dataset.string());
    }
    if (sim_world) {
        if (!std::filesystem::exists(*sim_world)) {
            throw ConfigError("world file does not exist: " + sim_world->string());
        }
        world = ScriptedWorld::from_file(*sim_world);
    }
    if (load_initial && !std::filesystem::exists(*load_initial)) {
        throw ConfigError("initial-population file does not exist: " + load_initial->string());
    }
    if (save_initial && !checkpoints) {
        throw ConfigError("save_initial needs checkpoints enabled");
    }
    if (problem_parallel < 1) throw ConfigError("problem_parallel must be >= 1");
    if (offset < 0) throw ConfigError("offset must be >= 0");
    if (limit && *limit < 0) throw ConfigError("limit must be >= 0");
    make_strategy(strategy, strategy_params);  // validates the name and params
}

std::filesystem::path checkpoint_dir(const HarnessConfig& config, const std::string& problem_id) {
    return config.output_dir / "checkpoints" / sanitize_for_path(problem_id);
}

namespace {

struct ProblemRunner {
    const HarnessConfig& config;
    const BackendSet& backends;
    const TemplateSet& templates;
    EnhancementStrategy& strategy;
    const std::map<std::string, json>* initial_populations;  // may be null

    std::filesystem::path iter_path(const std::filesystem::path& dir, int t) const {
        char name[32];
        std::snprintf(name, sizeof(name), "iter_%03d.json", t);
        return dir / name;
    }

    void write_checkpoint(const std::filesystem::path& dir, const Problem& problem, int t,
                          const Population& pop, const IterationRecord& record) const {
        if (!config.checkpoints) return;
        json j{{"schema_version", 1},
               {"problem_id", problem.id},
               {"iteration", t},
               {"population", population_to_json(pop)},
               {"record", to_json(record)}};
        write_file_atomic(iter_path(dir, t), j.dump(2) + "\n");
    }

    void check_abort(const Problem& problem, int t) const {
        if (config.abort_hook && config.abort_hook(problem.id, t)) {
            throw AbortRunError("aborted after checkpoint " + std::to_string(t) + " of " +
                                problem.id);
        }
    }

    // Loads the contiguous checkpoint chain. Returns the next iteration to
    // run; a corrupt chain resets the problem to scratch.
    int load_chain(const std::filesystem::path& dir, const Problem& problem, Population& pop,
                   std::vector<IterationRecord>& records, bool& corrupt) const {
        corrupt = false;
        int next = 0;
        for (int t = 0; t <= config.run.refinement_depth; ++t) {
            std::filesystem::path path = iter_path(dir, t);
            if (!std::filesystem::exists(path)) break;
            try {
                std::ifstream in(path);
                json j;
                in >> j;
                if (j.at("schema_version").get<int>() != 1 ||
                    j.at("problem_id").get<std::string>() != problem.id ||
                    j.at("iteration").get<int>() != t) {
                    throw Error("checkpoint metadata mismatch");
                }
                Population loaded = population_from_json(j.at("population"));
                if (loaded.width() != config.run.population_width) {
                    throw Error("checkpoint width mismatch");
                }
                IterationRecord record = iteration_record_from_json(j.at("record"));
                pop = std::move(loaded);
                records.push_back(std::move(record));
                next = t + 1;
            } catch (const std::exception&) {
                corrupt = true;
                records.clear();
                pop = Population{};
                return 0;
            }
        }
        return next;
    }

    bool load_final(const std::filesystem::path& dir, const Problem& problem,
                    ProblemAggregation& agg) const {
        std::filesystem::path path = dir / "final.json";
        if (!std::filesystem::exists(path)) return false;
        try {
            std::ifstream in(path);
            json j;
            in >> j;
            if (j.at("schema_version").get<int>() != 1 ||
                j.at("problem_id").get<std::string>() != problem.id) {
                return false;
            }
            for (auto it = j.at("aggregation").begin(); it != j.at("aggregation").end(); ++it) {
                AggregateResult r;
                r.method = aggregation_method_from_string(it.key());
                if (it.value().contains("answer")) {
                    r.answer = Answer{it.value().at("answer").get<std::string>()};
                }
                for (auto s = it.value().at("support").begin(); s != it.value().at("support").end();
                     ++s) {
                    r.support[s.key()] = s.value().get<double>();
                }
                r.aggregator_tokens = it.value().value("aggregator_tokens", std::int64_t{0});
                r.fell_back = it.value().value("fell_back", false);
                agg.results[it.key()] = std::move(r);
            }
            for (const auto& c : j.at("calls")) agg.calls.push_back(call_record_from_json(c));
            return true;
        } catch (const std::exception&) {
            return false;
        }
    }

    void write_final(const std::filesystem::path& dir, const Problem& problem,
                     const ProblemAggregation& agg) const {
        if (!config.checkpoints) return;
        json methods;
        for (const auto& [name, r] : agg.results) {
            json m;
            if (r.answer) m["answer"] = r.answer->canonical;
            m["support"] = r.support;
            m["aggregator_tokens"] = r.aggregator_tokens;
            m["fell_back"] = r.fell_back;
            methods[name] = std::move(m);
        }
        json calls = json::array();
        for (const CallRecord& c : agg.calls) calls.push_back(to_json(c));
        json j{{"schema_version", 1},
               {"problem_id", problem.id},
               {"aggregation", methods},
               {"calls", calls}};
        write_file_atomic(dir / "final.json", j.dump(2) + "\n");
    }

    ProblemRunData run(const Problem& problem, bool resume) const {
        ProblemRunData data;
        data.problem = problem;
        std::filesystem::path dir = checkpoint_dir(config, problem.id);
        if (config.checkpoints) std::filesystem::create_directories(dir);

        Population pop;
        int next_t = 0;
        if (resume && config.checkpoints) {
            bool corrupt = false;
            next_t = load_chain(dir, problem, pop, data.records, corrupt);
            if (corrupt) next_t = 0;  // restart from scratch
            if (next_t > config.run.refinement_depth) {
                // All iterations complete: reuse the aggregation if intact.
                if (load_final(dir, problem, data.aggregation)) return data;
            }
        }

        StrategyContext ctx{problem, config.run, backends, templates};

        if (next_t == 0) {
            data.records.clear();
            IterationRecord init_record;
            bool loaded = false;
            if (initial_populations) {
                auto it = initial_populations->find(problem.id);
                if (it != initial_populations->end()) {
                    pop = population_from_json(it->second.at("population"));
                    init_record = iteration_record_from_json(it->second.at("record"));
                    loaded = true;
                }
            }
            if (!loaded) {
                pop = generate_initial_population(problem, config.run, backends, templates,
                                                  init_record);
            }
            data.records.push_back(init_record);
            write_checkpoint(dir, problem, 0, pop, init_record);
            check_abort(problem, 0);
            next_t = 1;
        }

        for (int t = next_t; t <= config.run.refinement_depth; ++t) {
            IterationRecord record = strategy.enhance(ctx, pop, t);
            if (pop.width() != config.run.population_width) {
                throw Error("strategy changed population width at iteration " + std::to_string(t));
            }
            data.records.push_back(record);
            write_checkpoint(dir, problem, t, pop, record);
            check_abort(problem, t);
        }

        // Aggregation. The score vote reuses the engine's last computed
        // scores; strategies that do not maintain scores get one final
        // verification pass first.
        bool wants_prm = std::find(config.aggregation.begin(), config.aggregation.end(),
                                   "prm_score") != config.aggregation.end();
        bool has_scores = strategy.produces_scores() && config.run.refinement_depth > 0;
        if (wants_prm && !has_scores) {
            RefinementEngine engine(config.run, backends, templates);
            engine.score_population(problem, pop, config.run.refinement_depth + 1,
                                    data.aggregation.calls);
        }
        for (const std::string& method : config.aggregation) {
            switch (aggregation_method_from_string(method)) {
                case AggregationMethod::majority:
                    data.aggregation.results[method] = majority_vote(pop);
                    break;
                case AggregationMethod::prm_score:
                    data.aggregation.results[method] = prm_score_vote(pop);
                    break;
                case AggregationMethod::llm:
                    data.aggregation.results[method] =
                        llm_aggregate(problem, pop, *backends.generator, templates.aggregate,
                                      config.run, data.aggregation.calls);
                    break;
            }
        }
        write_final(dir, problem, data.aggregation);
        return data;
    }
};

RunOutcome run_impl(const HarnessConfig& config, bool resume) {
    std::vector<Problem> problems = load_dataset(config.dataset);
    std::size_t begin = std::min<std::size_t>(config.offset, problems.size());
    std::size_t end = problems.size();
    if (config.limit) end = std::min(end, begin + static_cast<std::size_t>(*config.limit));
    problems = std::vector<Problem>(problems.begin() + begin, problems.begin() + end);

    TemplateSet templates = TemplateSet::load(config.prompt_dir, config.template_overrides);

    // Build backends. The simulator treats a problem's gold answer as the
    // world's true answer unless the world file pins one explicitly.
    std::unique_ptr<SimulatorBackend> sim;
    std::unique_ptr<CallThrottle> throttle;
    std::unique_ptr<WireClient> wire;
    BackendSet backends;
    if (config.backend_kind == "sim") {
        ScriptedWorld world = config.world;
        for (const Problem& p : problems) {
            if (p.gold_answer && !world.answers.count(p.id)) world.answers[p.id] = *p.gold_answer;
        }
        sim = std::make_unique<SimulatorBackend>(std::move(world));
        backends.generator = backends.verifier = backends.iterator = backends.comparator = sim.get();
    } else {
        throttle = std::make_unique<CallThrottle>(config.run.max_parallel);
        wire = std::make_unique<WireClient>(config.wire, throttle.get());
        backends.generator = backends.verifier = backends.iterator = backends.comparator = wire.get();
    }

    std::unique_ptr<EnhancementStrategy> strategy =
        make_strategy(config.strategy, config.strategy_params);

    std::map<std::string, json> initial_populations;
    if (config.load_initial) {
        std::ifstream in(*config.load_initial);
        if (!in) throw ConfigError("cannot open initial-population file");
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json j = json::parse(line);
            initial_populations[j.at("problem_id").get<std::string>()] = j;
        }
    }

    std::filesystem::create_directories(config.output_dir);

    ProblemRunner runner{config, backends, templates, *strategy,
                         config.load_initial ? &initial_populations : nullptr};

    std::vector<ProblemRunData> results(problems.size());
    parallel_for(problems.size(), config.problem_parallel, [&](std::size_t i) {
        try {
            results[i] = runner.run(problems[i], resume);
        } catch (const AbortRunError&) {
            throw;  // the simulated kill propagates
        } catch (const std::exception& e) {
            results[i].problem = problems[i];
            results[i].failed = true;
            results[i].failure = e.what();
        }
    });

    if (config.save_initial) {
        std::ostringstream out;
        for (const ProblemRunData& data : results) {
            if (data.failed || data.records.empty()) continue;
            std::filesystem::path dir = checkpoint_dir(config, data.problem.id);
            // The checkpointed iteration-0 population is the canonical copy.
            std::filesystem::path t0 = dir / "iter_000.json";
            if (config.checkpoints && std::filesystem::exists(t0)) {
                std::ifstream in(t0);
                json j;
                in >> j;
                out << json{{"problem_id", data.problem.id},
                            {"population", j.at("population")},
                            {"record", j.at("record")}}
                           .dump()
                    << '\n';
            }
        }
        write_file_atomic(*config.save_initial, out.str());
    }

    ReportSettings settings{config.strategy, config.aggregation, config.run, config.pricing,
                            config.backend_kind};
    RunOutcome outcome;
    outcome.problems = std::move(results);
    outcome.report = build_report(settings, outcome.problems);
    for (const ProblemRunData& p : outcome.problems) {
        if (p.failed) outcome.exit_code = 1;
    }

    write_file_atomic(config.output_dir / "report.json", outcome.report.dump(2) + "\n");
    write_file_atomic(config.output_dir / "per_problem.csv",
                      report_per_problem_csv(outcome.report));
    write_file_atomic(config.output_dir / "per_iteration.csv",
                      report_per_iteration_csv(outcome.report));
    return outcome;
}

}  // namespace

RunOutcome run_harness(const HarnessConfig& config) {
    HarnessConfig c = config;
    c.finalize();
    return run_impl(c, c.resume);
}

RunOutcome resume_harness(HarnessConfig config) {
    config.resume = true;
    config.finalize();
    return run_impl(config, true);
}

}  // namespace prism
