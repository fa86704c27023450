#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "prism/types.hpp"

namespace prism {

enum class Role { generator, verifier, iterator, comparator };

const char* to_string(Role role);

struct CallMeta {
    std::string problem_id;
    int iteration = 0;
    int particle_index = 0;
    // Discriminates calls that share (problem, iteration, particle), e.g. the
    // scoring-phase verification vs. the proposal verification. Also tells
    // the simulator which output contract to honor.
    std::string purpose;
};

struct ChatCall {
    Role role = Role::generator;
    std::string prompt;
    Decoding decoding;
    CallMeta meta;
};

// Verifier and comparator calls always run deterministically.
ChatCall make_call(Role role, std::string prompt, const RunConfig& cfg, CallMeta meta);

enum class TransportStatus { ok, retriable_error, fatal_error };

struct Usage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    bool estimated = false;
};

struct ChatReply {
    std::string text;
    Usage usage;
    double latency_ms = 0.0;
    TransportStatus status = TransportStatus::ok;
    std::string error;
    // Usage burned by failed attempts before the final one; accounted
    // separately so run totals count each reply exactly once.
    std::vector<Usage> retry_usage;

    bool ok() const { return status == TransportStatus::ok; }
};

class Backend {
  public:
    virtual ~Backend() = default;
    virtual ChatReply call(const ChatCall& call) = 0;
};

struct BackendSet {
    Backend* generator = nullptr;
    Backend* verifier = nullptr;
    Backend* iterator = nullptr;
    Backend* comparator = nullptr;

    Backend& for_role(Role role) const;
};

// ---------------------------------------------------------------------------
// Deterministic simulator
// ---------------------------------------------------------------------------

struct RoleTokenCost {
    std::int64_t input = 0;
    std::int64_t output = 0;
};

// Desk-scale world model: answers evolve under scripted probabilities, the
// synthesized texts obey the same output contracts as real model replies.
// Replies are a pure function of (world seed, call role+purpose+metadata,
// prompt), so identical calls always produce identical replies.
struct ScriptedWorld {
    std::uint64_t seed = 1;
    double p_init_correct = 0.3;
    double p_fix = 0.3;
    double p_break = 0.3;
    double rho = 0.0;  // per-step label flip probability
    std::optional<double> final_verdict_noise;  // defaults to rho
    double attractor_share = 0.7;  // mass of the most common wrong answer
    int wrong_pool = 5;
    int steps_min = 3;
    int steps_max = 6;
    std::map<std::string, RoleTokenCost> token_cost;  // keys: generator/verifier/iterator/comparator
    std::map<std::string, std::string> answers;  // problem id -> true answer

    double effective_final_noise() const { return final_verdict_noise.value_or(rho); }
    RoleTokenCost cost_for(Role role) const;
    std::string true_answer(const std::string& problem_id) const;

    static ScriptedWorld from_json(const nlohmann::json& j);
    static ScriptedWorld from_file(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

enum class IterateMode { local_refine, explore };

// Oracle dynamics: local refinement flips incorrect->correct with p_fix and
// correct->incorrect with p_break; exploration redraws correctness with
// p_init_correct.
bool simulate_iterate(const ScriptedWorld& world, bool correct, IterateMode mode,
                      std::mt19937_64& rng);

class SimulatorBackend : public Backend {
  public:
    explicit SimulatorBackend(ScriptedWorld world) : world_(std::move(world)) {}

    ChatReply call(const ChatCall& call) override;

    const ScriptedWorld& world() const { return world_; }

  private:
    ScriptedWorld world_;
};

// ---------------------------------------------------------------------------
// Wire client (OpenAI-compatible chat completions)
// ---------------------------------------------------------------------------

struct WireConfig {
    std::string base_url = "http://localhost:8000";
    std::string api_key_env = "PRISM_API_KEY";
    std::map<std::string, std::string> models;  // role name -> model id
    nlohmann::json extra_params;                // merged into the request body
    int max_attempts = 3;
    double backoff_base_s = 1.0;  // 1s, 2s, 4s
    int timeout_s = 300;

    static WireConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Bounds total in-flight wire calls across all threads and problems.
class CallThrottle {
  public:
    explicit CallThrottle(int max_parallel);
    ~CallThrottle();

    void acquire();
    void release();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

class WireClient : public Backend {
  public:
    explicit WireClient(WireConfig config, CallThrottle* throttle = nullptr);

    ChatReply call(const ChatCall& call) override;

  private:
    WireConfig config_;
    CallThrottle* throttle_;
    std::string origin_;  // scheme://host[:port]
    std::string path_prefix_;
};

// Rounds characters up to tokens when the provider omits usage counts.
std::int64_t estimate_tokens(std::size_t characters);

}  // namespace prism
