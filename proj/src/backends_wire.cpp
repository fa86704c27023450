#include <chrono>
#include <cmath>
#include <cstdlib>
#include <semaphore>
#include <thread>

#include <httplib.h>

#include "prism/backends.hpp"
#include "prism/errors.hpp"

namespace prism {

using nlohmann::json;

std::int64_t estimate_tokens(std::size_t characters) {
    return static_cast<std::int64_t>((characters + 3) / 4);
}

WireConfig WireConfig::from_json(const json& j) {
    static const std::vector<std::string> known = {"base_url", "api_key_env", "models",
                                                   "extra_params", "max_attempts",
                                                   "backoff_base_s", "timeout_s"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const std::string& k : known) ok = ok || k == it.key();
        if (!ok) throw ConfigError("unknown wire backend key: " + it.key());
    }
    WireConfig c;
    c.base_url = j.value("base_url", c.base_url);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    if (j.contains("models")) {
        for (auto it = j.at("models").begin(); it != j.at("models").end(); ++it) {
            c.models[it.key()] = it.value().get<std::string>();
        }
    }
    if (j.contains("extra_params")) c.extra_params = j.at("extra_params");
    c.max_attempts = j.value("max_attempts", c.max_attempts);
    c.backoff_base_s = j.value("backoff_base_s", c.backoff_base_s);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    return c;
}

json WireConfig::to_json() const {
    json j{{"base_url", base_url},
           {"api_key_env", api_key_env},
           {"max_attempts", max_attempts},
           {"backoff_base_s", backoff_base_s},
           {"timeout_s", timeout_s}};
    if (!models.empty()) j["models"] = models;
    if (!extra_params.is_null()) j["extra_params"] = extra_params;
    return j;
}

struct CallThrottle::Impl {
    explicit Impl(int n) : sem(n) {}
    std::counting_semaphore<1 << 20> sem;
};

CallThrottle::CallThrottle(int max_parallel)
    : impl_(std::make_unique<Impl>(std::max(1, max_parallel))) {}

CallThrottle::~CallThrottle() = default;

void CallThrottle::acquire() { impl_->sem.acquire(); }
void CallThrottle::release() { impl_->sem.release(); }

namespace {

struct ThrottleGuard {
    explicit ThrottleGuard(CallThrottle* t) : throttle(t) {
        if (throttle) throttle->acquire();
    }
    ~ThrottleGuard() {
        if (throttle) throttle->release();
    }
    CallThrottle* throttle;
};

void split_base_url(const std::string& base_url, std::string& origin, std::string& path_prefix) {
    std::size_t scheme = base_url.find("://");
    std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    std::size_t slash = base_url.find('/', host_start);
    if (slash == std::string::npos) {
        origin = base_url;
        path_prefix.clear();
    } else {
        origin = base_url.substr(0, slash);
        path_prefix = base_url.substr(slash);
        while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();
    }
}

bool retriable_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

WireClient::WireClient(WireConfig config, CallThrottle* throttle)
    : config_(std::move(config)), throttle_(throttle) {
    split_base_url(config_.base_url, origin_, path_prefix_);
}

ChatReply WireClient::call(const ChatCall& call) {
    json body;
    auto model_it = config_.models.find(to_string(call.role));
    body["model"] = model_it != config_.models.end() ? model_it->second : "default";
    body["messages"] = json::array({json{{"role", "user"}, {"content", call.prompt}}});
    body["temperature"] = call.decoding.temperature;
    body["top_p"] = call.decoding.top_p;
    body["max_tokens"] = call.decoding.max_tokens;
    if (config_.extra_params.is_object()) {
        for (auto it = config_.extra_params.begin(); it != config_.extra_params.end(); ++it) {
            body[it.key()] = it.value();
        }
    }
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    ChatReply reply;
    auto started = std::chrono::steady_clock::now();
    for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
        if (attempt > 0) {
            double delay = config_.backoff_base_s * std::pow(2.0, attempt - 1);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        ThrottleGuard guard(throttle_);
        httplib::Client client(origin_);
        client.set_connection_timeout(config_.timeout_s);
        client.set_read_timeout(config_.timeout_s);
        client.set_write_timeout(config_.timeout_s);
        auto res = client.Post(path_prefix_ + "/v1/chat/completions", headers, payload,
                               "application/json");

        if (!res) {
            reply.status = TransportStatus::retriable_error;
            reply.error = "transport: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            reply.error = "http " + std::to_string(res->status);
            if (retriable_status(res->status)) {
                reply.status = TransportStatus::retriable_error;
                // Failed attempts may still have burned tokens; keep whatever
                // the provider reported, flagged as a retry.
                try {
                    json err = json::parse(res->body);
                    if (err.contains("usage")) {
                        reply.retry_usage.push_back(
                            Usage{err["usage"].value("prompt_tokens", std::int64_t{0}),
                                  err["usage"].value("completion_tokens", std::int64_t{0}), false});
                    }
                } catch (...) {
                }
                continue;
            }
            reply.status = TransportStatus::fatal_error;
            break;
        }

        json parsed;
        try {
            parsed = json::parse(res->body);
            reply.text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            reply.status = TransportStatus::fatal_error;
            reply.error = std::string("malformed response: ") + e.what();
            break;
        }
        if (parsed.contains("usage") && parsed["usage"].contains("prompt_tokens") &&
            parsed["usage"].contains("completion_tokens")) {
            reply.usage.input_tokens = parsed["usage"]["prompt_tokens"].get<std::int64_t>();
            reply.usage.output_tokens = parsed["usage"]["completion_tokens"].get<std::int64_t>();
            reply.usage.estimated = false;
        } else {
            reply.usage.input_tokens = estimate_tokens(call.prompt.size());
            reply.usage.output_tokens = estimate_tokens(reply.text.size());
            reply.usage.estimated = true;
        }
        reply.status = TransportStatus::ok;
        reply.error.clear();
        break;
    }
    reply.latency_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - started)
                           .count();
    return reply;
}

}  // namespace prism
