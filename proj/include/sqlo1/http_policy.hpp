#pragma once

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sqlo1/errors.hpp"
#include "sqlo1/fragmenter.hpp"
#include "sqlo1/policy.hpp"

namespace sqlo1 {

struct HttpPolicyConfig {
    std::string endpoint;        // full URL of a completions-style route
    std::string api_key;         // sent as a bearer token when non-empty
    int max_retries = 3;
    int initial_backoff_ms = 250;
    int read_timeout_sec = 120;
    int max_in_flight = 8;

    void validate() const {
        if (endpoint.empty()) throw ConfigError("policy endpoint is not configured");
        if (max_retries < 1) throw ConfigError("max_retries must be >= 1");
        if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    }
};

/// Policy served by an HTTP completion endpoint. Every request uses a
/// fresh client, so concurrent callers never share connection state;
/// a semaphore caps the number of requests in flight.
class HttpPolicy : public Policy {
public:
    explicit HttpPolicy(HttpPolicyConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        split_endpoint();
        in_flight_ = std::make_unique<std::counting_semaphore<4096>>(cfg_.max_in_flight);
    }

    std::vector<Continuation> beam_continuations(const std::string& state_text,
                                                 const PolicyConfig& cfg) override {
        nlohmann::json body = {
            {"prompt", state_text},
            {"n", cfg.beam_width},
            {"max_tokens", cfg.max_fragment_tokens},
            {"temperature", cfg.decode_temperature},
            {"logprobs", 1},
        };
        nlohmann::json reply = post(body);
        std::vector<Continuation> beam = parse_choices(reply);
        if (beam.empty()) throw EmptyBeamError(state_text.substr(0, 40));
        return detail::finalize_beam(std::move(beam), cfg.beam_width);
    }

    Continuation greedy_continuation(const std::string& state_text,
                                     const PolicyConfig& cfg) override {
        nlohmann::json body = {
            {"prompt", state_text},
            {"n", 1},
            {"max_tokens", cfg.max_fragment_tokens},
            {"temperature", 0.0},
            {"logprobs", 1},
        };
        std::vector<Continuation> beam = parse_choices(post(body));
        if (beam.empty()) throw EmptyBeamError(state_text.substr(0, 40));
        return beam.front();
    }

    double sequence_logprob(const std::string& context,
                            const std::string& full_sql) override {
        nlohmann::json body = {
            {"prompt", context + full_sql},
            {"max_tokens", 0},
            {"echo", true},
            {"logprobs", 1},
        };
        nlohmann::json reply = post(body);
        if (!reply.contains("choices") || reply["choices"].empty()) {
            throw UnscorableSequenceError("endpoint returned no choices");
        }
        const nlohmann::json& lp = reply["choices"][0].value("logprobs", nlohmann::json());
        if (!lp.contains("token_logprobs") || !lp.contains("text_offset")) {
            throw UnscorableSequenceError("endpoint returned no token likelihoods");
        }
        const nlohmann::json& probs = lp["token_logprobs"];
        const nlohmann::json& offsets = lp["text_offset"];
        double total = 0.0;
        bool any = false;
        for (std::size_t i = 0; i < probs.size() && i < offsets.size(); ++i) {
            if (probs[i].is_null()) continue;
            if (offsets[i].get<std::size_t>() < context.size()) continue;
            total += probs[i].get<double>();
            any = true;
        }
        if (!any) throw UnscorableSequenceError("no tokens fall inside the completion");
        return total;
    }

private:
    struct SemaphoreGuard {
        std::counting_semaphore<4096>& sem;
        explicit SemaphoreGuard(std::counting_semaphore<4096>& s) : sem(s) { sem.acquire(); }
        ~SemaphoreGuard() { sem.release(); }
    };

    void split_endpoint() {
        std::string url = cfg_.endpoint;
        std::size_t scheme = url.find("://");
        std::size_t path_start =
            scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
        if (path_start == std::string::npos) {
            base_ = url;
            path_ = "/v1/completions";
        } else {
            base_ = url.substr(0, path_start);
            path_ = url.substr(path_start);
        }
    }

    nlohmann::json post(const nlohmann::json& body) {
        SemaphoreGuard guard(*in_flight_);
        std::string payload = body.dump();
        std::string last_error = "no attempt made";
        int backoff = cfg_.initial_backoff_ms;
        for (int attempt = 0; attempt < cfg_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
                backoff *= 2;
            }
            httplib::Client client(base_);
            client.set_read_timeout(cfg_.read_timeout_sec, 0);
            client.set_connection_timeout(10, 0);
            httplib::Headers headers;
            if (!cfg_.api_key.empty()) {
                headers.emplace("Authorization", "Bearer " + cfg_.api_key);
            }
            httplib::Result res = client.Post(path_, headers, payload, "application/json");
            if (!res) {
                last_error = "connection failed: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "http status " + std::to_string(res->status);
                continue;
            }
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                last_error = std::string("bad json reply: ") + e.what();
            }
        }
        throw PolicyUnavailableError(last_error);
    }

    /// Converts completion choices into clipped continuations whose
    /// likelihood covers only the kept fragment text.
    std::vector<Continuation> parse_choices(const nlohmann::json& reply) const {
        std::vector<Continuation> beam;
        if (!reply.contains("choices")) return beam;
        for (const nlohmann::json& choice : reply["choices"]) {
            std::string text = choice.value("text", std::string());
            if (text.empty()) continue;
            ClippedFragment clipped = clip_continuation(text);
            // finish_reason applies to the end of the raw completion; once
            // the clip discards a tail, the kept fragment no longer ends
            // the statement unless it keeps a terminator of its own.
            bool ends = clipped.ends_sequence ||
                        (clipped.text.size() == text.size() &&
                         choice.value("finish_reason", std::string()) == "stop");

            std::vector<double> token_lps;
            double total = 0.0;
            if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
                choice["logprobs"].contains("token_logprobs")) {
                const nlohmann::json& probs = choice["logprobs"]["token_logprobs"];
                const nlohmann::json* offsets =
                    choice["logprobs"].contains("text_offset")
                        ? &choice["logprobs"]["text_offset"]
                        : nullptr;
                // text_offset may be absolute into prompt+completion;
                // the first entry marks where the completion starts.
                std::size_t base = 0;
                if (offsets && !offsets->empty() && (*offsets)[0].is_number()) {
                    base = (*offsets)[0].get<std::size_t>();
                }
                for (std::size_t i = 0; i < probs.size(); ++i) {
                    if (probs[i].is_null()) continue;
                    if (offsets && i < offsets->size() &&
                        (*offsets)[i].get<std::size_t>() - base >= clipped.text.size()) {
                        break;
                    }
                    token_lps.push_back(probs[i].get<double>());
                    total += probs[i].get<double>();
                }
            }
            try {
                beam.push_back(make_continuation(std::move(clipped.text),
                                                 std::move(token_lps), total, ends));
            } catch (const Error&) {
                // A malformed choice is dropped rather than failing the beam.
            }
        }
        return beam;
    }

    HttpPolicyConfig cfg_;
    std::string base_;
    std::string path_;
    std::unique_ptr<std::counting_semaphore<4096>> in_flight_;
};

} // namespace sqlo1
