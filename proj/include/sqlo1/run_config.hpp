#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "sqlo1/errors.hpp"
#include "sqlo1/evaluate.hpp"
#include "sqlo1/policy.hpp"
#include "sqlo1/pruning.hpp"
#include "sqlo1/search.hpp"

namespace sqlo1 {

/// Everything a run needs, merged from (lowest to highest precedence)
/// built-in defaults, a preset, a JSON config file, environment
/// variables, and command-line flags.
struct RunConfig {
    std::string preset;        // "", "spider" or "bird"
    std::string scripted_path; // table-driven policy file
    std::string endpoint;      // HTTP policy endpoint
    std::string api_key;
    std::string db_root = ".";
    int workers = 1;
    unsigned seed = 0;         // recorded for reproducibility of offline runs
    int timeout_ms = 30000;
    int samples_per_column = 3;

    PolicyConfig policy;
    SearchConfig search;
    PruningConfig pruning;

    bool t0_explicit = false; // once set, t0 no longer follows max_depth

    void apply_preset(const std::string& name) {
        if (name.empty()) return;
        if (name == "spider") {
            SearchConfig p = SearchConfig::spider_preset();
            search.n_rollouts = p.n_rollouts;
            search.max_depth = p.max_depth;
            search.exploration_weight = p.exploration_weight;
        } else if (name == "bird") {
            SearchConfig p = SearchConfig::bird_preset();
            search.n_rollouts = p.n_rollouts;
            search.max_depth = p.max_depth;
            search.exploration_weight = p.exploration_weight;
        } else {
            throw ConfigError("unknown preset: " + name);
        }
        preset = name;
    }

    void apply_json(const nlohmann::json& j) {
        if (j.contains("preset")) apply_preset(j.at("preset").get<std::string>());
        if (j.contains("scripted")) scripted_path = j.at("scripted").get<std::string>();
        if (j.contains("endpoint")) endpoint = j.at("endpoint").get<std::string>();
        if (j.contains("api_key")) api_key = j.at("api_key").get<std::string>();
        if (j.contains("db_root")) db_root = j.at("db_root").get<std::string>();
        if (j.contains("workers")) workers = j.at("workers").get<int>();
        if (j.contains("seed")) seed = j.at("seed").get<unsigned>();
        if (j.contains("timeout_ms")) timeout_ms = j.at("timeout_ms").get<int>();
        if (j.contains("samples_per_column")) {
            samples_per_column = j.at("samples_per_column").get<int>();
        }
        if (j.contains("policy")) {
            const nlohmann::json& p = j.at("policy");
            if (p.contains("alpha")) policy.alpha = p.at("alpha").get<double>();
            if (p.contains("beta")) policy.beta = p.at("beta").get<double>();
            if (p.contains("max_fragment_tokens")) {
                policy.max_fragment_tokens = p.at("max_fragment_tokens").get<int>();
            }
            if (p.contains("decode_temperature")) {
                policy.decode_temperature = p.at("decode_temperature").get<double>();
            }
        }
        if (j.contains("search")) {
            const nlohmann::json& s = j.at("search");
            if (s.contains("rollouts")) search.n_rollouts = s.at("rollouts").get<int>();
            if (s.contains("beam_width")) search.beam_width = s.at("beam_width").get<int>();
            if (s.contains("top_d")) search.top_d = s.at("top_d").get<int>();
            if (s.contains("max_depth")) search.max_depth = s.at("max_depth").get<int>();
            if (s.contains("exploration_weight")) {
                search.exploration_weight = s.at("exploration_weight").get<double>();
            }
            if (s.contains("delta")) search.delta = s.at("delta").get<double>();
            if (s.contains("similarity_threshold")) {
                search.similarity_threshold = s.at("similarity_threshold").get<double>();
            }
            if (s.contains("reward_mode")) {
                std::string mode = s.at("reward_mode").get<std::string>();
                if (mode == "oracle") search.reward_mode = RewardMode::Oracle;
                else if (mode == "blind") search.reward_mode = RewardMode::Blind;
                else throw ConfigError("unknown reward_mode: " + mode);
            }
            if (s.contains("early_stop")) search.early_stop = s.at("early_stop").get<bool>();
        }
        if (j.contains("pruning")) {
            const nlohmann::json& p = j.at("pruning");
            if (p.contains("lambda")) pruning.lambda = p.at("lambda").get<double>();
            if (p.contains("t0")) {
                pruning.t0 = p.at("t0").get<int>();
                t0_explicit = true;
            }
            if (p.contains("enabled")) pruning.enabled = p.at("enabled").get<bool>();
        }
    }

    void apply_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw FileNotFoundError(path);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("cannot parse config file " + path + ": " + e.what());
        }
        apply_json(doc);
    }

    void apply_env() {
        if (const char* v = std::getenv("SQLO1_ENDPOINT")) endpoint = v;
        if (const char* v = std::getenv("SQLO1_API_KEY")) api_key = v;
    }

    /// Resolves derived defaults and validates everything.
    void finalize() {
        if (!t0_explicit) pruning.t0 = std::max(1, search.max_depth / 2);
        policy.beam_width = search.beam_width;
        if (workers < 1) throw ConfigError("workers must be >= 1");
        if (timeout_ms < 1) throw ConfigError("timeout_ms must be >= 1");
        policy.validate();
        search.validate();
        pruning.validate();
    }

    InferenceOptions inference_options() const {
        InferenceOptions o;
        o.db_root = db_root;
        o.workers = workers;
        o.timeout_ms = timeout_ms;
        o.samples_per_column = samples_per_column;
        o.search = search;
        o.policy = policy;
        o.pruning = pruning;
        return o;
    }

    nlohmann::json to_json() const {
        return {
            {"preset", preset},
            {"scripted", scripted_path},
            {"endpoint", endpoint},
            {"api_key", api_key.empty() ? "" : "***"},
            {"db_root", db_root},
            {"workers", workers},
            {"seed", seed},
            {"timeout_ms", timeout_ms},
            {"samples_per_column", samples_per_column},
            {"policy",
             {{"alpha", policy.alpha},
              {"beta", policy.beta},
              {"max_fragment_tokens", policy.max_fragment_tokens},
              {"decode_temperature", policy.decode_temperature}}},
            {"search",
             {{"rollouts", search.n_rollouts},
              {"beam_width", search.beam_width},
              {"top_d", search.top_d},
              {"max_depth", search.max_depth},
              {"exploration_weight", search.exploration_weight},
              {"delta", search.delta},
              {"similarity_threshold", search.similarity_threshold},
              {"reward_mode", search.reward_mode == RewardMode::Oracle ? "oracle" : "blind"},
              {"early_stop", search.early_stop}}},
            {"pruning",
             {{"lambda", pruning.lambda},
              {"t0", pruning.t0},
              {"enabled", pruning.enabled}}},
        };
    }
};

} // namespace sqlo1
