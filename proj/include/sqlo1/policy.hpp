#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqlo1/errors.hpp"

namespace sqlo1 {

/// One candidate continuation of a decoding state.
struct Continuation {
    std::string text;
    std::vector<double> token_logprobs;
    double total_logprob = 0.0;
    bool ends_sequence = false;
};

/// Validates and builds a continuation. The total must be finite,
/// non-positive, and agree with the per-token sum to 1e-9.
inline Continuation make_continuation(std::string text, std::vector<double> token_logprobs,
                                      double total_logprob, bool ends_sequence) {
    if (!std::isfinite(total_logprob)) throw NonFiniteLogprobError();
    double sum = 0.0;
    for (double lp : token_logprobs) {
        if (!std::isfinite(lp)) throw NonFiniteLogprobError();
        sum += lp;
    }
    if (!token_logprobs.empty() && std::fabs(sum - total_logprob) > 1e-9) {
        throw Error("continuation total_logprob disagrees with its token sum");
    }
    if (total_logprob > 0.0) {
        throw Error("continuation total_logprob must be <= 0");
    }
    return {std::move(text), std::move(token_logprobs), total_logprob, ends_sequence};
}

struct PolicyConfig {
    double alpha = 0.6;             // reward slope on log-likelihood
    double beta = 100.0;            // reward offset
    int beam_width = 5;             // candidates requested per state
    int max_fragment_tokens = 64;   // generation cap per request
    double decode_temperature = 0.6;

    void validate() const {
        if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
        if (!(beta > 0.0) || !std::isfinite(beta)) {
            throw ConfigError("beta must be positive and finite");
        }
        if (beam_width < 1) throw ConfigError("beam_width must be >= 1");
        if (max_fragment_tokens < 1) throw ConfigError("max_fragment_tokens must be >= 1");
        if (!(decode_temperature > 0.0)) throw ConfigError("decode_temperature must be > 0");
    }
};

/// Self-reward of a piece of text with log-likelihood lp:
/// beta + alpha * lp. Rejects non-finite input.
inline double self_reward(double logprob, const PolicyConfig& cfg) {
    if (!std::isfinite(logprob)) throw NonFiniteLogprobError();
    return cfg.beta + cfg.alpha * logprob;
}

/// Generation backend. Implementations must be safe to call from
/// several threads at once.
class Policy {
public:
    virtual ~Policy() = default;

    /// Up to cfg.beam_width distinct continuations of the state,
    /// sorted by total_logprob descending. Throws EmptyBeamError when
    /// nothing can be generated.
    virtual std::vector<Continuation> beam_continuations(const std::string& state_text,
                                                         const PolicyConfig& cfg) = 0;

    /// The single most likely continuation.
    virtual Continuation greedy_continuation(const std::string& state_text,
                                             const PolicyConfig& cfg) {
        std::vector<Continuation> beam = beam_continuations(state_text, cfg);
        if (beam.empty()) throw EmptyBeamError(state_text.substr(0, 40));
        return beam.front();
    }

    /// Log-likelihood of full_sql as a completion of context.
    virtual double sequence_logprob(const std::string& context,
                                    const std::string& full_sql) = 0;
};

namespace detail {

/// Sorts by likelihood (stable), drops exact text duplicates, keeps
/// the first beam_width entries.
inline std::vector<Continuation> finalize_beam(std::vector<Continuation> beam,
                                               int beam_width) {
    std::stable_sort(beam.begin(), beam.end(),
                     [](const Continuation& a, const Continuation& b) {
                         return a.total_logprob > b.total_logprob;
                     });
    std::vector<Continuation> out;
    std::set<std::string> seen;
    for (Continuation& c : beam) {
        if (!seen.insert(c.text).second) continue;
        out.push_back(std::move(c));
        if (out.size() == static_cast<std::size_t>(beam_width)) break;
    }
    return out;
}

} // namespace detail

/// Deterministic table-driven policy used for tests and offline runs.
/// States are matched by the longest key that is a suffix of the
/// decoding state, so entries can be written against the SQL tail
/// without repeating the schema prompt.
class ScriptedPolicy : public Policy {
public:
    struct Entry {
        std::string text;
        double logprob = 0.0;
        bool ends_sequence = false;
    };

    void add_state(std::string key, std::vector<Entry> entries) {
        for (const Entry& e : entries) {
            if (!std::isfinite(e.logprob)) throw NonFiniteLogprobError();
            if (e.logprob > 0.0) {
                throw Error("scripted logprob must be <= 0 for state: " + key);
            }
        }
        for (auto& existing : states_) {
            if (existing.first == key) {
                existing.second = std::move(entries);
                return;
            }
        }
        states_.emplace_back(std::move(key), std::move(entries));
    }

    std::vector<Continuation> beam_continuations(const std::string& state_text,
                                                 const PolicyConfig& cfg) override {
        const std::vector<Entry>* entries = lookup(state_text);
        if (!entries || entries->empty()) {
            throw EmptyBeamError(tail_of(state_text));
        }
        std::vector<Continuation> beam;
        beam.reserve(entries->size());
        for (const Entry& e : *entries) {
            beam.push_back(make_continuation(e.text, {e.logprob}, e.logprob,
                                             e.ends_sequence));
        }
        return detail::finalize_beam(std::move(beam), cfg.beam_width);
    }

    /// Walks the script, greedily matching entries whose text prefixes
    /// what remains of full_sql, and sums their log-likelihoods.
    double sequence_logprob(const std::string& context,
                            const std::string& full_sql) override {
        std::string state = context;
        std::string_view remaining = full_sql;
        double total = 0.0;
        while (!remaining.empty()) {
            const std::vector<Entry>* entries = lookup(state);
            if (!entries) {
                throw UnscorableSequenceError("no scripted state matches: " +
                                              tail_of(state));
            }
            const Entry* best = nullptr;
            for (const Entry& e : *entries) {
                if (e.text.empty() || remaining.substr(0, e.text.size()) != e.text) continue;
                if (!best || e.text.size() > best->text.size()) best = &e;
            }
            if (!best) {
                throw UnscorableSequenceError("no entry continues the sequence at: " +
                                              std::string(remaining.substr(0, 40)));
            }
            total += best->logprob;
            state += best->text;
            remaining.remove_prefix(best->text.size());
        }
        return total;
    }

    nlohmann::json to_json() const {
        nlohmann::json states = nlohmann::json::array();
        for (const auto& [key, entries] : states_) {
            nlohmann::json cont = nlohmann::json::array();
            for (const Entry& e : entries) {
                cont.push_back({{"text", e.text},
                                {"logprob", e.logprob},
                                {"ends", e.ends_sequence}});
            }
            states.push_back({{"state", key}, {"continuations", cont}});
        }
        return {{"states", states}};
    }

    static ScriptedPolicy from_json(const nlohmann::json& j) {
        ScriptedPolicy p;
        if (!j.contains("states") || !j.at("states").is_array()) {
            throw Error("scripted policy file lacks a states array");
        }
        for (const nlohmann::json& s : j.at("states")) {
            try {
                std::vector<Entry> entries;
                for (const nlohmann::json& c : s.at("continuations")) {
                    Entry e;
                    e.text = c.at("text").get<std::string>();
                    e.logprob = c.at("logprob").get<double>();
                    e.ends_sequence = c.value("ends", false);
                    entries.push_back(std::move(e));
                }
                p.add_state(s.at("state").get<std::string>(), std::move(entries));
            } catch (const nlohmann::json::exception& e) {
                throw Error(std::string("scripted policy state is malformed "
                                        "(want state + continuations of "
                                        "text/logprob/ends): ") +
                            e.what());
            }
        }
        return p;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw Error("cannot write scripted policy: " + path);
        out << to_json().dump(2) << "\n";
    }

    static ScriptedPolicy load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw FileNotFoundError(path);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw Error("cannot parse scripted policy " + path + ": " + e.what());
        }
        return from_json(doc);
    }

    std::size_t state_count() const { return states_.size(); }

private:
    static std::string tail_of(const std::string& s) {
        return s.size() <= 60 ? s : "..." + s.substr(s.size() - 60);
    }

    const std::vector<Entry>* lookup(const std::string& state_text) const {
        const std::vector<Entry>* best = nullptr;
        std::size_t best_len = 0;
        bool found = false;
        for (const auto& [key, entries] : states_) {
            if (key.size() > state_text.size()) continue;
            if (state_text.compare(state_text.size() - key.size(), key.size(), key) != 0) {
                continue;
            }
            if (!found || key.size() > best_len) {
                best = &entries;
                best_len = key.size();
                found = true;
            }
        }
        return found ? best : nullptr;
    }

    std::vector<std::pair<std::string, std::vector<Entry>>> states_;
};

} // namespace sqlo1
