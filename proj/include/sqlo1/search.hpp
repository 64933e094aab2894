#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqlo1/errors.hpp"
#include "sqlo1/execution.hpp"
#include "sqlo1/fragmenter.hpp"
#include "sqlo1/policy.hpp"
#include "sqlo1/pruning.hpp"
#include "sqlo1/schema.hpp"
#include "sqlo1/tasks.hpp"

namespace sqlo1 {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct SearchConfig {
    int n_rollouts = 6;               // simulations per question
    int beam_width = 5;               // candidates requested per expansion
    int top_d = 3;                    // children kept per expansion
    int max_depth = 8;                // fragment steps per trajectory
    double exploration_weight = 0.7;  // UCT exploration coefficient
    double delta = 0.5;               // process share of the blended reward
    double similarity_threshold = 0.7;
    RewardMode reward_mode = RewardMode::Oracle;
    bool early_stop = true;           // stop once execution matches gold

    void validate() const {
        if (n_rollouts < 1) throw ConfigError("n_rollouts must be >= 1");
        if (beam_width < 1) throw ConfigError("beam_width must be >= 1");
        if (top_d < 1 || top_d > beam_width) {
            throw ConfigError("top_d must lie in [1, beam_width]");
        }
        if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
        if (!(exploration_weight >= 0.0)) {
            throw ConfigError("exploration_weight must be >= 0");
        }
        if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
        if (!(similarity_threshold >= 0.0 && similarity_threshold <= 1.0)) {
            throw ConfigError("similarity_threshold must lie in [0, 1]");
        }
    }

    static SearchConfig spider_preset() {
        SearchConfig c;
        c.n_rollouts = 6;
        c.max_depth = 8;
        c.exploration_weight = 0.7;
        return c;
    }

    static SearchConfig bird_preset() {
        SearchConfig c;
        c.n_rollouts = 8;
        c.max_depth = 12;
        c.exploration_weight = 0.8;
        return c;
    }
};

struct ExecutionEnv {
    std::string db_path;
    int timeout_ms = 30000;
};

// ---------------------------------------------------------------------------
// Tree
// ---------------------------------------------------------------------------

struct SearchNode {
    std::string state_text;        // full decoding state (prompt + SQL so far)
    std::string sql_so_far;        // concatenated fragments from the root
    std::string fragment;          // fragment that created this node
    double fragment_logprob = 0.0;
    double self_reward_value = 0.0;

    double q_value = 0.0;
    int visits = 0;
    int depth = 0;
    bool is_terminal = false;
    bool dead_end = false;         // expansion found nothing here

    SearchNode* parent = nullptr;
    std::vector<std::unique_ptr<SearchNode>> children;
};

struct SearchTree {
    std::unique_ptr<SearchNode> root;
    int nodes_created = 0;

    static SearchTree make(std::string root_state) {
        SearchTree t;
        t.root = std::make_unique<SearchNode>();
        t.root->state_text = std::move(root_state);
        t.nodes_created = 1;
        return t;
    }
};

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

/// UCT score of a visited child.
inline double uct_score(const SearchNode& parent, const SearchNode& child, double w) {
    double log_parent = std::log(static_cast<double>(std::max(parent.visits, 1)));
    return child.q_value + w * std::sqrt(log_parent) / static_cast<double>(child.visits);
}

/// Walks from the root to a leaf, at each level taking an unvisited
/// child if one exists (best self-reward first) and otherwise the
/// child with the highest UCT score. Ties fall back to the higher
/// fragment likelihood, then to insertion order. Returns every node on
/// the walk, root first.
inline std::vector<SearchNode*> select_path(SearchNode& root, const SearchConfig& cfg) {
    std::vector<SearchNode*> path;
    SearchNode* node = &root;
    path.push_back(node);
    while (!node->children.empty() && !node->is_terminal) {
        SearchNode* best = nullptr;
        bool best_unvisited = false;
        double best_key = 0.0;
        double best_lp = 0.0;
        for (const std::unique_ptr<SearchNode>& child : node->children) {
            bool unvisited = child->visits == 0;
            double key = unvisited ? child->self_reward_value
                                   : uct_score(*node, *child, cfg.exploration_weight);
            bool better;
            if (!best) {
                better = true;
            } else if (unvisited != best_unvisited) {
                better = unvisited;
            } else if (key != best_key) {
                better = key > best_key;
            } else if (child->fragment_logprob != best_lp) {
                better = child->fragment_logprob > best_lp;
            } else {
                better = false;
            }
            if (better) {
                best = child.get();
                best_unvisited = unvisited;
                best_key = key;
                best_lp = child->fragment_logprob;
            }
        }
        node = best;
        path.push_back(node);
    }
    return path;
}

// ---------------------------------------------------------------------------
// Expansion
// ---------------------------------------------------------------------------

struct ExpandStats {
    long considered = 0; // candidates entering the pruning step
    long pruned = 0;     // candidates the threshold removed
};

/// Expands a leaf: asks the policy for a beam, clips each candidate to
/// one fragment, drops near-duplicates by token-set similarity, prunes
/// by self-reward threshold, and keeps the top_d survivors as children
/// ordered best first. A node whose beam yields nothing is marked as a
/// dead end and gets no children.
inline std::vector<SearchNode*> expand_node(SearchNode& node, SearchTree& tree,
                                            Policy& policy, const SearchConfig& scfg,
                                            const PolicyConfig& pcfg,
                                            const PruningConfig& prcfg,
                                            ExpandStats* stats = nullptr) {
    struct Candidate {
        std::string fragment;
        double logprob;
        bool ends;
        std::set<std::string> tokens;
    };

    std::vector<Continuation> beam;
    try {
        PolicyConfig request = pcfg;
        request.beam_width = scfg.beam_width;
        beam = policy.beam_continuations(node.state_text, request);
    } catch (const EmptyBeamError&) {
        node.dead_end = true;
        return {};
    }

    std::vector<Candidate> candidates;
    for (const Continuation& c : beam) {
        ClippedFragment clipped = clip_continuation(c.text);
        bool only_space = clipped.text.find_first_not_of(" \t\r\n") == std::string::npos;
        if (clipped.text.empty() || only_space) continue;
        bool ends = c.ends_sequence || clipped.ends_sequence;
        candidates.push_back({clipped.text, c.total_logprob, ends,
                              fragment_token_set(clipped.text)});
    }

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                         return a.logprob > b.logprob;
                     });

    std::vector<Candidate> kept;
    for (Candidate& c : candidates) {
        bool duplicate = false;
        for (const Candidate& k : kept) {
            if (jaccard_similarity(c.tokens, k.tokens) >= scfg.similarity_threshold) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) kept.push_back(std::move(c));
    }

    if (kept.empty()) {
        node.dead_end = true;
        return {};
    }

    StepScores step;
    step.step = node.depth + 1;
    for (const Candidate& c : kept) {
        step.scores.push_back(self_reward(c.logprob, pcfg));
    }
    std::vector<std::size_t> retained = retained_indices(step, prcfg);
    if (stats) {
        stats->considered += static_cast<long>(kept.size());
        stats->pruned += static_cast<long>(kept.size() - retained.size());
    }
    if (retained.size() > static_cast<std::size_t>(scfg.top_d)) {
        retained.resize(static_cast<std::size_t>(scfg.top_d));
    }

    std::vector<SearchNode*> out;
    for (std::size_t idx : retained) {
        const Candidate& c = kept[idx];
        auto child = std::make_unique<SearchNode>();
        child->state_text = node.state_text + c.fragment;
        child->sql_so_far = node.sql_so_far + c.fragment;
        child->fragment = c.fragment;
        child->fragment_logprob = c.logprob;
        child->self_reward_value = step.scores[idx];
        child->q_value = step.scores[idx];
        child->depth = node.depth + 1;
        child->is_terminal = c.ends || is_complete_sql(child->sql_so_far);
        child->parent = &node;
        out.push_back(child.get());
        node.children.push_back(std::move(child));
        ++tree.nodes_created;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct RewardBreakdown {
    double process_reward = 0.0; // self-reward of the node's own fragment
    double global_reward = 0.0;  // self-reward of the whole query
    int exec_reward = 0;         // -1 failed, 0 empty or unknown, +1 match
    double blended_q = 0.0;

    static RewardBreakdown make(double process, double global, int exec, double delta) {
        RewardBreakdown r;
        r.process_reward = process;
        r.global_reward = global;
        r.exec_reward = exec;
        r.blended_q = delta * process + (1.0 - delta) * (global + exec);
        return r;
    }
};

struct SimulationResult {
    std::string final_sql;
    bool complete = false; // the trajectory reached a closed query or EOS
    int steps = 0;         // greedy fragments appended beyond the node
    RewardBreakdown reward;
};

namespace detail {

inline double accumulated_logprob(const SearchNode& node) {
    double total = 0.0;
    for (const SearchNode* n = &node; n; n = n->parent) total += n->fragment_logprob;
    return total;
}

} // namespace detail

/// Greedy rollout from a node to a finished query (or the depth cap),
/// then scores the trajectory: process reward from the node's own
/// fragment, global reward from the whole query's likelihood, and the
/// execution reward, blended by delta.
inline SimulationResult simulate(SearchNode& node, Policy& policy, const ExecutionEnv& env,
                                 const QueryTask& task, const SearchConfig& scfg,
                                 const PolicyConfig& pcfg) {
    std::string sql = node.sql_so_far;
    std::string state = node.state_text;
    int depth = node.depth;
    double extra_logprob = 0.0;
    int steps = 0;
    bool saw_end = node.is_terminal;

    if (!node.is_terminal && !node.dead_end) {
        while (depth < scfg.max_depth) {
            Continuation next;
            try {
                next = policy.greedy_continuation(state, pcfg);
            } catch (const EmptyBeamError&) {
                break;
            }
            ClippedFragment clipped = clip_continuation(next.text);
            if (clipped.text.empty() ||
                clipped.text.find_first_not_of(" \t\r\n") == std::string::npos) {
                break;
            }
            sql += clipped.text;
            state += clipped.text;
            extra_logprob += next.total_logprob;
            ++depth;
            ++steps;
            if (next.ends_sequence || clipped.ends_sequence || is_complete_sql(sql)) {
                saw_end = true;
                break;
            }
        }
    }

    double process = self_reward(node.fragment_logprob, pcfg);

    std::string context = node.state_text.substr(0, node.state_text.size() -
                                                        node.sql_so_far.size());
    double sequence_lp;
    try {
        sequence_lp = policy.sequence_logprob(context, sql);
    } catch (const UnscorableSequenceError&) {
        sequence_lp = detail::accumulated_logprob(node) + extra_logprob;
    }
    double global = self_reward(sequence_lp, pcfg);

    bool complete = saw_end || is_complete_sql(sql);
    // A trajectory that never closed its query cannot execute.
    int exec = complete ? execution_reward(env.db_path, sql, task.gold_sql,
                                           scfg.reward_mode, env.timeout_ms)
                        : -1;

    SimulationResult result;
    result.final_sql = sql;
    result.steps = steps;
    result.complete = complete;
    result.reward = RewardBreakdown::make(process, global, exec, scfg.delta);
    return result;
}

// ---------------------------------------------------------------------------
// Backpropagation
// ---------------------------------------------------------------------------

/// Writes a finished rollout back along its path. The leaf takes the
/// blended reward directly. Walking toward the root, each ancestor is
/// offered the mean of the (updated) rewards over the remaining path
/// and keeps the maximum of that and its current value, so a node
/// remembers its best rollout. Every node on the path gains a visit.
inline void backpropagate(std::span<SearchNode* const> path, double leaf_q) {
    if (path.empty()) return;
    SearchNode* leaf = path.back();
    leaf->q_value = leaf_q;

    double suffix_sum = leaf->q_value;
    int suffix_len = 1;
    for (std::size_t i = path.size() - 1; i-- > 0;) {
        SearchNode* node = path[i];
        double candidate = (node->q_value + suffix_sum) /
                           static_cast<double>(suffix_len + 1);
        node->q_value = std::max(node->q_value, candidate);
        suffix_sum += node->q_value;
        ++suffix_len;
    }
    for (SearchNode* node : path) ++node->visits;
}

// ---------------------------------------------------------------------------
// Full search
// ---------------------------------------------------------------------------

struct SearchStats {
    int nodes_created = 0;
    int rollouts_used = 0;
    double elapsed_ms = 0.0;
    bool early_stopped = false;
    bool fallback = false; // no rollout finished; greedy completion returned
    long candidates_considered = 0;
    long candidates_pruned = 0;
};

struct SearchResult {
    std::string final_sql;
    bool complete = false;
    RewardBreakdown reward;
    SearchStats stats;
};

/// Runs the full search for one task: N rollouts of select, expand,
/// simulate, backpropagate over the fragment tree, then returns the
/// completed trajectory with the highest blended reward. In oracle
/// mode the search stops as soon as a rollout matches gold. If no
/// rollout completes a query, the greedy completion from the root is
/// returned and flagged as a fallback.
inline SearchResult run_mcts(const QueryTask& task, const DatabaseSchema& schema,
                             Policy& policy, const ExecutionEnv& env,
                             const SearchConfig& scfg, const PolicyConfig& pcfg,
                             const PruningConfig& prcfg,
                             SearchTree* tree_out = nullptr) {
    scfg.validate();
    pcfg.validate();
    prcfg.validate();
    auto started = std::chrono::steady_clock::now();

    std::string context = serialize_context(schema, task.question, task.evidence);
    SearchTree tree = SearchTree::make(context);

    struct TrajectoryCandidate {
        std::string sql;
        RewardBreakdown reward;
    };
    std::vector<TrajectoryCandidate> finished;

    SearchStats stats;
    ExpandStats expand_stats;

    for (int rollout = 0; rollout < scfg.n_rollouts; ++rollout) {
        std::vector<SearchNode*> path = select_path(*tree.root, scfg);
        SearchNode* leaf = path.back();

        if (!leaf->is_terminal && !leaf->dead_end && leaf->depth < scfg.max_depth &&
            leaf->children.empty()) {
            std::vector<SearchNode*> kids =
                expand_node(*leaf, tree, policy, scfg, pcfg, prcfg, &expand_stats);
            if (!kids.empty()) path.push_back(kids.front());
        }

        SearchNode* frontier = path.back();
        SimulationResult sim = simulate(*frontier, policy, env, task, scfg, pcfg);
        backpropagate(path, sim.reward.blended_q);
        stats.rollouts_used = rollout + 1;

        if (sim.complete) finished.push_back({sim.final_sql, sim.reward});
        if (scfg.reward_mode == RewardMode::Oracle && scfg.early_stop &&
            sim.reward.exec_reward == 1) {
            stats.early_stopped = true;
            break;
        }
    }

    SearchResult result;
    if (!finished.empty()) {
        const TrajectoryCandidate* best = &finished.front();
        for (const TrajectoryCandidate& c : finished) {
            if (c.reward.blended_q > best->reward.blended_q ||
                (c.reward.blended_q == best->reward.blended_q &&
                 c.reward.global_reward > best->reward.global_reward)) {
                best = &c;
            }
        }
        result.final_sql = best->sql;
        result.reward = best->reward;
        result.complete = true;
    } else {
        SimulationResult sim = simulate(*tree.root, policy, env, task, scfg, pcfg);
        result.final_sql = sim.final_sql;
        result.reward = sim.reward;
        result.complete = sim.complete;
        stats.fallback = true;
    }

    stats.nodes_created = tree.nodes_created;
    stats.candidates_considered = expand_stats.considered;
    stats.candidates_pruned = expand_stats.pruned;
    stats.elapsed_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - started)
                           .count();
    result.stats = stats;
    if (tree_out) *tree_out = std::move(tree);
    return result;
}

// ---------------------------------------------------------------------------
// Per-task result record
// ---------------------------------------------------------------------------

struct TaskResult {
    std::string id;
    std::string db_id;
    std::string predicted_sql;
    double leaf_q = 0.0;
    int exec_reward = 0;
    int rollouts_used = 0;
    int nodes_created = 0;
    double elapsed_ms = 0.0;
    bool early_stopped = false;
    bool fallback = false;
    long candidates_considered = 0;
    long candidates_pruned = 0;
    std::string error; // non-empty when the task failed outright

    bool failed() const { return !error.empty(); }
};

inline void to_json(nlohmann::json& j, const TaskResult& r) {
    j = {{"id", r.id},
         {"db_id", r.db_id},
         {"predicted_sql", r.predicted_sql},
         {"leaf_q", r.leaf_q},
         {"exec_reward", r.exec_reward},
         {"rollouts_used", r.rollouts_used},
         {"nodes_created", r.nodes_created},
         {"elapsed_ms", r.elapsed_ms},
         {"early_stopped", r.early_stopped},
         {"fallback", r.fallback},
         {"candidates_considered", r.candidates_considered},
         {"candidates_pruned", r.candidates_pruned}};
    if (!r.error.empty()) j["error"] = r.error;
}

inline void from_json(const nlohmann::json& j, TaskResult& r) {
    r.id = detail::json_id(j.at("id"));
    r.db_id = j.value("db_id", std::string());
    r.predicted_sql = j.value("predicted_sql", std::string());
    r.leaf_q = j.value("leaf_q", 0.0);
    r.exec_reward = j.value("exec_reward", 0);
    r.rollouts_used = j.value("rollouts_used", 0);
    r.nodes_created = j.value("nodes_created", 0);
    r.elapsed_ms = j.value("elapsed_ms", 0.0);
    r.early_stopped = j.value("early_stopped", false);
    r.fallback = j.value("fallback", false);
    r.candidates_considered = j.value("candidates_considered", 0L);
    r.candidates_pruned = j.value("candidates_pruned", 0L);
    r.error = j.value("error", std::string());
}

} // namespace sqlo1
