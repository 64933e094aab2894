// sqlo1 — self-reward MCTS for text-to-SQL: schema inspection, corpus
// preparation, single-question search, batch inference and evaluation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <sqlo1/sqlo1.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitService = 2;
constexpr int kExitPartial = 3;

struct Flags {
    std::string config_file;
    std::string preset;
    std::string scripted;
    std::string endpoint;
    std::string api_key;
    std::string db_root;
    int workers = 0;
    unsigned seed = 0;
    int timeout_ms = 0;
    int samples = 0;

    double alpha = 0.0;
    double beta = 0.0;
    int max_fragment_tokens = 0;
    double temperature = 0.0;

    int rollouts = 0;
    int beam = 0;
    int top_d = 0;
    int max_depth = 0;
    double exploration_weight = 0.0;
    double delta = 0.0;
    double similarity = 0.0;

    double lambda = 0.0;
    int t0 = 0;
    bool no_prune = false;
    bool blind = false;
    bool no_early_stop = false;
};

/// Registers the shared flags on an app (or subcommand).
void add_common_flags(CLI::App& app, Flags& f) {
    app.add_option("--config", f.config_file, "JSON config file");
    app.add_option("--preset", f.preset, "parameter preset: spider or bird");
    app.add_option("--scripted", f.scripted, "table-driven policy JSON file");
    app.add_option("--endpoint", f.endpoint, "HTTP policy endpoint URL");
    app.add_option("--api-key", f.api_key, "bearer token for the policy endpoint");
    app.add_option("--db-root", f.db_root, "directory holding the SQLite databases");
    app.add_option("--workers", f.workers, "parallel task workers");
    app.add_option("--seed", f.seed,
                   "recorded run seed (searches are deterministic offline; remote "
                   "sampling temperature is outside its reach)");
    app.add_option("--timeout-ms", f.timeout_ms, "per-statement execution timeout");
    app.add_option("--samples", f.samples, "sample values per column in prompts");

    app.add_option("--alpha", f.alpha, "self-reward slope on log-likelihood");
    app.add_option("--beta", f.beta, "self-reward offset");
    app.add_option("--max-fragment-tokens", f.max_fragment_tokens,
                   "generation cap per fragment request");
    app.add_option("--temperature", f.temperature, "decode temperature for beams");

    app.add_option("--rollouts", f.rollouts, "search rollouts per question");
    app.add_option("--beam", f.beam, "beam width per expansion");
    app.add_option("--top-d", f.top_d, "children kept per expansion");
    app.add_option("--max-depth", f.max_depth, "fragment steps per trajectory");
    app.add_option("--exploration-weight", f.exploration_weight,
                   "UCT exploration coefficient");
    app.add_option("--delta", f.delta, "process share of the blended reward");
    app.add_option("--similarity", f.similarity, "near-duplicate Jaccard threshold");

    app.add_option("--lambda", f.lambda, "soft-phase pruning strength");
    app.add_option("--t0", f.t0, "last soft-phase step (default max_depth/2)");
    app.add_flag("--no-prune", f.no_prune, "disable candidate pruning");
    app.add_flag("--blind", f.blind, "score without gold (execution reward <= 0)");
    app.add_flag("--no-early-stop", f.no_early_stop, "always use every rollout");
}

/// Merges defaults, config file, environment and explicit flags, in
/// that precedence order (flags win).
sqlo1::RunConfig build_config(const CLI::App& app, const Flags& f) {
    sqlo1::RunConfig cfg;
    if (!f.config_file.empty()) cfg.apply_file(f.config_file);
    cfg.apply_env();

    auto passed = [&](const std::string& name) { return app.count(name) > 0; };
    if (passed("--preset")) cfg.apply_preset(f.preset);
    if (passed("--scripted")) cfg.scripted_path = f.scripted;
    if (passed("--endpoint")) cfg.endpoint = f.endpoint;
    if (passed("--api-key")) cfg.api_key = f.api_key;
    if (passed("--db-root")) cfg.db_root = f.db_root;
    if (passed("--workers")) cfg.workers = f.workers;
    if (passed("--seed")) cfg.seed = f.seed;
    if (passed("--timeout-ms")) cfg.timeout_ms = f.timeout_ms;
    if (passed("--samples")) cfg.samples_per_column = f.samples;

    if (passed("--alpha")) cfg.policy.alpha = f.alpha;
    if (passed("--beta")) cfg.policy.beta = f.beta;
    if (passed("--max-fragment-tokens")) {
        cfg.policy.max_fragment_tokens = f.max_fragment_tokens;
    }
    if (passed("--temperature")) cfg.policy.decode_temperature = f.temperature;

    if (passed("--rollouts")) cfg.search.n_rollouts = f.rollouts;
    if (passed("--beam")) cfg.search.beam_width = f.beam;
    if (passed("--top-d")) cfg.search.top_d = f.top_d;
    if (passed("--max-depth")) cfg.search.max_depth = f.max_depth;
    if (passed("--exploration-weight")) {
        cfg.search.exploration_weight = f.exploration_weight;
    }
    if (passed("--delta")) cfg.search.delta = f.delta;
    if (passed("--similarity")) cfg.search.similarity_threshold = f.similarity;
    if (passed("--blind")) cfg.search.reward_mode = sqlo1::RewardMode::Blind;
    if (passed("--no-early-stop")) cfg.search.early_stop = false;

    if (passed("--lambda")) cfg.pruning.lambda = f.lambda;
    if (passed("--t0")) {
        cfg.pruning.t0 = f.t0;
        cfg.t0_explicit = true;
    }
    if (passed("--no-prune")) cfg.pruning.enabled = false;

    cfg.finalize();
    return cfg;
}

std::unique_ptr<sqlo1::Policy> make_policy(const sqlo1::RunConfig& cfg) {
    if (!cfg.scripted_path.empty()) {
        return std::make_unique<sqlo1::ScriptedPolicy>(
            sqlo1::ScriptedPolicy::load(cfg.scripted_path));
    }
    if (!cfg.endpoint.empty()) {
        sqlo1::HttpPolicyConfig hc;
        hc.endpoint = cfg.endpoint;
        hc.api_key = cfg.api_key;
        hc.max_in_flight = std::max(1, cfg.workers);
        return std::make_unique<sqlo1::HttpPolicy>(hc);
    }
    throw sqlo1::ConfigError(
        "no policy configured: pass --scripted <file> or set an endpoint "
        "(--endpoint / SQLO1_ENDPOINT)");
}

std::vector<double> parse_lambdas(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw sqlo1::ConfigError("bad lambda value: " + item);
        }
    }
    if (out.empty()) throw sqlo1::ConfigError("no lambda values given");
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sqlo1::Error("cannot write " + path);
    out << text;
}

int cmd_introspect(const sqlo1::RunConfig& cfg, const std::string& db_path) {
    sqlo1::DatabaseSchema schema =
        sqlo1::introspect_schema(db_path, cfg.samples_per_column);
    nlohmann::json j = schema;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_search(const sqlo1::RunConfig& cfg, const std::string& question,
               const std::string& db_path, const std::string& evidence,
               bool json_stats) {
    std::unique_ptr<sqlo1::Policy> policy = make_policy(cfg);
    sqlo1::DatabaseSchema schema =
        sqlo1::introspect_schema(db_path, cfg.samples_per_column);

    sqlo1::QueryTask task;
    task.id = "cli";
    task.question = question;
    task.db_id = schema.db_id;
    if (!evidence.empty()) task.evidence = evidence;
    sqlo1::SearchConfig scfg = cfg.search;
    if (!task.gold_sql) scfg.reward_mode = sqlo1::RewardMode::Blind;

    sqlo1::ExecutionEnv env{db_path, cfg.timeout_ms};
    sqlo1::SearchResult result = sqlo1::run_mcts(task, schema, *policy, env, scfg,
                                                 cfg.policy, cfg.pruning);

    std::cout << result.final_sql << "\n";
    if (json_stats) {
        nlohmann::json stats = {{"leaf_q", result.reward.blended_q},
                                {"exec_reward", result.reward.exec_reward},
                                {"rollouts_used", result.stats.rollouts_used},
                                {"nodes_created", result.stats.nodes_created},
                                {"elapsed_ms", result.stats.elapsed_ms},
                                {"early_stopped", result.stats.early_stopped},
                                {"fallback", result.stats.fallback}};
        std::cerr << stats.dump() << "\n";
    } else {
        std::fprintf(stderr,
                     "rollouts=%d nodes=%d leaf_q=%.4f exec=%d early_stop=%s%s\n",
                     result.stats.rollouts_used, result.stats.nodes_created,
                     result.reward.blended_q, result.reward.exec_reward,
                     result.stats.early_stopped ? "yes" : "no",
                     result.stats.fallback ? " (fallback)" : "");
    }
    return kExitOk;
}

int cmd_batch(const sqlo1::RunConfig& cfg, const std::string& tasks_file,
              const std::string& out_file) {
    std::vector<sqlo1::QueryTask> tasks = sqlo1::load_tasks(tasks_file);
    std::unique_ptr<sqlo1::Policy> policy = make_policy(cfg);
    std::vector<sqlo1::TaskResult> results =
        sqlo1::run_inference(tasks, *policy, cfg.inference_options());

    nlohmann::json j = results;
    write_text(out_file, j.dump(2) + "\n");

    int failed = 0;
    for (const sqlo1::TaskResult& r : results) {
        if (r.failed()) ++failed;
    }
    std::fprintf(stderr, "wrote %zu records to %s (%d failed)\n", results.size(),
                 out_file.c_str(), failed);
    return failed > 0 ? kExitPartial : kExitOk;
}

int cmd_eval(const sqlo1::RunConfig& cfg, const std::string& tasks_file,
             const std::string& predictions_file, const std::string& report_file) {
    std::vector<sqlo1::QueryTask> tasks = sqlo1::load_tasks(tasks_file);

    std::ifstream in(predictions_file);
    if (!in) throw sqlo1::FileNotFoundError(predictions_file);
    nlohmann::json doc;
    in >> doc;
    std::vector<sqlo1::TaskResult> results;
    for (const nlohmann::json& rec : doc) {
        results.push_back(rec.get<sqlo1::TaskResult>());
    }

    sqlo1::EvalReport report = sqlo1::score_ex(tasks, results, cfg.db_root,
                                               cfg.timeout_ms);
    double known_ms = 0.0;
    for (const sqlo1::TaskResult& r : results) known_ms += r.elapsed_ms;
    report.wall_time_sec = known_ms / 1000.0;
    if (report.wall_time_sec > 0.0) {
        report.throughput_per_min = report.total / (report.wall_time_sec / 60.0);
    }

    std::printf("EX: %.4f (%d/%d correct, %d errors)\n", report.ex, report.ex_correct,
                report.total, report.errors);
    if (!report_file.empty()) {
        nlohmann::json j = report;
        write_text(report_file, j.dump(2) + "\n");
    }
    return kExitOk;
}

int cmd_prepare(const sqlo1::RunConfig& cfg, const std::string& tasks_file,
                const std::string& predictions_file, const std::string& out_dir,
                bool all_failures, int splits_per_query, double psg_ratio) {
    namespace fs = std::filesystem;
    std::vector<sqlo1::QueryTask> tasks = sqlo1::load_tasks(tasks_file);
    fs::create_directories(out_dir);

    sqlo1::PrepOptions opts;
    opts.samples_per_column = cfg.samples_per_column;
    opts.splits_per_query = splits_per_query;
    opts.psg_ratio = psg_ratio;
    opts.timeout_ms = cfg.timeout_ms;
    opts.validate();

    sqlo1::PrepNotes notes;
    std::vector<sqlo1::SftRecord> sft =
        sqlo1::build_sft_corpus(tasks, cfg.db_root, opts, &notes);

    std::vector<sqlo1::QueryTask> failures;
    if (all_failures) {
        failures = tasks;
    } else if (!predictions_file.empty()) {
        std::ifstream in(predictions_file);
        if (!in) throw sqlo1::FileNotFoundError(predictions_file);
        nlohmann::json doc;
        in >> doc;
        std::vector<sqlo1::TaskResult> results;
        for (const nlohmann::json& rec : doc) {
            results.push_back(rec.get<sqlo1::TaskResult>());
        }
        failures = sqlo1::collect_failures(tasks, results, cfg.db_root, opts, &notes);
    }
    std::vector<sqlo1::PsgRecord> psg =
        sqlo1::build_psg_corpus(failures, cfg.db_root, opts, &notes);

    std::vector<nlohmann::json> sft_lines;
    for (const sqlo1::SftRecord& r : sft) sft_lines.push_back(sqlo1::sft_record_json(r));
    std::vector<nlohmann::json> psg_lines;
    for (const sqlo1::PsgRecord& r : psg) psg_lines.push_back(sqlo1::psg_record_json(r));
    std::vector<nlohmann::json> mixed = sqlo1::mix_corpora(sft, psg, opts.psg_ratio);

    sqlo1::write_jsonl((fs::path(out_dir) / "sft.jsonl").string(), sft_lines);
    sqlo1::write_jsonl((fs::path(out_dir) / "psg.jsonl").string(), psg_lines);
    sqlo1::write_jsonl((fs::path(out_dir) / "combined.jsonl").string(), mixed);

    std::printf("sft: %zu records\npsg: %zu records\ncombined: %zu records\n",
                sft_lines.size(), psg_lines.size(), mixed.size());
    for (const std::string& note : notes.skipped) {
        std::fprintf(stderr, "skipped %s\n", note.c_str());
    }
    return kExitOk;
}

int cmd_sweep(const sqlo1::RunConfig& cfg, const std::string& tasks_file,
              const std::string& lambdas_csv, const std::string& out_file) {
    std::vector<sqlo1::QueryTask> tasks = sqlo1::load_tasks(tasks_file);
    std::unique_ptr<sqlo1::Policy> policy = make_policy(cfg);
    std::vector<double> lambdas = parse_lambdas(lambdas_csv);

    std::vector<sqlo1::SweepPoint> points =
        sqlo1::run_lambda_sweep(tasks, *policy, cfg.inference_options(), lambdas);

    std::printf("%8s %8s %12s %10s %12s\n", "lambda", "ex", "mean_ms", "nodes",
                "prune_rate");
    for (const sqlo1::SweepPoint& p : points) {
        std::printf("%8.2f %8.4f %12.2f %10ld %12.4f\n", p.lambda, p.ex,
                    p.mean_elapsed_ms, p.nodes_created, p.prune_rate);
    }
    if (!out_file.empty()) {
        nlohmann::json j = points;
        write_text(out_file, j.dump(2) + "\n");
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-reward MCTS for text-to-SQL"};
    app.require_subcommand(1);
    Flags flags;
    add_common_flags(app, flags);

    std::string db_path;
    CLI::App* introspect = app.add_subcommand("introspect", "print a database schema");
    introspect->add_option("db", db_path, "SQLite database file")->required();

    std::string question;
    std::string search_db;
    std::string evidence;
    bool json_stats = false;
    CLI::App* search = app.add_subcommand("search", "answer one question with MCTS");
    search->add_option("--question,-q", question, "natural-language question")
        ->required();
    search->add_option("--db", search_db, "SQLite database file")->required();
    search->add_option("--evidence", evidence, "extra grounding text");
    search->add_flag("--json", json_stats, "machine-readable stats on stderr");

    std::string tasks_file;
    std::string out_file = "predictions.json";
    CLI::App* batch = app.add_subcommand("batch", "run inference over a task file");
    batch->add_option("--tasks", tasks_file, "task JSON file")->required();
    batch->add_option("--out", out_file, "predictions output file");

    std::string eval_tasks;
    std::string predictions_file;
    std::string report_file;
    CLI::App* eval = app.add_subcommand("eval", "score predictions by execution");
    eval->add_option("--tasks", eval_tasks, "task JSON file")->required();
    eval->add_option("--predictions", predictions_file, "predictions JSON file")
        ->required();
    eval->add_option("--report", report_file, "write the full report as JSON");

    std::string prep_tasks;
    std::string prep_predictions;
    std::string out_dir = "corpus";
    bool all_failures = false;
    int splits_per_query = 3;
    double psg_ratio = 0.227;
    CLI::App* prepare = app.add_subcommand("prepare", "build tuning corpora");
    prepare->add_option("--tasks", prep_tasks, "task JSON file")->required();
    prepare->add_option("--predictions", prep_predictions,
                        "predictions used to collect failures");
    prepare->add_option("--out-dir", out_dir, "output directory");
    prepare->add_flag("--all-failures", all_failures,
                      "treat every task as a failure (no predictions needed)");
    prepare->add_option("--splits-per-query", splits_per_query,
                        "progressive records kept per failed query");
    prepare->add_option("--psg-ratio", psg_ratio,
                        "progressive share of the combined corpus");

    std::string sweep_tasks;
    std::string lambdas_csv = "1.0,0.9,0.8,0.0";
    std::string sweep_out;
    CLI::App* sweep = app.add_subcommand("sweep", "rerun at several pruning strengths");
    sweep->add_option("--tasks", sweep_tasks, "task JSON file")->required();
    sweep->add_option("--lambdas", lambdas_csv, "comma-separated lambda values");
    sweep->add_option("--out", sweep_out, "write sweep points as JSON");

    CLI::App* config = app.add_subcommand("config", "print the merged configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        sqlo1::RunConfig cfg = build_config(app, flags);
        if (introspect->parsed()) return cmd_introspect(cfg, db_path);
        if (search->parsed()) {
            return cmd_search(cfg, question, search_db, evidence, json_stats);
        }
        if (batch->parsed()) return cmd_batch(cfg, tasks_file, out_file);
        if (eval->parsed()) return cmd_eval(cfg, eval_tasks, predictions_file, report_file);
        if (prepare->parsed()) {
            return cmd_prepare(cfg, prep_tasks, prep_predictions, out_dir, all_failures,
                               splits_per_query, psg_ratio);
        }
        if (sweep->parsed()) return cmd_sweep(cfg, sweep_tasks, lambdas_csv, sweep_out);
        if (config->parsed()) {
            std::cout << cfg.to_json().dump(2) << "\n";
            return kExitOk;
        }
        return kExitConfig;
    } catch (const sqlo1::PolicyUnavailableError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitService;
    } catch (const sqlo1::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
}
