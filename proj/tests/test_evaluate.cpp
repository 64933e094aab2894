#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <sqlo1/evaluate.hpp>

#include "test_util.hpp"

using namespace sqlo1;

namespace {

struct EvalFixture {
    testutil::TempDir dir;
    std::string db_root;
    std::vector<QueryTask> tasks;
    ScriptedPolicy policy;
    InferenceOptions opts;

    EvalFixture() : db_root(dir.path.string()), tasks(testutil::concerts_tasks()) {
        testutil::build_concerts_db(dir.file("concerts.sqlite"));
        policy = testutil::concerts_policy();
        opts.db_root = db_root;
        opts.timeout_ms = 5000;
        opts.search = SearchConfig::spider_preset();
    }
};

TaskResult prediction(const std::string& id, const std::string& sql) {
    TaskResult r;
    r.id = id;
    r.db_id = "concerts";
    r.predicted_sql = sql;
    return r;
}

} // namespace

TEST_CASE("inference runs every task in order and solves the fixture") {
    EvalFixture f;
    std::vector<TaskResult> results = run_inference(f.tasks, f.policy, f.opts);

    REQUIRE(results.size() == f.tasks.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        CHECK(results[i].id == f.tasks[i].id);
        CHECK(!results[i].failed());
        CHECK(results[i].predicted_sql == *f.tasks[i].gold_sql);
        CHECK(results[i].exec_reward == 1);
        CHECK(results[i].nodes_created > 0);
        CHECK(results[i].elapsed_ms >= 0.0);
    }

    EvalReport report = score_ex(f.tasks, results, f.db_root);
    CHECK(report.total == 10);
    CHECK(report.ex_correct == 10);
    CHECK(report.ex == Catch::Approx(1.0));
    CHECK(report.errors == 0);
    REQUIRE(report.per_task.size() == 10);
    for (const EvalReport::PerTask& t : report.per_task) CHECK(t.correct);
}

TEST_CASE("worker count never changes the predictions") {
    EvalFixture f;
    std::vector<TaskResult> serial = run_inference(f.tasks, f.policy, f.opts);

    InferenceOptions parallel_opts = f.opts;
    parallel_opts.workers = 4;
    std::vector<TaskResult> parallel = run_inference(f.tasks, f.policy, parallel_opts);

    REQUIRE(serial.size() == parallel.size());
    std::multiset<std::string> serial_sql, parallel_sql;
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].id == parallel[i].id);
        CHECK(serial[i].predicted_sql == parallel[i].predicted_sql);
        serial_sql.insert(serial[i].predicted_sql);
        parallel_sql.insert(parallel[i].predicted_sql);
    }
    CHECK(serial_sql == parallel_sql);

    EvalReport a = score_ex(f.tasks, serial, f.db_root);
    EvalReport b = score_ex(f.tasks, parallel, f.db_root);
    CHECK(a.ex == Catch::Approx(b.ex));
}

TEST_CASE("a task with a missing database becomes an error record") {
    EvalFixture f;
    QueryTask lost;
    lost.id = "lost";
    lost.question = "q";
    lost.db_id = "atlantis";
    lost.gold_sql = "SELECT 1;";
    std::vector<QueryTask> tasks{f.tasks[0], lost};

    std::vector<TaskResult> results = run_inference(tasks, f.policy, f.opts);
    REQUIRE(results.size() == 2);
    CHECK(!results[0].failed());
    CHECK(results[1].failed());
    CHECK(results[1].error.find("database not found") != std::string::npos);

    EvalReport report = score_ex(tasks, results, f.db_root);
    CHECK(report.total == 2);
    CHECK(report.ex_correct == 1);
    CHECK(report.errors == 1);
    CHECK(report.ex == Catch::Approx(0.5));
}

TEST_CASE("empty task lists are fine") {
    EvalFixture f;
    CHECK(run_inference({}, f.policy, f.opts).empty());
    EvalReport report = score_ex({}, {}, f.db_root);
    CHECK(report.total == 0);
    CHECK(report.ex == Catch::Approx(0.0));
}

TEST_CASE("inference options validate") {
    EvalFixture f;
    InferenceOptions bad = f.opts;
    bad.workers = 0;
    CHECK_THROWS_AS(run_inference(f.tasks, f.policy, bad), ConfigError);
}

TEST_CASE("scoring is order sensitive only when gold orders its output") {
    EvalFixture f;

    QueryTask ordered;
    ordered.id = "ord";
    ordered.question = "q";
    ordered.db_id = "concerts";
    ordered.gold_sql = "SELECT name FROM stadium ORDER BY capacity ASC;";
    QueryTask unordered;
    unordered.id = "bag";
    unordered.question = "q";
    unordered.db_id = "concerts";
    unordered.gold_sql = "SELECT name FROM stadium;";
    std::vector<QueryTask> tasks{ordered, unordered};

    std::vector<TaskResult> results;
    results.push_back(prediction("ord", "SELECT name FROM stadium ORDER BY capacity DESC;"));
    results.push_back(prediction("bag", "SELECT name FROM stadium ORDER BY capacity DESC;"));

    EvalReport report = score_ex(tasks, results, f.db_root);
    REQUIRE(report.per_task.size() == 2);
    CHECK(!report.per_task[0].correct); // reversed order against ordered gold
    CHECK(report.per_task[1].correct);  // same bag against unordered gold
    CHECK(report.ex == Catch::Approx(0.5));
}

TEST_CASE("scoring counts unexecutable predictions as errors") {
    EvalFixture f;
    std::vector<QueryTask> tasks{f.tasks[0], f.tasks[1], f.tasks[2]};
    std::vector<TaskResult> results;
    results.push_back(prediction("e01", "SELECT name FROM stadium;"));
    results.push_back(prediction("e02", "SELECT broken FROM nowhere;"));
    TaskResult errored = prediction("e03", "");
    errored.error = "policy unavailable";
    results.push_back(errored);

    EvalReport report = score_ex(tasks, results, f.db_root);
    CHECK(report.total == 3);
    CHECK(report.ex_correct == 1);
    CHECK(report.errors == 2);
    CHECK(report.ex == Catch::Approx(0.3333));
    CHECK(report.per_task[1].note.find("fails to execute") != std::string::npos);
    CHECK(report.per_task[2].note == "policy unavailable");
}

TEST_CASE("scoring validates ids and gold presence") {
    EvalFixture f;
    std::vector<TaskResult> unknown{prediction("zzz", "SELECT 1;")};
    CHECK_THROWS_AS(score_ex(f.tasks, unknown, f.db_root), UnknownTaskIdError);

    QueryTask no_gold;
    no_gold.id = "ng";
    no_gold.question = "q";
    no_gold.db_id = "concerts";
    std::vector<QueryTask> tasks{no_gold};
    std::vector<TaskResult> results{prediction("ng", "SELECT 1;")};
    CHECK_THROWS_AS(score_ex(tasks, results, f.db_root), MissingGoldError);
}

TEST_CASE("report serialization keeps the reserved timestamp slot") {
    EvalReport r;
    r.total = 2;
    r.ex_correct = 1;
    r.ex = 0.5;
    r.wall_time_sec = 1.25;
    r.throughput_per_min = 96.0;
    r.per_task.push_back({"a", true, ""});
    r.per_task.push_back({"b", false, "bad"});

    nlohmann::json j = r;
    CHECK(j.at("total") == 2);
    CHECK(j.at("ex") == Catch::Approx(0.5));
    CHECK(j.at("ts").is_null());
    REQUIRE(j.at("per_task").size() == 2);
    CHECK(j.at("per_task")[0] == nlohmann::json({{"id", "a"}, {"correct", true}}));
    CHECK(j.at("per_task")[1].at("note") == "bad");
}

TEST_CASE("lambda sweep reports accuracy and pruning pressure per strength") {
    EvalFixture f;
    std::vector<double> lambdas{1.0, 0.9, 0.0};
    std::vector<SweepPoint> points = run_lambda_sweep(f.tasks, f.policy, f.opts, lambdas);

    REQUIRE(points.size() == 3);
    CHECK(points[0].lambda == Catch::Approx(1.0));
    CHECK(points[1].lambda == Catch::Approx(0.9));
    CHECK(points[2].lambda == Catch::Approx(0.0));

    // The harshest cut prunes the gold branch out of the adversarial
    // tasks; softer cuts keep every task solvable.
    CHECK(points[0].ex == Catch::Approx(0.8));
    CHECK(points[1].ex == Catch::Approx(1.0));
    CHECK(points[2].ex == Catch::Approx(1.0));

    // No pruning means no candidate ever drops, and the tree can only
    // grow relative to the harshest setting.
    CHECK(points[2].candidates_pruned == 0);
    CHECK(points[2].prune_rate == Catch::Approx(0.0));
    CHECK(points[0].candidates_pruned > 0);
    CHECK(points[0].prune_rate > 0.0);
    CHECK(points[2].nodes_created >= points[0].nodes_created);

    for (const SweepPoint& p : points) {
        CHECK(p.candidates_considered > 0);
        CHECK(p.mean_elapsed_ms >= 0.0);
    }

    // The sweep leaves the caller's options untouched.
    CHECK(f.opts.search.early_stop);
    CHECK(f.opts.pruning.lambda == Catch::Approx(0.9));
}

TEST_CASE("sweep points serialize for the report file") {
    SweepPoint p;
    p.lambda = 0.9;
    p.ex = 0.75;
    p.nodes_created = 42;
    p.candidates_considered = 20;
    p.candidates_pruned = 5;
    p.prune_rate = 0.25;
    nlohmann::json j = p;
    CHECK(j.at("lambda") == Catch::Approx(0.9));
    CHECK(j.at("ex") == Catch::Approx(0.75));
    CHECK(j.at("nodes_created") == 42);
    CHECK(j.at("prune_rate") == Catch::Approx(0.25));
}
