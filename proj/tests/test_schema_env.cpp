#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include <sqlo1/execution.hpp>
#include <sqlo1/schema.hpp>
#include <sqlo1/tasks.hpp>

#include "test_util.hpp"

using namespace sqlo1;

namespace {

struct Db {
    testutil::TempDir dir;
    std::string path;
    Db() : path(dir.file("concerts.sqlite")) { testutil::build_concerts_db(path); }
};

} // namespace

TEST_CASE("introspection reads tables columns keys and samples") {
    Db db;
    DatabaseSchema schema = introspect_schema(db.path, 3);

    CHECK(schema.db_id == "concerts");
    REQUIRE(schema.tables.size() == 3);
    // Tables arrive sorted by name.
    CHECK(schema.tables[0].name == "concert");
    CHECK(schema.tables[1].name == "singer");
    CHECK(schema.tables[2].name == "stadium");

    const TableDef* stadium = schema.find_table("STADIUM"); // case-insensitive
    REQUIRE(stadium != nullptr);
    REQUIRE(stadium->columns.size() == 4);
    CHECK(stadium->columns[0].name == "stadium_id");
    CHECK(stadium->columns[0].type == ColumnType::Number);
    CHECK(stadium->columns[1].name == "name");
    CHECK(stadium->columns[1].type == ColumnType::Text);
    REQUIRE(stadium->primary_key.size() == 1);
    CHECK(stadium->primary_key[0] == "stadium_id");

    // Samples follow primary-key row order and are rendered as literals.
    REQUIRE(stadium->columns[1].sample_values.size() == 3);
    CHECK(stadium->columns[1].sample_values[0] == "'North Arena'");
    CHECK(stadium->columns[1].sample_values[1] == "'River Park'");
    CHECK(stadium->columns[1].sample_values[2] == "'Sunset Field'");
    CHECK(stadium->columns[3].sample_values[0] == "52000");

    const TableDef* concert = schema.find_table("concert");
    REQUIRE(concert != nullptr);
    REQUIRE(concert->foreign_keys.size() == 1);
    CHECK(concert->foreign_keys[0].column == "stadium_id");
    CHECK(concert->foreign_keys[0].ref_table == "stadium");
    CHECK(concert->foreign_keys[0].ref_column == "stadium_id");
}

TEST_CASE("introspection respects the sample budget") {
    Db db;
    DatabaseSchema none = introspect_schema(db.path, 0);
    for (const TableDef& t : none.tables) {
        for (const ColumnDef& c : t.columns) CHECK(c.sample_values.empty());
    }
    DatabaseSchema one = introspect_schema(db.path, 1);
    const TableDef* stadium = one.find_table("stadium");
    REQUIRE(stadium != nullptr);
    CHECK(stadium->columns[1].sample_values == std::vector<std::string>{"'North Arena'"});
}

TEST_CASE("introspection failure modes") {
    CHECK_THROWS_AS(introspect_schema("/nonexistent/nope.sqlite"), FileNotFoundError);

    testutil::TempDir dir;
    std::string bogus = dir.file("not_a_db.sqlite");
    testutil::write_file(bogus, "this is just text, long enough to not be empty....");
    CHECK_THROWS_AS(introspect_schema(bogus), NotADatabaseError);
}

TEST_CASE("context serialization layout is stable") {
    DatabaseSchema schema;
    schema.db_id = "mini";
    TableDef t;
    t.name = "users";
    t.columns = {{"id", ColumnType::Number, {"1", "2"}},
                 {"name", ColumnType::Text, {"'Ann'"}}};
    t.primary_key = {"id"};
    schema.tables.push_back(t);

    std::string expected =
        "-- Database: mini\n"
        "CREATE TABLE users (\n"
        "  id NUMBER,\n"
        "  name TEXT,\n"
        "  PRIMARY KEY (id)\n"
        ");\n"
        "-- users.id examples: 1 2\n"
        "-- users.name examples: 'Ann'\n"
        "\n"
        "-- Question: How many users are there?\n"
        "-- SQL:\n";
    CHECK(serialize_context(schema, "How many users are there?") == expected);

    // Evidence slots in above the question; absent evidence leaves no trace.
    std::string with_evidence = serialize_context(schema, "Q?", std::string("ids are small"));
    CHECK(with_evidence.find("-- Evidence: ids are small\n-- Question: Q?\n") !=
          std::string::npos);
    CHECK(serialize_context(schema, "Q?").find("Evidence") == std::string::npos);
    CHECK(serialize_context(schema, "Q?", std::string("")).find("Evidence") ==
          std::string::npos);
}

TEST_CASE("fixture context ends with the question cue") {
    Db db;
    DatabaseSchema schema = introspect_schema(db.path, 2);
    std::string ctx = serialize_context(schema, "List the names of all stadiums.");
    std::string tail = "-- Question: List the names of all stadiums.\n-- SQL:\n";
    REQUIRE(ctx.size() >= tail.size());
    CHECK(ctx.substr(ctx.size() - tail.size()) == tail);
    CHECK(ctx.find("CREATE TABLE stadium (") != std::string::npos);
    CHECK(ctx.find("FOREIGN KEY (stadium_id) REFERENCES stadium(stadium_id)") !=
          std::string::npos);
}

TEST_CASE("execution returns canonical rows") {
    Db db;

    ExecutionOutcome rows = execute_sql(db.path, "SELECT name FROM stadium ORDER BY stadium_id");
    REQUIRE(rows.status == ExecStatus::Rows);
    REQUIRE(rows.rows.size() == 5);
    CHECK(rows.rows[0][0].kind == CellKind::Text);
    CHECK(rows.rows[0][0].text == "North Arena");

    ExecutionOutcome empty = execute_sql(db.path, "SELECT name FROM stadium WHERE capacity > 99999999");
    CHECK(empty.status == ExecStatus::Empty);

    ExecutionOutcome error = execute_sql(db.path, "SELECT bogus FROM stadium");
    CHECK(error.status == ExecStatus::Error);
    CHECK(!error.error_message.empty());

    // Writes are rejected: connections open read-only.
    ExecutionOutcome write = execute_sql(db.path, "DELETE FROM stadium");
    CHECK(write.status == ExecStatus::Error);
    ExecutionOutcome still = execute_sql(db.path, "SELECT count(*) FROM stadium");
    REQUIRE(still.status == ExecStatus::Rows);
    CHECK(still.rows[0][0].text == "5");
}

TEST_CASE("numeric cells unify integer and real") {
    Db db;
    ExecutionOutcome a = execute_sql(db.path, "SELECT 5");
    ExecutionOutcome b = execute_sql(db.path, "SELECT 5.0");
    ExecutionOutcome c = execute_sql(db.path, "SELECT '5'");
    REQUIRE(a.status == ExecStatus::Rows);
    REQUIRE(b.status == ExecStatus::Rows);
    REQUIRE(c.status == ExecStatus::Rows);
    CHECK(a.rows == b.rows);
    CHECK(a.rows != c.rows); // text '5' stays distinct from the number 5
    CHECK(compare_results(a, b));
    CHECK(!compare_results(a, c));

    ExecutionOutcome frac = execute_sql(db.path, "SELECT 2.50");
    REQUIRE(frac.status == ExecStatus::Rows);
    CHECK(frac.rows[0][0].text == "2.5"); // trailing zeros trimmed
}

TEST_CASE("result comparison modes") {
    Db db;
    ExecutionOutcome asc = execute_sql(db.path, "SELECT name FROM stadium ORDER BY capacity ASC");
    ExecutionOutcome desc = execute_sql(db.path, "SELECT name FROM stadium ORDER BY capacity DESC");

    CHECK(compare_results(asc, desc, false)); // same bag of rows
    CHECK(!compare_results(asc, desc, true)); // different order

    ExecutionOutcome error = execute_sql(db.path, "SELECT bogus FROM stadium");
    CHECK_THROWS_AS(compare_results(asc, error), ComparisonOnError);
}

TEST_CASE("top level order by detection") {
    CHECK(has_top_level_order_by("SELECT a FROM t ORDER BY a"));
    CHECK(has_top_level_order_by("SELECT a FROM t ORDER BY a LIMIT 1"));
    CHECK(!has_top_level_order_by("SELECT a FROM t"));
    CHECK(!has_top_level_order_by("SELECT a FROM (SELECT b FROM u ORDER BY b) AS s"));
    CHECK(!has_top_level_order_by("SELECT 'ORDER BY' FROM t"));
}

TEST_CASE("execution reward trichotomy") {
    Db db;
    const std::string gold = "SELECT name FROM stadium;";

    SECTION("broken prediction scores -1") {
        CHECK(execution_reward(db.path, "SELECT bogus FROM stadium;", gold,
                               RewardMode::Oracle) == -1);
    }
    SECTION("empty prediction scores 0") {
        CHECK(execution_reward(db.path, "SELECT name FROM stadium WHERE capacity > 99999999;",
                               gold, RewardMode::Oracle) == 0);
    }
    SECTION("row mismatch scores 0") {
        CHECK(execution_reward(db.path, "SELECT city FROM stadium;", gold,
                               RewardMode::Oracle) == 0);
    }
    SECTION("matching rows score +1") {
        CHECK(execution_reward(db.path, "SELECT name FROM stadium", gold,
                               RewardMode::Oracle) == 1);
    }
    SECTION("gold ordering makes the comparison order sensitive") {
        std::string ordered_gold = "SELECT name FROM stadium ORDER BY capacity ASC;";
        CHECK(execution_reward(db.path, "SELECT name FROM stadium ORDER BY capacity ASC;",
                               ordered_gold, RewardMode::Oracle) == 1);
        CHECK(execution_reward(db.path, "SELECT name FROM stadium ORDER BY capacity DESC;",
                               ordered_gold, RewardMode::Oracle) == 0);
        // Unordered gold accepts any order.
        CHECK(execution_reward(db.path, "SELECT name FROM stadium ORDER BY capacity DESC;",
                               gold, RewardMode::Oracle) == 1);
    }
    SECTION("gold that cannot run caps the reward at 0") {
        CHECK(execution_reward(db.path, "SELECT name FROM stadium;",
                               std::string("SELECT broken FROM nowhere;"),
                               RewardMode::Oracle) == 0);
    }
    SECTION("oracle mode requires gold") {
        CHECK_THROWS_AS(execution_reward(db.path, "SELECT 1;", std::nullopt,
                                         RewardMode::Oracle),
                        MissingGoldError);
    }
    SECTION("blind mode never reaches +1") {
        CHECK(execution_reward(db.path, "SELECT name FROM stadium;", gold,
                               RewardMode::Blind) == 0);
        CHECK(execution_reward(db.path, "SELECT bogus;", std::nullopt,
                               RewardMode::Blind) == -1);
        CHECK(execution_reward(db.path, "SELECT name FROM stadium WHERE 1 = 0;",
                               std::nullopt, RewardMode::Blind) == 0);
    }
}

TEST_CASE("runaway statements hit the timeout") {
    Db db;
    std::string heavy =
        "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c LIMIT 100000000) "
        "SELECT count(*) FROM c;";
    ExecutionOutcome out = execute_sql(db.path, heavy, 50);
    CHECK(out.status == ExecStatus::Error);
    CHECK(out.error_message == "timeout");
}

TEST_CASE("task records round trip through json") {
    nlohmann::json j = {{"id", 7},
                        {"question", "How many?"},
                        {"db_id", "concerts"},
                        {"query", "SELECT count(*) FROM concert;"},
                        {"evidence", "count rows"}};
    QueryTask t = task_from_json(j);
    CHECK(t.id == "7");
    CHECK(t.question == "How many?");
    REQUIRE(t.gold_sql.has_value());
    REQUIRE(t.evidence.has_value());

    nlohmann::json back = task_to_json(t);
    CHECK(back.at("id") == "7");
    CHECK(back.at("query") == "SELECT count(*) FROM concert;");

    // Empty strings collapse to absent optionals.
    nlohmann::json sparse = {{"id", "a"}, {"question", "q"}, {"db_id", "d"}, {"query", ""}};
    QueryTask s = task_from_json(sparse);
    CHECK(!s.gold_sql.has_value());
    CHECK(!s.evidence.has_value());

    CHECK_THROWS_AS(task_from_json(nlohmann::json{{"question", "q"}, {"db_id", "d"}}),
                    Error);
}

TEST_CASE("database path resolution") {
    testutil::TempDir dir;
    std::string flat = dir.file("alpha.sqlite");
    testutil::write_file(flat, "x");
    std::filesystem::create_directories(dir.path / "beta");
    std::string nested = (dir.path / "beta" / "beta.db").string();
    testutil::write_file(nested, "x");

    auto a = resolve_db_path(dir.path.string(), "alpha");
    REQUIRE(a.has_value());
    CHECK(*a == flat);

    auto b = resolve_db_path(dir.path.string(), "beta");
    REQUIRE(b.has_value());
    CHECK(*b == nested);

    CHECK(!resolve_db_path(dir.path.string(), "gamma").has_value());
}
