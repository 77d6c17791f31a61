#include "svem/error.hpp"
#include "svem/serialize.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace svem;

namespace {

Dataset small_data() {
    Rng rng(31);
    std::vector<double> a, b, y;
    std::vector<std::string> g;
    for (int i = 0; i < 24; ++i) {
        a.push_back(rng.uniform(0.0, 10.0));
        b.push_back(rng.uniform(-1.0, 1.0));
        g.push_back(i % 3 == 0 ? "u" : (i % 3 == 1 ? "v" : "w"));
        y.push_back(2.0 + 0.4 * a.back() - b.back() + (g.back() == "v" ? 1.0 : 0.0) + 0.2 * rng.normal());
    }
    Dataset d;
    d.add_numeric("A", a);
    d.add_numeric("B", b);
    d.add_categorical("G", g);
    d.add_numeric("Y", y);
    return d;
}

ExpansionSpec small_spec(const Dataset& d) {
    ExpansionOptions o;
    o.main_effects = {"A", "B", "G"};
    o.factorial_order = 2;
    o.polynomial_order = 2;
    return build_expansion_spec(d, o);
}

SvemModel small_model(const Dataset& d) {
    SvemOptions o;
    o.B = 6;
    o.seed = 3;
    o.path.nlambda = 20;
    o.debias = true;
    return fit_svem(small_spec(d), d, "Y", o);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config hash is stable and sensitive") {
    const Json a = Json::parse(R"({"B": 200, "seed": 1})");
    const Json b = Json::parse(R"({"seed": 1, "B": 200})");
    const Json c = Json::parse(R"({"B": 201, "seed": 1})");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a) != config_hash(c));
    CHECK(config_hash(a).size() == 16);
    CHECK(config_hash(Json::parse("\"\"")) != config_hash(Json::parse("null")));
}

TEST_CASE("expansion spec round trip and tamper check") {
    const Dataset d = small_data();
    const ExpansionSpec spec = small_spec(d);
    const Json j = to_json(spec);
    const ExpansionSpec back = expansion_spec_from_json(j);
    CHECK(back.column_names() == spec.column_names());
    CHECK((expand_rows(back, d).values - expand_rows(spec, d).values).cwiseAbs().maxCoeff() == 0.0);

    Json edited = j;
    edited["terms"].erase(edited["terms"].begin() + 1);
    CHECK_THROWS_AS(expansion_spec_from_json(edited), ConfigError);
    Json wrong = j;
    wrong["format"] = "svem.model";
    CHECK_THROWS_AS(expansion_spec_from_json(wrong), ConfigError);
    Json future = j;
    future["version"] = kDocumentVersion + 1;
    CHECK_THROWS_AS(expansion_spec_from_json(future), ConfigError);
}

TEST_CASE("model documents round trip exactly") {
    const Dataset d = small_data();
    const SvemModel m = small_model(d);
    const Json j = to_json(m);
    const SvemModel back = svem_model_from_json(Json::parse(j.dump()));
    CHECK(to_json(back).dump() == j.dump());
    CHECK(back.coefficients == m.coefficients);
    REQUIRE(back.debias.has_value());
    const auto p1 = predict_svem(m, d, 0.9);
    const auto p2 = predict_svem(back, d, 0.9);
    CHECK(p1.mean == p2.mean);
    CHECK(*p1.lower == *p2.lower);

    // refitting writes the same bytes
    const auto dir = std::filesystem::temp_directory_path();
    const std::string f1 = (dir / "svem_model_a.json").string(), f2 = (dir / "svem_model_b.json").string();
    write_json_file(f1, j);
    write_json_file(f2, to_json(small_model(d)));
    CHECK(slurp(f1) == slurp(f2));
    CHECK(read_json_file(f1) == j);
    std::remove(f1.c_str());
    std::remove(f2.c_str());

    Json short_rows = j;
    short_rows["coefficients"].erase(short_rows["coefficients"].begin());
    CHECK_THROWS_AS(svem_model_from_json(short_rows), ConfigError);
}

TEST_CASE("unreadable or malformed JSON files are config errors") {
    CHECK_THROWS_AS(read_json_file("/nonexistent/svem.json"), ConfigError);
    const std::string f = (std::filesystem::temp_directory_path() / "svem_bad.json").string();
    std::ofstream(f) << "{\"B\": ";
    CHECK_THROWS_AS(read_json_file(f), ConfigError);
    std::remove(f.c_str());
}

TEST_CASE("fit settings") {
    const SvemOptions o = svem_options_from_json(Json::parse(
        R"({"family": "binomial", "B": 50, "objective": "wBIC", "relax": false, "seed": 9, "lambda_min_ratio": 0.001})"));
    CHECK(o.family == Family::binomial);
    CHECK(o.B == 50);
    CHECK(o.objective == Objective::wBIC);
    CHECK(o.relax == false);
    CHECK(o.seed == 9);
    CHECK(*o.path.lambda_min_ratio == 0.001);
    const SvemOptions back = svem_options_from_json(to_json(o));
    CHECK(to_json(back) == to_json(o));
    CHECK_THROWS_AS(svem_options_from_json(Json::parse(R"({"objective": "AIC"})")), ConfigError);
    CHECK_THROWS_AS(svem_options_from_json(Json::parse(R"({"B": "many"})")), ConfigError);
}

TEST_CASE("goal, spec, mixture and query parsing") {
    const auto g = goals_from_json(Json::parse(R"({"P": {"goal": "max", "weight": 2}, "S": {"goal": "target", "target": 80}})"));
    REQUIRE(g.size() == 2);
    CHECK(g[1].target == 80.0);
    const auto ga = goals_from_json(Json::parse(R"([{"response": "P", "goal": "min"}])"));
    CHECK(ga[0].goal == Goal::min);
    CHECK(ga[0].weight == 1.0);
    CHECK_THROWS_AS(goals_from_json(Json::parse(R"({"P": {"goal": "target"}})")), ConfigError);
    CHECK_THROWS_AS(goals_from_json(Json::parse(R"({"P": {"goal": "max", "weight": 0}})")), ConfigError);
    CHECK_THROWS_AS(goals_from_json(Json::parse("{}")), ConfigError);

    const auto s = specs_from_json(Json::parse(R"({"PDI": {"upper": 0.2}})"));
    CHECK(!s[0].lower);
    CHECK(*s[0].upper == 0.2);
    CHECK_THROWS_AS(specs_from_json(Json::parse(R"({"PDI": {}})")), ConfigError);
    CHECK_THROWS_AS(specs_from_json(Json::parse(R"({"PDI": {"lower": 2, "upper": 1}})")), ConfigError);

    const auto m = mixture_groups_from_json(
        Json::parse(R"([{"vars": ["a", "b"], "lower": [0.1, 0.2], "upper": [0.8, 0.9], "total": 1}])"));
    CHECK(m[0].vars.size() == 2);
    CHECK_THROWS(mixture_groups_from_json(Json::parse(R"([{"vars": ["a", "b"], "lower": [0.6, 0.6]}])")));

    const CandidateQuery q = query_from_json(Json::parse(R"({"target": "score", "k": 3, "top_type": "n", "top": 40})"));
    CHECK(q.k == 3);
    CHECK(q.top == 40.0);
    CHECK(q.label == "score");
    CHECK_THROWS_AS(query_from_json(Json::parse(R"({"k": 0})")), ConfigError);
}

TEST_CASE("simulation grid") {
    const auto cells = sim_cells_from_json(Json::parse(R"({"n_total": [15, 20], "target_r2": [0.5, 0.9], "seed": 4})"));
    REQUIRE(cells.size() == 4);
    CHECK(cells[0].settings.size() == default_settings(Family::gaussian).size());
    // a cell's seed does not depend on which other cells are in the grid
    const auto one = sim_cells_from_json(Json::parse(R"({"n_total": [20], "target_r2": [0.9], "seed": 4})"));
    const auto it = std::find_if(cells.begin(), cells.end(),
                                 [](const SimCell& c) { return c.n_total == 20 && c.target_r2 == 0.9; });
    CHECK(it->seed == one[0].seed);
    CHECK(cells[0].seed != cells[1].seed);

    const auto named = sim_cells_from_json(Json::parse(
        R"({"n_total": [20], "target_r2": [0.5], "settings": [{"method": "svem", "objective": "wBIC", "relax": true}]})"));
    CHECK(named[0].settings[0].name == "svem_wBIC_relax");
    CHECK_THROWS_AS(sim_cells_from_json(Json::parse(R"({"settings": ["nope"]})")), ConfigError);
    CHECK_THROWS_AS(sim_cells_from_json(Json::parse(R"({"n_reps": 0})")), ConfigError);
}
