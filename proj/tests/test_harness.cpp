#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fermipair/harness.hpp"

using namespace fermipair;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("fermipair_test_" + name);
    fs::remove_all(p);
    return p;
}

json potential_config() {
    return json{{"experiment", "potential"}, {"d", 2},       {"k_F", {1, 2}},
                {"spec", {{"kind", "step"}}}, {"r_max", 3.0}, {"r_points", 7}};
}

}  // namespace

TEST_CASE("config parsing") {
    const ExperimentConfig c = ExperimentConfig::from_json(potential_config());
    CHECK(c.experiment == Experiment::potential);
    CHECK(c.d == 2);
    CHECK(c.kF == std::vector<double>{1, 2});

    json bad = potential_config();
    bad["k_f"] = {1};
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(bad), doctest::Contains("unknown key"), ConfigError);
    json wrong = potential_config();
    wrong["m_max"] = 2;  // belongs to the scaling experiment
    CHECK_THROWS_AS(ExperimentConfig::from_json(wrong), ConfigError);
    json l = json{{"experiment", "scaling"}, {"L", {"8pi", 3.0}}, {"lambda", "scaled"}};
    const ExperimentConfig s = ExperimentConfig::from_json(l);
    CHECK(s.L[0] == doctest::Approx(8 * kPi));
    CHECK(s.L[1] == 3);
    CHECK(s.coupling(4) == doctest::Approx(2));
    CHECK(parse_experiment("prop2") == Experiment::proposition2);
    CHECK_THROWS_AS(parse_experiment("nope"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"experiment", "potential"}, {"d", 4}}), ConfigError);
}

TEST_CASE("config hash") {
    const ExperimentConfig a = ExperimentConfig::from_json(potential_config());
    json j = potential_config();
    j["output"] = "elsewhere";
    j["r_points"] = 7.0;
    const ExperimentConfig b = ExperimentConfig::from_json(j);
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    j["r_points"] = 8;
    CHECK(ExperimentConfig::from_json(j).hash() != a.hash());
    // canonical form round trips
    CHECK(ExperimentConfig::from_json(a.to_json()).hash() == a.hash());
}

TEST_CASE("parallel map is deterministic and reports the first failure") {
    auto f = [](std::size_t i) { return double(i * i) + 0.5; };
    CHECK(parallel_map(50, 1, f) == parallel_map(50, 4, f));
    auto g = [](std::size_t i) -> int {
        if (i == 7 || i == 3) throw ConfigError("fail " + std::to_string(i));
        return int(i);
    };
    CHECK_THROWS_WITH(parallel_map(10, 3, g), "fail 3");
    CHECK(parallel_map(0, 2, f).empty());
}

TEST_CASE("potential experiment: files, resume, hash guard") {
    const fs::path dir = fresh_dir("potential");
    ExperimentConfig c = ExperimentConfig::from_json(potential_config());
    RunOptions o;
    o.out_dir = dir.string();
    std::ostringstream log;
    o.log = &log;
    const RunResult r = run_experiment(c, o);
    CHECK(r.resumed_points == 0);
    CHECK(fs::exists(dir / "W_d2_kF1.csv"));
    CHECK(fs::exists(dir / "W_d2_kF2.csv"));
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(r.report["core_ok"] == true);
    CHECK(r.report["rows"].size() == 2);

    const RunResult again = run_experiment(c, o);
    CHECK(again.resumed_points == 2);
    CHECK(again.report == r.report);

    c.r_points = 9;
    CHECK_THROWS_WITH_AS(run_experiment(c, o), doctest::Contains("different config"), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("zero profile tabulates to zero") {
    const fs::path dir = fresh_dir("zero");
    json j = potential_config();
    j["spec"] = {{"kind", "zero"}};
    RunOptions o;
    o.out_dir = dir.string();
    std::ostringstream log;
    o.log = &log;
    run_experiment(ExperimentConfig::from_json(j), o);
    const PotentialTable t = PotentialTable::read_csv((dir / "W_d2_kF2.csv").string());
    REQUIRE(t.scaled.size() == 7);
    for (double x : t.scaled) CHECK(x == 0);
    fs::remove_all(dir);
}

TEST_CASE("dry runs write nothing") {
    const fs::path dir = fresh_dir("dry");
    RunOptions o;
    o.out_dir = dir.string();
    o.dry_run = true;
    std::ostringstream log;
    o.log = &log;
    run_experiment(ExperimentConfig::from_json(potential_config()), o);
    const json sc{{"experiment", "scaling"}, {"d", 1}, {"k_F", {2, 4}}, {"m_max", 2}, {"M_imp", 8}};
    const RunResult r = run_experiment(ExperimentConfig::from_json(sc), o);
    CHECK(r.report.contains("points"));
    CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("certify") {
    RunOptions o;
    o.dry_run = true;
    ExperimentConfig c;
    c.experiment = Experiment::certify;
    c.spec = {{"kind", "step"}};
    const RunResult r = run_experiment(c, o);
    CHECK(r.report["spec"]["core_ok"] == true);
    CHECK(r.report["w"]["certified"] == true);
    c.spec = {{"kind", "yukawa"}, {"R", 1.0}};
    c.w.kind = "table";
    c.w.relative_bound = 0.5;
    const fs::path wt = fs::temp_directory_path() / "fermipair_w.txt";
    std::ofstream(wt) << "0 3\n1 1\n2 0\n";
    c.w.path = wt.string();
    const RunResult u = run_experiment(c, o);
    CHECK(u.report["w"]["certified"] == false);
    fs::remove(wt);
}
