#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "wisp/experiments.hpp"
#include "wisp/io.hpp"
#include "wisp/scenario.hpp"

using namespace wisp;
using namespace wisp::scenario;

TEST_CASE("missing capacity names the field") {
    const std::string text = R"({"kind": "custom", "system": {"services": [
        {"lambda": 5, "mu": 5, "s_max": 10}, {"lambda": 5, "mu": 5, "s_max": 10}]}})";
    CHECK_THROWS_WITH_AS(parse_scenario_text(text), doctest::Contains("capacity"), ConfigError);
}

TEST_CASE("unknown kind lists the options") {
    CHECK_THROWS_WITH_AS(parse_scenario_text(R"({"kind": "frobnicate"})"),
                         doctest::Contains("table1, switching-curve"), ConfigError);
}

TEST_CASE("invalid json is a config error") {
    CHECK_THROWS_AS(parse_scenario_text("{nope"), ConfigError);
}

TEST_CASE("defaults round-trip through the canonical form") {
    for (Kind k : {Kind::Table1, Kind::SwitchingCurve, Kind::Convergence, Kind::MseVsN}) {
        Scenario sc = default_scenario(k);
        Scenario back = parse_scenario_text(sc.canonical_json());
        CHECK(back.hash() == sc.hash());
        CHECK(back.canonical_json() == sc.canonical_json());
    }
}

TEST_CASE("overrides change the hash") {
    Scenario a = default_scenario(Kind::Convergence);
    Scenario b = parse_scenario_text(R"({"kind": "convergence", "seed": 99})");
    CHECK(a.hash() != b.hash());
}

TEST_CASE("candidate grids") {
    SystemConfig cfg;
    cfg.capacity = 1;
    cfg.services = {{5.0, 5.0, 8}, {10.0, 5.0, 8}};

    SUBCASE("per-service lambda grid marks the truth") {
        CandidateSpec spec;
        spec.lambda_grid = {{3, 5, 8}, {6, 10, 16}};
        auto set = spec.build(cfg);
        CHECK(set.candidates.size() == 9);
        REQUIRE(set.truth_index >= 0);
        const auto& truth = set.candidates[static_cast<std::size_t>(set.truth_index)];
        CHECK(truth.mean_times[0].first == doctest::Approx(0.2));
        CHECK(truth.mean_times[1].first == doctest::Approx(0.1));
    }
    SUBCASE("scale grid includes the unscaled point") {
        CandidateSpec spec;
        spec.lambda_scales = {0.8, 1.0, 1.2};
        spec.mu_scales = {0.9, 1.0, 1.1};
        auto set = spec.build(cfg);
        CHECK(set.candidates.size() == 9);
        CHECK(set.truth_index >= 0);
    }
    SUBCASE("empty spec is rejected") {
        CandidateSpec spec;
        CHECK_THROWS_AS(spec.build(cfg), ConfigError);
    }
}

TEST_CASE("result emission writes every file plus the summary") {
    experiments::ResultBundle b;
    b.name = "emission-test";
    b.add_file("a.csv", "x,y\n1,2\n");
    b.summary_json = "{\"ok\": true}\n";
    const auto dir = std::filesystem::temp_directory_path() / "wisp-test-out";
    std::filesystem::remove_all(dir);
    auto files = experiments::emit_results(b, dir);
    REQUIRE(files.size() == 2);
    std::ifstream in(files[0]);
    std::string line;
    std::getline(in, line);
    CHECK(line == "x,y");
    CHECK(std::filesystem::exists(dir / "emission-test" / "summary.json"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("csv rows are length-checked") {
    io::Csv csv({"a", "b"});
    csv.cell(1).cell(2);
    CHECK_NOTHROW(csv.end_row());
    csv.cell(1);
    CHECK_THROWS(csv.end_row());
}

TEST_CASE("double formatting round-trips") {
    for (double v : {0.1, 1.0 / 3.0, 12345.6789, 1e-17, 0.0}) {
        const auto s = io::format_double(v);
        CHECK(std::stod(s) == v);
    }
}

TEST_CASE("identical scenario reproduces identical learner output bytes") {
    Scenario sc = default_scenario(Kind::Convergence);
    sc.schedule.episodes = 12;
    sc.benchmark_episodes = 20;
    sc.convergence.seeds = 2;
    auto a = experiments::run_learn_ucb(sc);
    auto b = experiments::run_learn_ucb(sc);
    REQUIRE(a.bundle.files.size() == b.bundle.files.size());
    for (std::size_t i = 0; i < a.bundle.files.size(); ++i) {
        CHECK(a.bundle.files[i].first == b.bundle.files[i].first);
        CHECK(a.bundle.files[i].second == b.bundle.files[i].second);
    }
    CHECK(a.bundle.summary_json == b.bundle.summary_json);
}
