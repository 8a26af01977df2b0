#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nilgrowth/scenario.hpp"

namespace fs = std::filesystem;
using nilgrowth::scenario::RunOptions;
using nilgrowth::scenario::run_config_file;
using nilgrowth::scenario::run_scenario;
using nlohmann::json;

namespace {

fs::path scenario_dir() { return fs::path(NILGROWTH_SCENARIO_DIR); }

fs::path fresh_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("nilgrowth_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NILGROWTH_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("identical config and seed produce byte-identical artifacts") {
    json cfg{{"name", "det"},
             {"kind", "donk"},
             {"trials", 12},
             {"seed", 99},
             {"n_max", 4},
             {"support_max", 5},
             {"value_bound", 6}};
    const fs::path d1 = fresh_dir("det1"), d2 = fresh_dir("det2");
    std::ostringstream log;
    RunOptions o1, o2;
    o1.out_dir = d1;
    o2.out_dir = d2;
    REQUIRE(run_scenario(cfg, o1, log) == 0);
    REQUIRE(run_scenario(cfg, o2, log) == 0);
    CHECK(slurp(d1 / "det.json") == slurp(d2 / "det.json"));
    CHECK(!slurp(d1 / "det.json").empty());
}

TEST_CASE("unknown keys and missing seeds are parse errors") {
    std::ostringstream log;
    RunOptions opt;
    opt.out_dir = fresh_dir("parse");
    CHECK(run_scenario(json{{"name", "x"}, {"kind", "donk"}, {"bogus", 1}}, opt, log) == 2);
    CHECK(run_scenario(json{{"name", "x"}, {"kind", "nope"}}, opt, log) == 2);
    CHECK(run_scenario(json::object(), opt, log) == 2);
    // Randomized scenario without a seed.
    CHECK(run_scenario(json{{"name", "x"}, {"kind", "donk"}, {"trials", 3}}, opt, log) == 2);
}

TEST_CASE("cap-exceeded scenarios exit 3 with a flagged artifact") {
    json cfg{{"name", "capped"},
             {"kind", "grow"},
             {"group", {{"kind", "lattice"}, {"rank", 2}}},
             {"set", {{"kind", "lattice_box"}, {"bounds", {1, 1}}}},
             {"symmetrize", true},
             {"n_max", 60},
             {"cap", 500}};
    std::ostringstream log;
    RunOptions opt;
    opt.out_dir = fresh_dir("cap");
    CHECK(run_scenario(cfg, opt, log) == 3);
    const json out = json::parse(slurp(opt.out_dir / "capped.json"));
    CHECK(out.at("truncated") == true);
}

TEST_CASE("dihedral norm scenario reproduces |b|/N") {
    std::ostringstream log;
    RunOptions opt;
    opt.out_dir = fresh_dir("dn");
    REQUIRE(run_config_file(scenario_dir() / "dihedral_norm.json", opt, log) == 0);
    const std::string csv = slurp(opt.out_dir / "dihedral_norm.csv");
    // Sample rows: (a=1,b=7) and (a=-1,b=3) both have seminorm |b|/10.
    CHECK(csv.find("(a=1,b=7),7/10,7/10") != std::string::npos);
    CHECK(csv.find("(a=-1,b=3),inf,3/10") != std::string::npos);
    CHECK(csv.find("(a=1,b=0),0,0") != std::string::npos);
}

TEST_CASE("profile scenario emits prediction and fit artifacts") {
    std::ostringstream log;
    RunOptions opt;
    opt.out_dir = fresh_dir("prof");
    REQUIRE(run_config_file(scenario_dir() / "abelian_profile.json", opt, log) == 0);
    const json j = json::parse(slurp(opt.out_dir / "abelian_profile_n4.json"));
    CHECK(j.at("fitted").at("slopes") == json::array({2, 1, 0}));
    const std::string csv = slurp(opt.out_dir / "abelian_profile_n4.csv");
    CHECK(csv.rfind("m,cardinality,log_cardinality,f_fitted,f_predicted,deviation\n", 0) == 0);
}

TEST_CASE("plot reshapes artifacts into tidy long form") {
    std::ostringstream log;
    RunOptions opt;
    opt.out_dir = fresh_dir("plot");
    REQUIRE(run_config_file(scenario_dir() / "abelian_profile.json", opt, log) == 0);
    const fs::path tidy = opt.out_dir / "tidy.csv";
    REQUIRE(nilgrowth::scenario::emit_plot_series(opt.out_dir / "abelian_profile_n4.csv", tidy, log) == 0);
    const std::string out = slurp(tidy);
    CHECK(out.rfind("series,x,y\n", 0) == 0);
    CHECK(out.find("log_cardinality,1,") != std::string::npos);
    CHECK(out.find("f_fitted,") != std::string::npos);
}

TEST_CASE("cli binary: exit codes") {
    const fs::path out = fresh_dir("cli");
    CHECK(run_cli("run " + (scenario_dir() / "lo_exact.json").string() + " --out " + out.string()) == 0);
    CHECK(fs::exists(out / "lo_exact.json"));
    CHECK(run_cli("run /nonexistent/config.json") == 2);
    // Empty config file.
    const fs::path empty = out / "empty.json";
    std::ofstream(empty).close();
    CHECK(run_cli("run " + empty.string()) == 2);
    CHECK(run_cli("") == 2);
}

TEST_CASE("cli binary: --jobs runs scenario lists in parallel deterministically") {
    const fs::path o1 = fresh_dir("jobs1"), o2 = fresh_dir("jobs2");
    REQUIRE(run_cli("run " + (scenario_dir() / "sandwich_dihedral.json").string() + " --out " + o1.string() +
                    " --jobs 2") == 0);
    REQUIRE(run_cli("run " + (scenario_dir() / "sandwich_dihedral.json").string() + " --out " + o2.string()) == 0);
    CHECK(slurp(o1 / "sandwich_dihedral.json") == slurp(o2 / "sandwich_dihedral.json"));
    CHECK(slurp(o1 / "sandwich_corrupted.json") == slurp(o2 / "sandwich_corrupted.json"));
}

TEST_CASE("cli binary: --trials override") {
    const fs::path out = fresh_dir("trials");
    REQUIRE(run_cli("run " + (scenario_dir() / "donk_random.json").string() + " --out " + out.string() +
                    " --trials 5") == 0);
    const json j = json::parse(slurp(out / "donk_random.json"));
    CHECK(j.at("trials") == 5);
    CHECK(j.at("rows").size() == 5);
    CHECK(j.at("all_ok") == true);
}

TEST_CASE("every shipped scenario runs clean (trials reduced)") {
    std::ostringstream log;
    RunOptions opt;
    opt.out_dir = fresh_dir("smoke");
    opt.trials = 5;
    int count = 0;
    for (const auto& entry : fs::directory_iterator(scenario_dir())) {
        if (entry.path().extension() != ".json") continue;
        INFO(entry.path().string());
        CHECK(run_config_file(entry.path(), opt, log) == 0);
        ++count;
    }
    CHECK(count >= 14);
    // The decay artifact of forward_check reshapes into tagged series rows.
    const fs::path tidy = opt.out_dir / "decay_tidy.csv";
    REQUIRE(nilgrowth::scenario::emit_plot_series(opt.out_dir / "forward_check.csv", tidy, log) == 0);
    const std::string out = slurp(tidy);
    CHECK(out.find("l2_inv_sq,1,") != std::string::npos);
    CHECK(out.find("linf,") != std::string::npos);
}

TEST_CASE("cli binary: --cap and --seed overrides") {
    const fs::path out = fresh_dir("capseed");
    // A tight cap turns the heisenberg box scenario into exit 3 with a flagged artifact.
    CHECK(run_cli("run " + (scenario_dir() / "heisenberg_box.json").string() + " --out " + out.string() +
                  " --cap 1000") == 3);
    const json j = json::parse(slurp(out / "heisenberg_box.json"));
    CHECK(j.at("truncated") == true);
    // Seed override changes the sampled donk instances.
    const fs::path o1 = fresh_dir("seed1"), o2 = fresh_dir("seed2");
    REQUIRE(run_cli("run " + (scenario_dir() / "donk_random.json").string() + " --out " + o1.string() +
                    " --trials 5 --seed 1") == 0);
    REQUIRE(run_cli("run " + (scenario_dir() / "donk_random.json").string() + " --out " + o2.string() +
                    " --trials 5 --seed 2") == 0);
    CHECK(slurp(o1 / "donk_random.json") != slurp(o2 / "donk_random.json"));
    CHECK(json::parse(slurp(o1 / "donk_random.json")).at("all_ok") == true);
}

TEST_CASE("plot on a missing artifact is a parse error") {
    std::ostringstream log;
    CHECK(nilgrowth::scenario::emit_plot_series("/nonexistent/artifact.csv", "/tmp/x.csv", log) == 2);
    CHECK(run_cli("plot /nonexistent/artifact.csv") == 2);
}

TEST_CASE("config-semantic mistakes are parse errors") {
    std::ostringstream log;
    RunOptions opt;
    opt.out_dir = fresh_dir("sem");
    // Element backend does not match the group.
    json cfg{{"name", "x"},
             {"kind", "norm"},
             {"group", {{"kind", "lattice"}, {"rank", 1}}},
             {"progression",
              {{"generators", json::array({{{"backend", "dihedral"}, {"sign", 1}, {"shift", 1}}})},
               {"lengths", json::array({"3"})}}},
             {"t_max", "1"},
             {"queries", json::array()}};
    CHECK(run_scenario(cfg, opt, log) == 2);
    // Zero-length progression.
    json bad{{"name", "y"},
             {"kind", "norm"},
             {"group", {{"kind", "lattice"}, {"rank", 1}}},
             {"progression",
              {{"generators", json::array({{{"backend", "lattice"}, {"coords", {1}}}})},
               {"lengths", json::array({"0"})}}},
             {"t_max", "1"},
             {"queries", json::array()}};
    CHECK(run_scenario(bad, opt, log) == 2);
}

TEST_CASE("the z2_ball grow scenario reports check and stability") {
    std::ostringstream log;
    RunOptions opt;
    opt.out_dir = fresh_dir("z2ball");
    REQUIRE(run_config_file(scenario_dir() / "z2_ball.json", opt, log) == 0);
    const json j = json::parse(slurp(opt.out_dir / "z2_ball.json"));
    CHECK(j.at("polynomial_growth_check").at("ok") == true);
    CHECK(j.at("stability_constant").get<double>() < 3.0);
    const std::string csv = slurp(opt.out_dir / "z2_ball.csv");
    CHECK(csv.find("\n40,3281\n") != std::string::npos);
}
