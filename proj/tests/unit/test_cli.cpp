#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "nilm_test_cli";

int run(const std::string& args) {
    const std::string cmd = std::string("\"") + NILM_CLI + "\" " + args + " > \"" + (kRoot / "last.log").string() +
                            "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<double> csv_column(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in);
    std::string line;
    std::getline(in, line);
    std::vector<double> out;
    while (std::getline(in, line)) out.push_back(std::stod(line.substr(line.find(',') + 1)));
    return out;
}

fs::path fresh(const std::string& name) {
    const fs::path dir = kRoot / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

fs::path write_scenario(const fs::path& dir, double noise, std::vector<json> appliances, std::size_t duration = 3000) {
    const json sc{{"duration", duration}, {"period", 6},       {"start_time", 1000},      {"seed", 3},
                  {"unknown_load", 20.0}, {"noise_std", noise}, {"appliances", appliances}};
    const fs::path p = dir / "scenario.json";
    std::ofstream(p) << sc.dump(2);
    return p;
}

json appliance(const std::string& name, std::vector<double> centroids, double on_fraction = 0.2) {
    return {{"name", name}, {"centroids", centroids}, {"mean_on_duration", 20.0}, {"on_fraction", on_fraction}};
}

// Tiny network so the pipeline runs in seconds.
fs::path write_tiny_config(const fs::path& dir) {
    const json cfg{{"dataset", "ukdale"},
                   {"seed", 4},
                   {"model", {{"conv", {{4, 9, 4}, {4, 5, 4}}}, {"hidden", 8}}},
                   {"train", {{"epochs", 3}, {"batch_size", 8}}}};
    const fs::path p = dir / "tiny.json";
    std::ofstream(p) << cfg.dump(2);
    return p;
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("synth without noise sums its columns") {
        const fs::path dir = fresh("synth_sum");
        const fs::path sc = write_scenario(
            dir, 0.0, {appliance("a", {0, 150}), appliance("b", {0, 80, 400}), appliance("c", {0, 1000, 2000})});
        REQUIRE(run("--out " + q(dir / "out") + " synth --scenario " + q(sc)) == 0);
        const auto mains = csv_column(dir / "out" / "mains.csv");
        REQUIRE(mains.size() == 3000);
        std::vector<double> sum(mains.size(), 20.0);
        for (const char* name : {"a", "b", "c"}) {
            const auto col = csv_column(dir / "out" / (std::string(name) + ".csv"));
            REQUIRE(col.size() == mains.size());
            for (std::size_t t = 0; t < col.size(); ++t) sum[t] += col[t];
            CHECK(fs::exists(dir / "out" / (std::string(name) + ".states")));
        }
        for (std::size_t t = 0; t < mains.size(); ++t) CHECK(std::abs(mains[t] - sum[t]) <= 1e-9);
    }

    TEST_CASE("synth is reproducible from its seed") {
        const fs::path dir = fresh("synth_seed");
        const fs::path sc = write_scenario(dir, 10.0, {appliance("a", {0, 150})});
        REQUIRE(run("--out " + q(dir / "one") + " synth --scenario " + q(sc)) == 0);
        REQUIRE(run("--out " + q(dir / "two") + " synth --scenario " + q(sc)) == 0);
        REQUIRE(run("--out " + q(dir / "three") + " synth --scenario " + q(sc) + " --scenario-seed 99") == 0);
        CHECK(slurp(dir / "one" / "mains.csv") == slurp(dir / "two" / "mains.csv"));
        CHECK(slurp(dir / "one" / "a.csv") == slurp(dir / "two" / "a.csv"));
        CHECK(slurp(dir / "one" / "mains.csv") != slurp(dir / "three" / "mains.csv"));
    }

    TEST_CASE("states recovers the generating levels") {
        const fs::path dir = fresh("states");
        const fs::path sc = write_scenario(dir, 5.0, {appliance("heater", {0, 150, 400})}, 6000);
        REQUIRE(run("--out " + q(dir) + " synth --scenario " + q(sc)) == 0);
        REQUIRE(run("--out " + q(dir) + " states --input " + q(dir / "heater.csv") + " --count 3") == 0);
        const json model = json::parse(slurp(dir / "heater.model.json"));
        const auto c = model.at("centroids").get<std::vector<double>>();
        REQUIRE(c.size() == 3);
        CHECK(c[0] == 0.0);
        CHECK(std::abs(c[1] - 150.0) <= 5.0);
        CHECK(std::abs(c[2] - 400.0) <= 5.0);
    }

    TEST_CASE("states rejects a trace that never switches on") {
        const fs::path dir = fresh("states_off");
        {
            std::ofstream out(dir / "idle.csv");
            out << "epoch_seconds,watts\n";
            for (int t = 0; t < 100; ++t) out << 1000 + 6 * t << ",3\n";
        }
        CHECK(run("--out " + q(dir) + " states --input " + q(dir / "idle.csv") + " --count 3") != 0);
        CHECK_FALSE(fs::exists(dir / "idle.model.json"));
    }

    TEST_CASE("states takes counts and normalization from the appliance table") {
        const fs::path dir = fresh("states_table");
        const fs::path sc = write_scenario(dir, 0.0, {appliance("fridge", {0, 90, 200, 600})}, 6000);
        REQUIRE(run("--out " + q(dir) + " synth --scenario " + q(sc)) == 0);
        REQUIRE(run("--out " + q(dir) + " states --input " + q(dir / "fridge.csv") + " --table " +
                    q(fs::path(NILM_CONFIG_DIR) / "table1.json") + " --name fridge") == 0);
        const json model = json::parse(slurp(dir / "fridge.model.json"));
        CHECK(model.at("centroids").size() == 4);
        CHECK(model.at("norm_mean").get<double>() == 200.0);
        CHECK(model.at("norm_std").get<double>() == 400.0);
        CHECK(run("--out " + q(dir) + " states --input " + q(dir / "fridge.csv") + " --table " +
                  q(fs::path(NILM_CONFIG_DIR) / "table1.json") + " --name toaster") != 0);
    }

    TEST_CASE("evaluate scores truth against itself as perfect") {
        const fs::path dir = fresh("eval_self");
        const fs::path sc = write_scenario(dir, 0.0, {appliance("a", {0, 150})});
        REQUIRE(run("--out " + q(dir) + " synth --scenario " + q(sc)) == 0);
        REQUIRE(run("--out " + q(dir / "eval") + " evaluate --estimate " + q(dir / "a.csv") + " --truth " +
                    q(dir / "a.csv")) == 0);
        std::ifstream in(dir / "eval" / "metrics.csv");
        std::string header, row;
        std::getline(in, header);
        std::getline(in, row);
        CHECK(header == "appliance,MAE_W,SAE,T,r,r_tilde");
        CHECK(row.rfind("a,0,0,3000,", 0) == 0);
        CHECK(fs::exists(dir / "eval" / "a.plot.csv"));
    }

    TEST_CASE("bad arguments fail with a nonzero exit") {
        const fs::path dir = fresh("bad_args");
        CHECK(run("--out " + q(dir) + " train --variant soft --mains x --appliance y --state-model z") != 0);
        CHECK(run("--out " + q(dir) + " frobnicate") != 0);
        CHECK(run("--out " + q(dir) + " train --mains " + q(dir / "missing.csv")) != 0);
        CHECK(run("--out " + q(dir) + " --dataset ecoplug synth --scenario x") != 0);
    }

    TEST_CASE("full pipeline leaves inputs untouched and echoes its settings") {
        const fs::path dir = fresh("pipeline");
        const fs::path sc = write_scenario(dir, 5.0, {appliance("a", {0, 150}), appliance("b", {0, 80, 400})}, 4000);
        const fs::path cfg = write_tiny_config(dir);
        REQUIRE(run("--out " + q(dir / "data") + " synth --scenario " + q(sc)) == 0);
        REQUIRE(run("--out " + q(dir / "data") + " states --input " + q(dir / "data" / "b.csv") + " --count 3") == 0);

        const fs::path mains = dir / "data" / "mains.csv";
        const fs::path target = dir / "data" / "b.csv";
        const fs::path state_model = dir / "data" / "b.model.json";
        const std::string before_mains = slurp(mains), before_target = slurp(target), before_model = slurp(state_model);

        REQUIRE(run("--config " + q(cfg) + " --out " + q(dir / "train") + " train --mains " + q(mains) +
                    " --appliance " + q(target) + " --state-model " + q(state_model) +
                    " --epochs 1 --variant hard-median") == 0);
        const json effective = json::parse(slurp(dir / "train" / "effective_config.json"));
        CHECK(effective.at("train").at("epochs") == 1);
        CHECK(effective.at("train").at("batch_size") == 8);
        CHECK(effective.at("train").at("variant") == "hard-median");
        CHECK(effective.at("model").at("hidden") == 8);
        CHECK(effective.at("seed") == 4);
        CHECK(effective.at("train").at("learning_rate") == 1e-3);
        std::ifstream report(dir / "train" / "train_report.csv");
        std::string line;
        std::size_t rows = 0;
        while (std::getline(report, line)) ++rows;
        CHECK(rows == 2);

        for (const char* variant : {"plain", "hard-median"}) {
            REQUIRE(run("--out " + q(dir / "est") + " disaggregate --checkpoint " + q(dir / "train" / "model.ddnn") +
                        " --mains " + q(mains) + " --variant " + variant + " --tail 0.5") == 0);
        }
        const auto estimate = csv_column(dir / "est" / "b.hard-median.csv");
        CHECK(estimate.size() == 2000);
        for (double w : estimate) CHECK(w >= 0.0);
        REQUIRE(run("--out " + q(dir / "eval") + " evaluate --estimate " + q(dir / "est" / "b.hard-median.csv") +
                    " --plain " + q(dir / "est" / "b.plain.csv") + " --truth " + q(target)) == 0);
        std::ifstream plot(dir / "eval" / "b.plot.csv");
        std::getline(plot, line);
        CHECK(line == "t,truth,plain,variant");

        CHECK(slurp(mains) == before_mains);
        CHECK(slurp(target) == before_target);
        CHECK(slurp(state_model) == before_model);
    }
}
