#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "nilm/data/series.hpp"
#include "nilm/data/states.hpp"
#include "nilm/data/synth.hpp"
#include "nilm/data/windows.hpp"
#include "nilm/error.hpp"
#include "support.hpp"

using namespace nilm;

namespace {

PowerSeries parse(const std::string& text, std::int64_t period) {
    std::istringstream in(text);
    return parse_csv(in, period);
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "nilm_test_data";
    std::filesystem::create_directories(dir);
    return dir / name;
}

// Nearest of `levels` by brute force, ties to the lower index.
std::size_t nearest(double x, const std::vector<double>& levels) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < levels.size(); ++j) {
        if (std::abs(x - levels[j]) < std::abs(x - levels[best])) best = j;
    }
    return best;
}

}  // namespace

TEST_SUITE("load_csv") {
    TEST_CASE("regular rows land on the grid") {
        const auto s = parse("0,1\n6,2\n12,3\n", 6);
        REQUIRE(s.size() == 3);
        CHECK(s.missing_count() == 0);
        CHECK(s.values == std::vector<double>{1, 2, 3});
        CHECK(s.time_at(2) == 12);
    }

    TEST_CASE("holes wider than the period are marked missing") {
        const auto s = parse("epoch_seconds,watts\n0,5\n18,7\n", 6);
        REQUIRE(s.size() >= 3);
        CHECK(s.values[0] == 5.0);
        CHECK(is_missing(s.values[1]));
        CHECK(is_missing(s.values[2]));
        CHECK(s.values.back() == 7.0);
    }

    TEST_CASE("denser readings forward-fill onto the grid") {
        const auto s = parse("0,1\n3,2\n6,3\n9,4\n12,5\n", 6);
        CHECK(s.values == std::vector<double>{1, 3, 5});
    }

    TEST_CASE("errors name the line") {
        try {
            parse("t,w\n0,1\n6,abc\n", 6);
            FAIL("expected rejection");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find(":3:") != std::string::npos);
        }
        CHECK_THROWS_AS(parse("0,1\n12,1\n6,1\n", 6), Error);
        CHECK_THROWS_AS(parse("0,-4\n", 6), Error);
        CHECK_THROWS_AS(parse("", 6), Error);
        CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", 6), Error);
    }

    TEST_CASE("fixture round-trips through write_csv") {
        const auto original = load_csv(NILM_FIXTURE_DIR "/fridge_20.csv", 6);
        REQUIRE(original.size() == 20);
        CHECK(original.missing_count() == 0);
        const auto path = scratch("roundtrip.csv");
        write_csv(original, path);
        const auto again = load_csv(path, 6);
        CHECK(again.start_time == original.start_time);
        REQUIRE(again.size() == original.size());
        for (std::size_t i = 0; i < again.size(); ++i) CHECK(std::abs(again.values[i] - original.values[i]) <= 1e-9);
    }
}

TEST_SUITE("fill_gaps") {
    TEST_CASE("short gaps take the next valid value") {
        PowerSeries s{0, 60, {5, kMissing, kMissing, 9}};
        CHECK(fill_gaps(s).values == std::vector<double>{5, 9, 9, 9});
    }

    TEST_CASE("long gaps become zero") {
        PowerSeries s{0, 60, {5, kMissing, kMissing, kMissing, kMissing, kMissing, 9}};
        CHECK(fill_gaps(s).values == std::vector<double>{5, 0, 0, 0, 0, 0, 9});
    }

    TEST_CASE("a gap of exactly the limit is long") {
        PowerSeries s{0, 60, {5, kMissing, kMissing, kMissing, 9}};
        CHECK(fill_gaps(s).values == std::vector<double>{5, 0, 0, 0, 9});
    }

    TEST_CASE("complete series unchanged and all-missing rejected") {
        PowerSeries s{0, 6, {1, 2, 3}};
        CHECK(fill_gaps(s).values == s.values);
        CHECK_THROWS_AS(fill_gaps(PowerSeries{0, 6, {kMissing, kMissing}}), Error);
    }

    TEST_CASE("idempotent and leaves no missing samples") {
        std::mt19937_64 rng(21);
        std::bernoulli_distribution hole(0.3);
        std::uniform_real_distribution<double> watts(0.0, 500.0);
        for (int trial = 0; trial < 100; ++trial) {
            PowerSeries s{0, 6, std::vector<double>(80)};
            for (double& v : s.values) v = hole(rng) ? kMissing : watts(rng);
            s.values[40] = 10.0;
            const auto once = fill_gaps(s);
            CHECK(once.missing_count() == 0);
            CHECK(std::all_of(once.values.begin(), once.values.end(), [](double v) { return v >= 0.0; }));
            CHECK(fill_gaps(once).values == once.values);
        }
    }
}

TEST_SUITE("normalize") {
    TEST_CASE("table values") {
        CHECK(normalize(std::vector<double>{200.0}, 200.0, 400.0)[0] == 0.0);
        CHECK(normalize(std::vector<double>{1700.0}, 700.0, 1000.0)[0] == 1.0);
        CHECK_THROWS_AS(normalize(std::vector<double>{1.0}, 0.0, 0.0), Error);
        CHECK_THROWS_AS(denormalize(std::vector<double>{1.0}, 0.0, -1.0), Error);
    }

    TEST_CASE("denormalize inverts normalize") {
        std::mt19937_64 rng(22);
        const auto v = nilm::testing::random_vector(100, rng, 0.0, 3000.0);
        for (int trial = 0; trial < 20; ++trial) {
            const double mean = std::uniform_real_distribution<double>(0, 1000)(rng);
            const double sd = std::uniform_real_distribution<double>(0.1, 1000)(rng);
            const auto back = denormalize(normalize(v, mean, sd), mean, sd);
            for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(back[i] - v[i]) <= 1e-9);
        }
    }

    TEST_CASE("fit_normalizer uses the population spread") {
        const auto n = fit_normalizer(std::vector<double>{1, 3, kMissing});
        CHECK(n.mean == 2.0);
        CHECK(n.std == 1.0);
        CHECK(fit_normalizer(std::vector<double>{4, 4}).std == 1.0);
    }
}

TEST_SUITE("cluster_states") {
    TEST_CASE("recovers generating levels under jitter") {
        std::mt19937_64 rng(23);
        std::uniform_int_distribution<int> pick(0, 2);
        std::uniform_real_distribution<double> jitter(-3.0, 3.0);
        const std::vector<double> levels{0, 100, 500};
        PowerSeries s{0, 6, {}};
        for (int i = 0; i < 3000; ++i) s.values.push_back(std::max(0.0, levels[pick(rng)] + jitter(rng)));
        const auto m = cluster_states(s, 3, 15.0, 1, "kettle");
        REQUIRE(m.state_count() == 3);
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(m.centroids[j] - levels[j]) <= 5.0);
        CHECK(m.appliance_name == "kettle");
        const auto fit = fit_normalizer(s.values);
        CHECK(m.norm_mean == doctest::Approx(fit.mean));
        CHECK(m.norm_std == doctest::Approx(fit.std));
    }

    TEST_CASE("well separated levels give perfect assignments") {
        std::mt19937_64 rng(24);
        std::uniform_int_distribution<int> pick(0, 2);
        std::normal_distribution<double> noise(0.0, 5.0);
        const std::vector<double> levels{0, 60, 900};
        PowerSeries s{0, 6, {}};
        std::vector<std::size_t> truth;
        for (int i = 0; i < 2000; ++i) {
            const int k = pick(rng);
            truth.push_back(static_cast<std::size_t>(k));
            s.values.push_back(k == 0 ? 0.0 : levels[k] + noise(rng));
        }
        const auto m = cluster_states(s, 3, 15.0, 9);
        for (std::size_t i = 0; i < truth.size(); ++i) CHECK(nearest(s.values[i], m.centroids) == truth[i]);
    }

    TEST_CASE("too few ON readings are rejected with the count") {
        PowerSeries quiet{0, 6, {0, 3, 14, 15, 2}};
        try {
            cluster_states(quiet, 2);
            FAIL("expected rejection");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("found 0") != std::string::npos);
        }
        CHECK_THROWS_AS(cluster_states(PowerSeries{0, 6, {0, 50, 50, 50}}, 3), Error);
    }

    TEST_CASE("deterministic in its inputs") {
        std::mt19937_64 rng(25);
        PowerSeries s{0, 6, nilm::testing::random_vector(500, rng, 0.0, 1000.0)};
        const auto a = cluster_states(s, 4, 15.0, 3);
        const auto b = cluster_states(s, 4, 15.0, 3);
        CHECK(a.centroids == b.centroids);
        CHECK(a.norm_std == b.norm_std);
    }
}

TEST_SUITE("label_states") {
    const ApplianceStateModel model{"x", {0, 100, 500}, 0.0, 1.0, 15.0};

    TEST_CASE("examples") {
        CHECK(label_state(0.0, model) == 0);
        CHECK(label_state(290.0, model) == 1);
        CHECK(label_state(300.0, model) == 1);
        CHECK(label_state(301.0, model) == 2);
        // At or below the threshold is OFF even when 100 W were nearer.
        const ApplianceStateModel close{"y", {0, 20}, 0.0, 1.0, 15.0};
        CHECK(label_state(15.0, close) == 0);
        CHECK(label_state(16.0, close) == 1);
    }

    TEST_CASE("rows are exactly one-hot") {
        std::mt19937_64 rng(26);
        const auto watts = nilm::testing::random_vector(1000, rng, 0.0, 800.0);
        const Tensor rows = label_states(watts, model);
        REQUIRE(rows.shape() == Shape{1000, 3});
        const auto idx = label_state_indices(watts, model);
        for (std::size_t t = 0; t < 1000; ++t) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 3; ++j) {
                CHECK((rows.at(t, j) == 0.0 || rows.at(t, j) == 1.0));
                sum += rows.at(t, j);
            }
            CHECK(sum == 1.0);
            CHECK(rows.at(t, idx[t]) == 1.0);
        }
    }

    TEST_CASE("state model file round-trips") {
        const ApplianceStateModel m{"fridge", {0, 88.5, 210.25, 1200}, 200.0, 400.0, 15.0};
        const auto path = scratch("fridge.states");
        save_state_model(m, path);
        const auto back = load_state_model(path);
        CHECK(back.appliance_name == "fridge");
        CHECK(back.centroids == m.centroids);
        CHECK(back.norm_mean == 200.0);
        CHECK(back.norm_std == 400.0);
        CHECK(back.on_threshold == 15.0);
        CHECK_THROWS_AS(save_state_model(ApplianceStateModel{"bad", {5, 10}, 0, 1, 15}, path), Error);
    }
}

TEST_SUITE("windows") {
    const ApplianceStateModel model{"a", {0, 150}, 7.5, 30.0, 15.0};

    PowerSeries ramp(std::size_t n, std::int64_t period) {
        PowerSeries s{1000, period, std::vector<double>(n)};
        for (std::size_t i = 0; i < n; ++i) s.values[i] = static_cast<double>((i * 37) % 300);
        return s;
    }

    TEST_CASE("window arithmetic") {
        CHECK(WindowConfig::ukdale().input_length() == 432);
        CHECK(WindowConfig::redd().input_length() == 864);
        CHECK(WindowConfig::ukdale().input_length() * 6 == 43.2 * 60);
        CHECK(WindowConfig::redd().input_length() * 3 == 43.2 * 60);
        CHECK(WindowConfig::redd().s * 3 == 3.2 * 60);
    }

    TEST_CASE("first UK-DALE window is left padded with encoded zeros") {
        const auto mains = ramp(432, 6);
        const auto app = ramp(432, 6);
        const Normalizer norm{50.0, 25.0};
        const auto set = make_windows(mains, app, model, WindowConfig::ukdale(), 32, norm);
        REQUIRE(set.size() == 432 / 32);
        const auto ex = set.at(0);
        REQUIRE(ex.input.size() == 432);
        for (std::size_t i = 0; i < 200; ++i) CHECK(ex.input[i] == norm.apply(0.0));
        // Target index 0 aligns with input index w.
        CHECK(ex.input[200] == norm.apply(mains.values[0]));
        CHECK(ex.target_states.shape() == Shape{32, 2});
    }

    TEST_CASE("REDD window covers 3.2 minutes of output") {
        const auto s = ramp(864, 3);
        const auto set = make_windows(s, s, model, WindowConfig::redd(), 64, Normalizer{});
        REQUIRE(set.size() > 0);
        CHECK(set.at(0).input.size() == 864);
        CHECK(set.at(0).target_power.size() * 3 == 192);
    }

    TEST_CASE("short series and misalignment") {
        const auto s = ramp(20, 6);
        CHECK(make_windows(s, s, model, WindowConfig::ukdale(), 32, Normalizer{}).size() == 0);
        auto shifted = ramp(100, 6);
        shifted.start_time += 6;
        CHECK_THROWS_AS(make_windows(ramp(100, 6), shifted, model, WindowConfig::ukdale(), 32, Normalizer{}), Error);
        CHECK_THROWS_AS(make_windows(ramp(100, 6), ramp(100, 3), model, WindowConfig::ukdale(), 32, Normalizer{}),
                        Error);
        auto holey = ramp(100, 6);
        holey.values[5] = kMissing;
        CHECK_THROWS_AS(make_windows(holey, ramp(100, 6), model, WindowConfig::ukdale(), 32, Normalizer{}), Error);
    }

    TEST_CASE("denormalized targets equal the source readings") {
        const auto mains = ramp(500, 6);
        const auto app = ramp(500, 6);
        const WindowConfig cfg{16, 40};
        for (std::size_t stride : {1u, 7u, 16u}) {
            const auto set = make_windows(mains, app, model, cfg, stride, Normalizer{100.0, 50.0});
            for (std::size_t k = 0; k < set.size(); ++k) {
                const auto ex = set.at(k);
                CHECK(ex.start == k * stride);
                CHECK(ex.start + cfg.s <= app.size());
                for (std::size_t i = 0; i < cfg.s; ++i) {
                    CHECK(model.normalizer().invert(ex.target_power[i]) ==
                          doctest::Approx(app.values[ex.start + i]).epsilon(1e-12));
                    CHECK(ex.target_states.at(i, label_state(app.values[ex.start + i], model)) == 1.0);
                }
            }
        }
    }
}

TEST_SUITE("synth") {
    TEST_CASE("an appliance that never switches gives silent mains") {
        SyntheticScenario sc;
        sc.appliances = {{"idle", {0, 100}, 10.0, 1e-9}};
        sc.duration = 500;
        const auto data = synth_generate(sc);
        for (double v : data.mains.values) CHECK(v == 0.0);
    }

    TEST_CASE("noiseless mains equal the appliance sum exactly") {
        auto sc = two_appliance_scenario(3);
        sc.noise_std = 0.0;
        sc.unknown_load = 0.0;
        sc.duration = 20000;
        const auto data = synth_generate(sc);
        for (std::size_t t = 0; t < sc.duration; ++t) {
            double sum = 0.0;
            for (const auto& a : data.appliances) sum += a.values[t];
            CHECK(data.mains.values[t] == sum);
        }
    }

    TEST_CASE("traces take centroid values only and states match") {
        const auto sc = two_appliance_scenario(4);
        const auto data = synth_generate(sc);
        for (std::size_t i = 0; i < sc.appliances.size(); ++i) {
            const auto& levels = sc.appliances[i].centroids;
            for (std::size_t t = 0; t < sc.duration; ++t) {
                CHECK(data.appliances[i].values[t] == levels[data.states[i][t]]);
            }
        }
    }

    TEST_CASE("duty cycle close to the requested fraction") {
        auto sc = two_appliance_scenario(5);
        sc.duration = 100000;
        const auto data = synth_generate(sc);
        for (const auto& states : data.states) {
            const auto on = std::count_if(states.begin(), states.end(), [](std::size_t s) { return s != 0; });
            CHECK(std::abs(static_cast<double>(on) / 100000.0 - 0.05) <= 0.02);
        }
    }

    TEST_CASE("deterministic in the seed") {
        auto sc = two_appliance_scenario(6);
        sc.duration = 5000;
        CHECK(synth_generate(sc).mains.values == synth_generate(sc).mains.values);
        auto other = sc;
        other.seed = 99;
        CHECK(synth_generate(other).mains.values != synth_generate(sc).mains.values);
    }

    TEST_CASE("scenario file round-trips and bad scenarios are rejected") {
        const auto sc = two_appliance_scenario(8);
        const auto path = scratch("scenario.json");
        save_scenario(sc, path);
        const auto back = load_scenario(path);
        CHECK(synth_generate(back).mains.values == synth_generate(sc).mains.values);
        auto bad = sc;
        bad.appliances[0].centroids = {10, 100};
        CHECK_THROWS_AS(synth_generate(bad), Error);
        bad = sc;
        bad.duration = 0;
        CHECK_THROWS_AS(synth_generate(bad), Error);
    }
}
