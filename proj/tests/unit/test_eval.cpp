#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "nilm/error.hpp"
#include "nilm/eval/metrics.hpp"
#include "support.hpp"

using namespace nilm;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "nilm_test_eval";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("mae examples") {
        CHECK(mae(std::vector<double>{0, 0, 0}, std::vector<double>{1, 2, 4}) == doctest::Approx(7.0 / 3.0));
        CHECK(mae(std::vector<double>{10, 20, 30}, std::vector<double>{12, 18, 33}) == doctest::Approx(7.0 / 3.0));
        CHECK(mae(std::vector<double>{5, 5}, std::vector<double>{5, 5}) == 0.0);
        CHECK(mae(std::vector<double>{10}, std::vector<double>{4}) == 6.0);
        CHECK_THROWS_AS(mae(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
        CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), Error);
    }

    TEST_CASE("mae against a loop, symmetry and scaling") {
        std::mt19937_64 rng(61);
        {
            const auto a = nilm::testing::random_vector(1000, rng, 0, 3000);
            const auto b = nilm::testing::random_vector(1000, rng, 0, 3000);
            double s = 0.0;
            for (std::size_t i = 0; i < 1000; ++i) s += std::abs(a[i] - b[i]);
            CHECK(std::abs(mae(a, b) - s / 1000.0) <= 1e-9);
        }
        for (int trial = 0; trial < 200; ++trial) {
            const auto a = nilm::testing::random_vector(50, rng, 0, 2000);
            const auto b = nilm::testing::random_vector(50, rng, 0, 2000);
            double s = 0.0;
            for (std::size_t i = 0; i < 50; ++i) s += std::abs(a[i] - b[i]);
            CHECK(std::abs(mae(a, b) - s / 50.0) <= 1e-9);
            CHECK(mae(a, b) == mae(b, a));
            std::vector<double> a3(a), b3(b);
            for (double& v : a3) v *= 3.0;
            for (double& v : b3) v *= 3.0;
            CHECK(mae(a3, b3) == doctest::Approx(3.0 * mae(a, b)).epsilon(1e-12));
        }
    }

    TEST_CASE("sae examples") {
        CHECK(sae(100.0, 100.0) == 0.0);
        CHECK(sae(100.0, 90.0) == doctest::Approx(0.1));
        CHECK(sae(100.0, 130.0) == doctest::Approx(0.3));
        CHECK(sae(100.0, 0.0) == 1.0);
        CHECK_THROWS_AS(sae(0.0, 5.0), Error);
        CHECK_THROWS_AS(sae(-1.0, 5.0), Error);
        CHECK(sae(100.0, 50.0) != sae(50.0, 100.0));
        // Scale free.
        CHECK(sae(7.0, 9.0) == doctest::Approx(sae(7000.0, 9000.0)).epsilon(1e-14));
    }

    TEST_CASE("energy is power times period") {
        CHECK(energy(PowerSeries{0, 6, {100, 200, 0}}) == 1800.0);
        CHECK(energy(PowerSeries{0, 3, {}}) == 0.0);
        CHECK(energy(PowerSeries{0, 6, {100, kMissing, 50}}) == 900.0);
    }
}

TEST_SUITE("report") {
    TEST_CASE("rows follow input order and match independent sums") {
        std::mt19937_64 rng(62);
        std::vector<ReportEntry> entries;
        for (const char* name : {"kettle", "fridge", "microwave"}) {
            ReportEntry e;
            e.appliance = name;
            e.truth = {1000, 6, nilm::testing::random_vector(40, rng, 0, 500)};
            e.variant = {1000, 6, nilm::testing::random_vector(40, rng, 0, 500)};
            entries.push_back(e);
        }
        const auto rows = report(entries);
        REQUIRE(rows.size() == 3);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(rows[k].appliance == entries[k].appliance);
            double r = 0.0, rt = 0.0, abs_err = 0.0;
            for (std::size_t i = 0; i < 40; ++i) {
                r += entries[k].truth.values[i] * 6.0;
                rt += entries[k].variant.values[i] * 6.0;
                abs_err += std::abs(entries[k].truth.values[i] - entries[k].variant.values[i]);
            }
            CHECK(rows[k].samples == 40);
            CHECK(rows[k].truth_energy == doctest::Approx(r).epsilon(1e-12));
            CHECK(rows[k].estimate_energy == doctest::Approx(rt).epsilon(1e-12));
            CHECK(rows[k].mae == doctest::Approx(abs_err / 40.0).epsilon(1e-12));
            CHECK(rows[k].sae == doctest::Approx(std::abs(rt - r) / r).epsilon(1e-12));
        }
    }

    TEST_CASE("truth scored against itself") {
        ReportEntry e{"fridge", {0, 6, {0, 90, 90, 0}}, {0, 6, {0, 90, 90, 0}}, {}};
        const auto rows = report(std::vector<ReportEntry>{e});
        CHECK(rows[0].mae == 0.0);
        CHECK(rows[0].sae == 0.0);
    }

    TEST_CASE("misaligned series are rejected") {
        ReportEntry e{"fridge", {0, 6, {1, 2, 3}}, {6, 6, {1, 2, 3}}, {}};
        CHECK_THROWS_AS(report(std::vector<ReportEntry>{e}), Error);
        e.variant = {0, 3, {1, 2, 3}};
        CHECK_THROWS_AS(report(std::vector<ReportEntry>{e}), Error);
        e.variant = {0, 6, {1, 2}};
        CHECK_THROWS_AS(report(std::vector<ReportEntry>{e}), Error);
    }

    TEST_CASE("metric table round trip") {
        const std::vector<MetricRow> rows{{"kettle", 12.345678901234, 0.0123456789, 100, 123456.789, 130000.5},
                                          {"fridge", 1.0 / 3.0, 2.0 / 3.0, 7, 42.0, 0.0}};
        const auto path = scratch("metrics.csv");
        write_metric_table(rows, path);
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        CHECK(header == "appliance,MAE_W,SAE,T,r,r_tilde");
        const auto back = read_metric_table(path);
        REQUIRE(back.size() == 2);
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(back[k].appliance == rows[k].appliance);
            CHECK(back[k].mae == rows[k].mae);
            CHECK(back[k].sae == rows[k].sae);
            CHECK(back[k].samples == rows[k].samples);
            CHECK(back[k].truth_energy == rows[k].truth_energy);
            CHECK(back[k].estimate_energy == rows[k].estimate_energy);
        }
    }

    TEST_CASE("plot data") {
        ReportEntry e{"kettle", {600, 6, {0, 2000}}, {600, 6, {10, 1900}}, {600, 6, {5, 1950}}};
        const auto path = scratch("kettle.plot.csv");
        write_plot_data(e, path);
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        CHECK(line == "t,truth,plain,variant");
        std::getline(in, line);
        CHECK(line == "600,0,5,10");
        std::getline(in, line);
        CHECK(line == "606,2000,1950,1900");
        CHECK_FALSE(std::getline(in, line));
    }

    TEST_CASE("align restricts to the common span") {
        PowerSeries a{0, 6, {0, 1, 2, 3, 4, 5}};
        PowerSeries b{12, 6, {10, 11, 12, 13, 14, 15}};
        align_series(a, b);
        CHECK(a.start_time == 12);
        CHECK(b.start_time == 12);
        CHECK(a.values == std::vector<double>{2, 3, 4, 5});
        CHECK(b.values == std::vector<double>{10, 11, 12, 13});
        PowerSeries c{3, 6, {1}}, d{0, 6, {1}};
        CHECK_THROWS_AS(align_series(c, d), Error);
        PowerSeries e{0, 6, {1}}, f{100, 6, {1}};
        CHECK_THROWS_AS(align_series(e, f), Error);
    }
}
