#include "nilm/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "nilm/error.hpp"

namespace nilm {

void SyntheticScenario::validate() const {
    if (duration == 0) throw Error("scenario: duration must be positive");
    if (period <= 0) throw Error("scenario: period must be positive");
    if (noise_std < 0.0 || unknown_load < 0.0) throw Error("scenario: noise and unknown load must be >= 0");
    for (const auto& a : appliances) {
        if (a.centroids.size() < 2 || a.centroids[0] != 0.0) {
            throw Error("scenario: appliance '" + a.name + "' needs OFF at 0 W plus at least one ON level");
        }
        if (!(a.mean_on_duration >= 1.0)) throw Error("scenario: appliance '" + a.name + "' mean_on_duration < 1");
        if (!(a.on_fraction > 0.0 && a.on_fraction < 1.0)) {
            throw Error("scenario: appliance '" + a.name + "' on_fraction must lie in (0, 1)");
        }
    }
}

SyntheticData synth_generate(const SyntheticScenario& sc) {
    sc.validate();
    SyntheticData data;
    data.mains = PowerSeries{sc.start_time, sc.period, std::vector<double>(sc.duration, sc.unknown_load)};

    for (std::size_t a = 0; a < sc.appliances.size(); ++a) {
        const ApplianceSpec& spec = sc.appliances[a];
        std::seed_seq seq{sc.seed, static_cast<std::uint64_t>(a), std::uint64_t{0x5eed}};
        std::mt19937_64 rng(seq);

        const double mean_off = spec.mean_on_duration * (1.0 - spec.on_fraction) / spec.on_fraction;
        std::geometric_distribution<long> off_dwell(1.0 / std::max(mean_off, 1.0));
        const auto on_lo = std::max<long>(1, std::lround(std::ceil(0.5 * spec.mean_on_duration)));
        const auto on_hi = std::max<long>(on_lo, std::lround(std::floor(1.5 * spec.mean_on_duration)));
        std::uniform_int_distribution<long> on_dwell(on_lo, on_hi);
        std::uniform_int_distribution<std::size_t> on_state(1, spec.centroids.size() - 1);

        PowerSeries trace{sc.start_time, sc.period, std::vector<double>(sc.duration, 0.0)};
        std::vector<std::size_t> states(sc.duration, 0);
        std::size_t t = 0;
        while (t < sc.duration) {
            t += static_cast<std::size_t>(1 + off_dwell(rng));
            if (t >= sc.duration) break;
            const std::size_t state = on_state(rng);
            const std::size_t end = std::min(sc.duration, t + static_cast<std::size_t>(on_dwell(rng)));
            for (; t < end; ++t) {
                states[t] = state;
                trace.values[t] = spec.centroids[state];
            }
        }
        for (std::size_t i = 0; i < sc.duration; ++i) data.mains.values[i] += trace.values[i];
        data.appliances.push_back(std::move(trace));
        data.states.push_back(std::move(states));
    }

    if (sc.noise_std > 0.0) {
        std::seed_seq seq{sc.seed, std::uint64_t{0x6e6f697365}};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> noise(0.0, sc.noise_std);
        for (double& v : data.mains.values) v = std::max(0.0, v + noise(rng));
    }
    return data;
}

SyntheticScenario two_appliance_scenario(std::uint64_t seed) {
    SyntheticScenario sc;
    sc.appliances = {
        {"appliance_a", {0.0, 150.0}, 40.0, 0.05},
        {"appliance_b", {0.0, 80.0, 400.0}, 30.0, 0.05},
    };
    sc.unknown_load = 20.0;
    sc.noise_std = 10.0;
    sc.duration = 200000;
    sc.period = 6;
    sc.seed = seed;
    return sc;
}

void save_scenario(const SyntheticScenario& sc, const std::filesystem::path& path) {
    nlohmann::json j;
    j["unknown_load"] = sc.unknown_load;
    j["noise_std"] = sc.noise_std;
    j["duration"] = sc.duration;
    j["period"] = sc.period;
    j["start_time"] = sc.start_time;
    j["seed"] = sc.seed;
    j["appliances"] = nlohmann::json::array();
    for (const auto& a : sc.appliances) {
        j["appliances"].push_back({{"name", a.name},
                                   {"centroids", a.centroids},
                                   {"mean_on_duration", a.mean_on_duration},
                                   {"on_fraction", a.on_fraction}});
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

SyntheticScenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    SyntheticScenario sc;
    try {
        const auto j = nlohmann::json::parse(in);
        sc.unknown_load = j.value("unknown_load", 0.0);
        sc.noise_std = j.value("noise_std", 0.0);
        sc.duration = j.at("duration").get<std::size_t>();
        sc.period = j.value("period", std::int64_t{6});
        sc.start_time = j.value("start_time", std::int64_t{0});
        sc.seed = j.value("seed", std::uint64_t{0});
        for (const auto& a : j.at("appliances")) {
            sc.appliances.push_back({a.at("name").get<std::string>(), a.at("centroids").get<std::vector<double>>(),
                                     a.value("mean_on_duration", 30.0), a.value("on_fraction", 0.05)});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    sc.validate();
    return sc;
}

}  // namespace nilm
