#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nilm/data/series.hpp"

namespace nilm {

struct ApplianceSpec {
    std::string name;
    std::vector<double> centroids;    // centroids[0] must be 0 W (OFF)
    double mean_on_duration = 30.0;   // samples per activation
    double on_fraction = 0.05;        // long-run fraction of samples spent ON
};

struct SyntheticScenario {
    std::vector<ApplianceSpec> appliances;
    double unknown_load = 0.0;  // constant background watts
    double noise_std = 0.0;     // Gaussian measurement noise, watts
    std::size_t duration = 0;   // samples
    std::int64_t period = 6;
    std::int64_t start_time = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticData {
    PowerSeries mains;
    std::vector<PowerSeries> appliances;
    std::vector<std::vector<std::size_t>> states;  // centroid index per sample
};

// Each appliance alternates geometric OFF dwells with activations that hold
// one uniformly chosen ON centroid for a duration drawn uniformly from
// [0.5, 1.5] x mean_on_duration. Mains is the appliance sum plus the unknown
// load plus noise, clipped at 0 W. Deterministic in the seed.
SyntheticData synth_generate(const SyntheticScenario& scenario);

// Two-appliance desk-scale scenario: {0, 150} W and {0, 80, 400} W at 5% duty,
// 10 W noise, 20 W background, 200k samples at 6 s.
SyntheticScenario two_appliance_scenario(std::uint64_t seed = 7);

void save_scenario(const SyntheticScenario& scenario, const std::filesystem::path& path);
SyntheticScenario load_scenario(const std::filesystem::path& path);

}  // namespace nilm
