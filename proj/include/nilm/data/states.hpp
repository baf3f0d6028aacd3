#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nilm/core/tensor.hpp"
#include "nilm/data/series.hpp"

namespace nilm {

inline constexpr double kDefaultOnThreshold = 15.0;

// Per-appliance operating states: centroids[0] is OFF at 0 W, the rest are
// ascending ON power ratings.
struct ApplianceStateModel {
    std::string appliance_name;
    std::vector<double> centroids;
    double norm_mean = 0.0;
    double norm_std = 1.0;
    double on_threshold = kDefaultOnThreshold;

    std::size_t state_count() const { return centroids.size(); }
    Normalizer normalizer() const { return {norm_mean, norm_std}; }
    void validate() const;
};

// k-means over readings above `on_threshold` with k = state_count - 1
// (farthest-point seeding, 10 seeded restarts, run until assignments stop
// changing), then OFF prepended at 0 W. Normalization statistics are fitted
// on the whole series.
ApplianceStateModel cluster_states(const PowerSeries& series, std::size_t state_count,
                                   double on_threshold = kDefaultOnThreshold, std::uint64_t seed = 0,
                                   std::string appliance_name = "appliance");

// Nearest centroid, ties to the lower index; readings at or below the ON
// threshold are OFF regardless of distance.
std::size_t label_state(double watts, const ApplianceStateModel& model);
std::vector<std::size_t> label_state_indices(std::span<const double> watts, const ApplianceStateModel& model);
// One-hot rows [readings, state_count].
Tensor label_states(std::span<const double> watts, const ApplianceStateModel& model);

void save_state_model(const ApplianceStateModel& model, const std::filesystem::path& path);
ApplianceStateModel load_state_model(const std::filesystem::path& path);

}  // namespace nilm
